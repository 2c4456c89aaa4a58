#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rshom/ergodics.hpp"

namespace rshom {

enum class Status { pass = 0, flag = 1, fail = 2 };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::flag: return "flag";
    default: return "fail";
  }
}

/// pass within 3 sigma, flag to 4, fail beyond.
inline Status z_status(double z) {
  double a = std::abs(z);
  if (a <= 3.0) return Status::pass;
  if (a <= 4.0) return Status::flag;
  return Status::fail;
}

struct CheckRow {
  std::string name;
  std::string anchor;  // stable claim identifier; required by the linter
  double target = 0.0;
  double estimate = 0.0;
  double stderr_ = 0.0;
  double z = 0.0;
  Status status = Status::pass;
};

inline CheckRow row_from_stat(const EnsembleStat& s) {
  CheckRow r;
  r.name = s.name;
  r.anchor = s.anchor;
  r.target = s.target;
  r.estimate = s.estimate;
  r.stderr_ = s.stderr_;
  r.z = s.z;
  r.status = z_status(s.z);
  return r;
}

inline CheckRow bool_row(const std::string& name, const std::string& anchor,
                         double estimate, double target, bool ok) {
  CheckRow r;
  r.name = name;
  r.anchor = anchor;
  r.target = target;
  r.estimate = estimate;
  r.status = ok ? Status::pass : Status::fail;
  return r;
}

struct ExperimentConfig {
  std::string kind;        // field | corrector | effective | ipm | ergodic | clt
  std::string field_path;  // JSON FieldSpec on disk (schema rshom-field/1)
  std::vector<double> eps_ladder{0.2};
  double T = 1.0;
  double step_ratio = 0.1;
  double step_exponent = 2.0;  // dt = step_ratio * eps^step_exponent
  long paths = 1000;
  long limit_paths = 10000;
  double limit_dt = 0.0;  // 0 -> dt of the finest scale in the ladder
  int cutoff = 16;
  int direction = 1;  // 1-based
  std::vector<double> lambda_ladder{1.0, 0.25, 0.0625, 0.015625};
  double solver_tol = 1e-10;
  double route_tol = 1e-6;
  double slope_A = 1.0;
  std::vector<double> t_list{0.25, 0.5, 1.0};
  std::string reflect = "plain";  // plain | bridge
  std::uint64_t seed = 20260823;
  std::string outdir = "out";

  ReflectMode reflect_mode() const {
    if (reflect == "plain") return ReflectMode::plain;
    if (reflect == "bridge") return ReflectMode::bridge;
    throw ConfigInvalid("unknown reflect mode '" + reflect + "'");
  }

  void validate() const {
    static const std::vector<std::string> kinds{"field",    "corrector", "effective",
                                                "ipm",      "ergodic",   "clt"};
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
      throw ConfigInvalid("unknown experiment kind '" + kind + "'");
    if (field_path.empty()) throw ConfigInvalid("field_path required");
    if (eps_ladder.empty()) throw ConfigInvalid("eps_ladder must be nonempty");
    for (double e : eps_ladder)
      if (e <= 0.0) throw ConfigInvalid("epsilon values must be positive");
    if (paths < 1 || limit_paths < 1) throw ConfigInvalid("path counts >= 1");
    if (cutoff < 2) throw ConfigInvalid("cutoff must be >= 2");
    if (direction < 1) throw ConfigInvalid("direction is 1-based");
    (void)reflect_mode();
  }
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<CheckRow> rows;
  nlohmann::json series = nlohmann::json::object();  // plot-data sections
  std::vector<std::string> artifacts;
  double timing_seconds = 0.0;  // excluded from determinism comparisons

  Status rollup() const {
    Status worst = Status::pass;
    for (const auto& r : rows)
      if (static_cast<int>(r.status) > static_cast<int>(worst)) worst = r.status;
    return worst;
  }
};

/// Every check row must carry a claim anchor; reports without one are
/// rejected before they are written.
inline void lint_report(const ExperimentReport& rep) {
  for (const auto& r : rep.rows)
    if (r.anchor.empty())
      throw ConfigInvalid("report row '" + r.name + "' lacks a claim anchor");
}

// ---- serialization ----

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"schema", "rshom-experiment/1"},
                     {"kind", c.kind},
                     {"field_path", c.field_path},
                     {"eps_ladder", c.eps_ladder},
                     {"T", c.T},
                     {"step_ratio", c.step_ratio},
                     {"step_exponent", c.step_exponent},
                     {"paths", c.paths},
                     {"limit_paths", c.limit_paths},
                     {"limit_dt", c.limit_dt},
                     {"cutoff", c.cutoff},
                     {"direction", c.direction},
                     {"lambda_ladder", c.lambda_ladder},
                     {"solver_tol", c.solver_tol},
                     {"route_tol", c.route_tol},
                     {"slope_A", c.slope_A},
                     {"t_list", c.t_list},
                     {"reflect", c.reflect},
                     {"seed", c.seed},
                     {"outdir", c.outdir}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  ExperimentConfig def;
  c.kind = j.at("kind").get<std::string>();
  c.field_path = j.at("field_path").get<std::string>();
  c.eps_ladder = j.value("eps_ladder", def.eps_ladder);
  c.T = j.value("T", def.T);
  c.step_ratio = j.value("step_ratio", def.step_ratio);
  c.step_exponent = j.value("step_exponent", def.step_exponent);
  c.paths = j.value("paths", def.paths);
  c.limit_paths = j.value("limit_paths", def.limit_paths);
  c.limit_dt = j.value("limit_dt", def.limit_dt);
  c.cutoff = j.value("cutoff", def.cutoff);
  c.direction = j.value("direction", def.direction);
  c.lambda_ladder = j.value("lambda_ladder", def.lambda_ladder);
  c.solver_tol = j.value("solver_tol", def.solver_tol);
  c.route_tol = j.value("route_tol", def.route_tol);
  c.slope_A = j.value("slope_A", def.slope_A);
  c.t_list = j.value("t_list", def.t_list);
  c.reflect = j.value("reflect", def.reflect);
  c.seed = j.value("seed", def.seed);
  c.outdir = j.value("outdir", def.outdir);
}

inline void to_json(nlohmann::json& j, const CheckRow& r) {
  j = nlohmann::json{{"name", r.name},       {"anchor", r.anchor},
                     {"target", r.target},   {"estimate", r.estimate},
                     {"stderr", r.stderr_},  {"z", r.z},
                     {"status", status_name(r.status)}};
}

inline void from_json(const nlohmann::json& j, CheckRow& r) {
  r.name = j.at("name").get<std::string>();
  r.anchor = j.at("anchor").get<std::string>();
  r.target = j.at("target").get<double>();
  r.estimate = j.at("estimate").get<double>();
  r.stderr_ = j.at("stderr").get<double>();
  r.z = j.at("z").get<double>();
  std::string s = j.at("status").get<std::string>();
  r.status = s == "pass" ? Status::pass : (s == "flag" ? Status::flag : Status::fail);
}

inline void to_json(nlohmann::json& j, const ExperimentReport& rep) {
  j = nlohmann::json{{"schema", "rshom-report/1"},
                     {"config", rep.config},
                     {"rows", rep.rows},
                     {"series", rep.series},
                     {"artifacts", rep.artifacts},
                     {"status", status_name(rep.rollup())},
                     {"timing_seconds", rep.timing_seconds}};
}

inline void from_json(const nlohmann::json& j, ExperimentReport& rep) {
  rep.config = j.at("config").get<ExperimentConfig>();
  rep.rows = j.at("rows").get<std::vector<CheckRow>>();
  rep.series = j.value("series", nlohmann::json::object());
  rep.artifacts = j.value("artifacts", std::vector<std::string>{});
  rep.timing_seconds = j.value("timing_seconds", 0.0);
}

// ---- persistence helpers ----

inline FieldSpec load_field_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open field spec '" + path + "'");
  nlohmann::json j;
  in >> j;
  if (j.value("schema", "") != "rshom-field/1")
    throw BadSpec("field spec schema mismatch in '" + path + "'");
  return j.get<FieldSpec>();
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open experiment config '" + path + "'");
  nlohmann::json j;
  in >> j;
  if (j.value("schema", "") != "rshom-experiment/1")
    throw ConfigInvalid("experiment schema mismatch in '" + path + "'");
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot write '" + path + "'");
  out << body;
  if (!out) throw IoFailure("short write to '" + path + "'");
}

}  // namespace detail

/// One CSV per series section of the report; returns the file paths.
inline std::vector<std::string> emit_plot_data(const ExperimentReport& rep,
                                               const std::string& outdir) {
  std::filesystem::create_directories(outdir);
  std::vector<std::string> files;
  for (auto it = rep.series.begin(); it != rep.series.end(); ++it) {
    const nlohmann::json& sec = it.value();
    if (!sec.contains("columns") || sec["columns"].empty()) continue;
    std::vector<std::string> cols = sec.at("columns").get<std::vector<std::string>>();
    std::ostringstream body;
    for (std::size_t c = 0; c < cols.size(); ++c)
      body << (c ? "," : "") << cols[c];
    body << "\n";
    for (const auto& row : sec.at("rows")) {
      for (std::size_t c = 0; c < cols.size(); ++c)
        body << (c ? "," : "") << detail::fmt(row[c].get<double>());
      body << "\n";
    }
    std::string path = outdir + "/" + it.key() + ".csv";
    detail::write_text(path, body.str());
    files.push_back(path);
  }
  return files;
}

/// Stream descriptors for the documented seed plan: first outputs exposed so
/// distinctness is checkable.
struct StreamDescriptor {
  std::uint64_t master = 0;
  std::uint64_t id = 0;
  std::array<std::uint32_t, 4> probe{};
};

inline std::vector<StreamDescriptor> seed_plan(std::uint64_t master, long n) {
  if (n < 1) throw ConfigInvalid("seed plan needs n >= 1");
  std::vector<StreamDescriptor> out(n);
  for (long i = 0; i < n; ++i) {
    out[i].master = master;
    out[i].id = static_cast<std::uint64_t>(i);
    PhiloxStream s(master, out[i].id);
    for (auto& p : out[i].probe) p = s.next_u32();
  }
  return out;
}

namespace detail {

// Distinct sub-master per purpose/index so ensembles at different scales do
// not share per-path streams.
inline std::uint64_t sub_seed(std::uint64_t master, std::uint64_t salt) {
  std::uint64_t x = master ^ (0x9E3779B97F4A7C15ull * (salt + 1));
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  return x;
}

inline nlohmann::json series_section(std::vector<std::string> cols) {
  nlohmann::json s;
  s["columns"] = std::move(cols);
  s["rows"] = nlohmann::json::array();
  return s;
}

// ---- per-kind pipelines ----

inline void run_field(const ExperimentConfig& cfg, const CoefficientField& field,
                      ExperimentReport& rep) {
  rep.rows.push_back(bool_row("ellipticity_certificate", "uniform-ellipticity",
                              field.ellipticity(), 0.0,
                              field.ellipticity() > 0.0));
  Vec zero = Vec::Zero(field.dim());
  Mat a0 = field.a_at(zero);
  rep.rows.push_back(bool_row("a11_normalization", "normal-component-unit",
                              a0(0, 0), 1.0, a0(0, 0) == 1.0));
  rep.rows.push_back(bool_row(
      "symmetry", "coefficient-symmetry",
      (a0 - a0.transpose()).cwiseAbs().maxCoeff(), 0.0,
      (a0 - a0.transpose()).cwiseAbs().maxCoeff() <= 1e-14));
}

inline void run_corrector(const ExperimentConfig& cfg,
                          const CoefficientField& field, ExperimentReport& rep) {
  TorusOperator op(field, cfg.cutoff);
  int dir = cfg.direction - 1;
  if (dir < 0 || dir >= field.dim()) throw ConfigInvalid("direction out of range");
  CorrectorSolution cell = solve_cell(op, dir, cfg.solver_tol);
  rep.rows.push_back(bool_row("cell_residual", "cell-problem-solve",
                              cell.residual, 0.0,
                              cell.residual <= cfg.solver_tol));
  DecayReport dec = resolvent_decay_scan(op, dir, cfg.lambda_ladder, cfg.solver_tol);
  bool mono = true;
  for (std::size_t i = 1; i < dec.lam_u2.size(); ++i)
    if (dec.lam_u2[i] > dec.lam_u2[i - 1]) mono = false;
  rep.rows.push_back(bool_row("lambda_u2_monotone", "resolvent-decay",
                              dec.lam_u2.empty() ? 0.0 : dec.lam_u2.back(), 0.0,
                              mono));
  double bnorm = TorusOperator::l2norm(op.rhs(dir));
  double bound = bnorm / std::sqrt(field.ellipticity()) + 1e-10;
  bool grad_ok = true;
  for (double g : dec.sqrtlam_Du)
    if (g > bound) grad_ok = false;
  rep.rows.push_back(bool_row("gradient_energy_bound", "resolvent-gradient-bound",
                              dec.sqrtlam_Du.empty() ? 0.0 : dec.sqrtlam_Du.front(),
                              bound, grad_ok));
  nlohmann::json sec =
      series_section({"lambda", "lam_u2", "sqrtlam_Du", "dist_to_zeta"});
  for (std::size_t i = 0; i < dec.lambda.size(); ++i)
    sec["rows"].push_back({dec.lambda[i], dec.lam_u2[i], dec.sqrtlam_Du[i],
                           dec.dist_to_zeta[i]});
  rep.series["decay"] = std::move(sec);
}

inline void run_effective(const ExperimentConfig& cfg,
                          const CoefficientField& field, ExperimentReport& rep) {
  const int d = field.dim();
  TorusOperator op(field, cfg.cutoff);
  std::vector<CorrectorSolution> cors;
  for (int i = 0; i < d; ++i) cors.push_back(solve_cell(op, i, cfg.solver_tol));
  EffectiveCoefficients eff = effective_matrix(op, cors, cfg.route_tol);
  double var_dev = 0.0;
  for (int i = 0; i < d; ++i) {
    Vec X = Vec::Zero(d);
    X[i] = 1.0;
    double v = variational_minimize(op, X, cfg.solver_tol);
    var_dev = std::max(var_dev, std::abs(v - eff.Abar(i, i)));
  }
  eff.resid_var_sym = var_dev;
  rep.rows.push_back(bool_row("route_sym_vs_short", "effective-route-agreement",
                              eff.resid_sym_short, 0.0,
                              eff.resid_sym_short <= cfg.route_tol));
  rep.rows.push_back(bool_row("route_var_vs_sym", "effective-route-agreement",
                              eff.resid_var_sym, 0.0,
                              eff.resid_var_sym <= cfg.route_tol));
  rep.rows.push_back(bool_row("reflection_is_first_row", "reflection-row-identity",
                              eff.resid_gamma, 0.0,
                              eff.resid_gamma <= cfg.route_tol));
  double lo = min_eigenvalue(eff.Abar - eff.Lambda * Mat::Identity(d, d));
  double hi = min_eigenvalue(field.spec().base - eff.Abar);
  rep.rows.push_back(bool_row("lower_bound", "effective-matrix-sandwich", lo, 0.0,
                              lo >= -1e-8));
  rep.rows.push_back(bool_row("upper_bound", "effective-matrix-sandwich", hi, 0.0,
                              hi >= -1e-8));
  double ortho = 0.0;
  for (const auto& c : cors)
    ortho = std::max(ortho, orthogonality_residual(op, c));
  rep.rows.push_back(bool_row("flux_orthogonality", "corrector-flux-orthogonality",
                              ortho, 0.0, ortho <= 1e-8));
  nlohmann::json sec = series_section({"i", "j", "Abar", "Abar_short"});
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      sec["rows"].push_back({static_cast<double>(i + 1),
                             static_cast<double>(j + 1), eff.Abar(i, j),
                             eff.Abar_short(i, j)});
  rep.series["effective"] = std::move(sec);
  nlohmann::json je;
  to_json(je, eff);
  rep.series["coefficients"] = nlohmann::json{{"columns", nlohmann::json::array()},
                                              {"rows", nlohmann::json::array()}};
  rep.series["coefficients"]["value"] = je;
}

inline void run_ipm(const ExperimentConfig& cfg, const CoefficientField& field,
                    ExperimentReport& rep) {
  ConfiningPotential pot(cfg.slope_A, field.dim());
  std::vector<IpmObservable> vol;
  vol.push_back({"one", [](const Vec&, const Vec&) { return 1.0; }, 1.0});
  vol.push_back({"x1", [](const Vec& x, const Vec&) { return x[0]; },
                 pot.volume_integral([](const Vec& x) { return x[0]; })});
  vol.push_back({"cos_phase1",
                 [](const Vec&, const Vec& w) { return std::cos(2.0 * M_PI * w[0]); },
                 0.0});
  std::vector<IpmObservable> bnd;
  bnd.push_back({"one", [](const Vec&, const Vec&) { return 1.0; },
                 pot.boundary_total_mass()});
  IpmConfig ic;
  ic.epsilon = cfg.eps_ladder.front();
  ic.step_ratio = cfg.step_ratio;
  ic.t_list = cfg.t_list;
  ic.N = cfg.paths;
  ic.seed = cfg.seed;
  ic.reflect = cfg.reflect_mode();
  IpmReport ipm = verify_invariant_measure(field, pot, vol, bnd, ic);
  nlohmann::json sec =
      series_section({"t", "estimate", "stderr", "target", "z"});
  for (const auto& s : ipm.volume) {
    rep.rows.push_back(row_from_stat(s));
    sec["rows"].push_back({s.t, s.estimate, s.stderr_, s.target, s.z});
  }
  for (const auto& s : ipm.boundary) {
    rep.rows.push_back(row_from_stat(s));
    sec["rows"].push_back({s.t, s.estimate, s.stderr_, s.target, s.z});
  }
  rep.series["ipm"] = std::move(sec);
}

inline void run_ergodic(const ExperimentConfig& cfg,
                        const CoefficientField& field, ExperimentReport& rep) {
  const int d = field.dim();
  const int grid_n = 64;
  nlohmann::json sec = series_section(
      {"epsilon", "volume_disc", "volume_z", "boundary_disc", "boundary_z"});
  std::vector<double> vol_disc, bnd_disc;
  for (std::size_t e = 0; e < cfg.eps_ladder.size(); ++e) {
    EnsembleConfig ec;
    ec.epsilon = cfg.eps_ladder[e];
    ec.T = cfg.T;
    ec.step_ratio = cfg.step_ratio;
    ec.start = Vec::Zero(d);
    ec.omega = Vec::Zero(d);
    ec.annealed_omega = true;
    ec.reflect = cfg.reflect_mode();
    ec.N = cfg.paths;
    ec.seed = sub_seed(cfg.seed, e);
    Ensemble ens = simulate_ensemble(field, ec);
    EnsembleStat v = verify_volume_average(
        ens, [](const Vec& w) { return std::cos(2.0 * M_PI * w[0]); }, field,
        ec.epsilon, grid_n, "volume_cos1");
    EnsembleStat b = verify_boundary_average(
        ens, [](const Vec& w) { return std::cos(2.0 * M_PI * w[1 % w.size()]); },
        field, ec.epsilon, grid_n, "boundary_cos2");
    EnsembleStat ex = verify_boundary_average(
        ens, [](const Vec&) { return 1.0; }, field, ec.epsilon, grid_n,
        "boundary_one");
    rep.rows.push_back(row_from_stat(v));
    rep.rows.push_back(row_from_stat(b));
    rep.rows.push_back(bool_row("boundary_exact_identity@eps=" +
                                    std::to_string(ec.epsilon),
                                "boundary-time-average", ex.discrepancy, 0.0,
                                ex.discrepancy <= 1e-12));
    sec["rows"].push_back({ec.epsilon, v.discrepancy, v.z, b.discrepancy, b.z});
    vol_disc.push_back(v.discrepancy);
    bnd_disc.push_back(b.discrepancy);
  }
  if (cfg.eps_ladder.size() > 1) {
    std::size_t big = 0, small = 0;
    for (std::size_t i = 1; i < cfg.eps_ladder.size(); ++i) {
      if (cfg.eps_ladder[i] > cfg.eps_ladder[big]) big = i;
      if (cfg.eps_ladder[i] < cfg.eps_ladder[small]) small = i;
    }
    rep.rows.push_back(bool_row("volume_scale_trend", "interior-time-average",
                                vol_disc[small], vol_disc[big],
                                vol_disc[small] <= vol_disc[big]));
    rep.rows.push_back(bool_row("boundary_scale_trend", "boundary-time-average",
                                bnd_disc[small], bnd_disc[big],
                                bnd_disc[small] <= bnd_disc[big]));
  }
  rep.series["ergodic"] = std::move(sec);
}

inline void run_clt(const ExperimentConfig& cfg, const CoefficientField& field,
                    ExperimentReport& rep) {
  const int d = field.dim();
  TorusOperator op(field, cfg.cutoff);
  std::vector<CorrectorSolution> cors;
  for (int i = 0; i < d; ++i) cors.push_back(solve_cell(op, i, cfg.solver_tol));
  EffectiveCoefficients eff = effective_matrix(op, cors, cfg.route_tol);

  std::vector<double> ladder = cfg.eps_ladder;
  std::sort(ladder.begin(), ladder.end(), std::greater<double>());
  CltConfig cc;
  cc.T = cfg.T;
  cc.step_ratio = cfg.step_ratio;
  cc.step_exponent = cfg.step_exponent;
  cc.N = cfg.paths;
  cc.reflect = cfg.reflect_mode();
  // common random numbers across the ladder: scale comparisons difference
  // out most of the Monte Carlo noise
  cc.seed = sub_seed(cfg.seed, 1);
  std::vector<EpsEnsemble> ensembles;
  for (double eps : ladder) ensembles.push_back(draw_eps_ensemble(field, eps, cc));
  double limit_dt = cfg.limit_dt > 0.0
                        ? cfg.limit_dt
                        : cfg.step_ratio * std::pow(ladder.back(), cfg.step_exponent);
  CltReport clt = clt_compare(ensembles, eff.Abar, eff.Gamma, cfg.limit_paths,
                              limit_dt, sub_seed(cfg.seed, 0));

  nlohmann::json sec = series_section({"epsilon", "ks_stat", "ks_p", "var2",
                                       "var2_target", "var2_disc", "K_mean",
                                       "K_z"});
  for (const auto& r : clt.rows) {
    bool finest = &r == &clt.rows.back();
    CheckRow ks;
    ks.name = "ks_first_coordinate@eps=" + std::to_string(r.epsilon);
    ks.anchor = "endpoint-marginal-law";
    ks.target = 0.01;
    ks.estimate = r.ks_p;
    ks.status = r.ks_p >= 0.01 ? Status::pass
                               : (r.ks_p >= 0.001 ? Status::flag : Status::fail);
    rep.rows.push_back(ks);
    // coarse scales are expected to carry bias; only the finest scale is a
    // hypothesis, the others feed the trend row below
    CheckRow vz;
    vz.name = "tangential_second_moment@eps=" + std::to_string(r.epsilon);
    vz.anchor = "endpoint-moment-match";
    vz.estimate = r.var2;
    vz.target = r.var2_target;
    vz.z = r.second_moment_z[d - 1];
    vz.status = finest ? z_status(vz.z) : Status::pass;
    rep.rows.push_back(vz);
    EnsembleStat kz;
    kz.name = "local_time_mean@eps=" + std::to_string(r.epsilon);
    kz.anchor = "endpoint-local-time-match";
    kz.estimate = r.K_mean;
    kz.target = clt.limit_K_mean;
    kz.z = r.K_z;
    rep.rows.push_back(row_from_stat(kz));
    sec["rows"].push_back({r.epsilon, r.ks_stat, r.ks_p, r.var2, r.var2_target,
                           r.var2_disc, r.K_mean, r.K_z});
  }
  if (clt.rows.size() > 1) {
    bool trend =
        clt.rows.back().var2_disc <= clt.rows.front().var2_disc;
    rep.rows.push_back(bool_row("variance_scale_trend", "endpoint-moment-match",
                                clt.rows.back().var2_disc,
                                clt.rows.front().var2_disc, trend));
  }
  rep.series["clt"] = std::move(sec);
}

}  // namespace detail

/// Dispatches the experiment pipeline, lints, writes report + plot CSVs.
inline ExperimentReport run(const ExperimentConfig& cfg) {
  cfg.validate();
  auto t0 = std::chrono::steady_clock::now();
  FieldSpec spec = load_field_spec(cfg.field_path);
  CoefficientField field = build_field(spec);
  ExperimentReport rep;
  rep.config = cfg;
  if (cfg.kind == "field") detail::run_field(cfg, field, rep);
  else if (cfg.kind == "corrector") detail::run_corrector(cfg, field, rep);
  else if (cfg.kind == "effective") detail::run_effective(cfg, field, rep);
  else if (cfg.kind == "ipm") detail::run_ipm(cfg, field, rep);
  else if (cfg.kind == "ergodic") detail::run_ergodic(cfg, field, rep);
  else if (cfg.kind == "clt") detail::run_clt(cfg, field, rep);
  lint_report(rep);
  std::filesystem::create_directories(cfg.outdir);
  // CSVs first so the artifact list lands in the report
  rep.artifacts = emit_plot_data(rep, cfg.outdir);
  rep.timing_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json j;
  to_json(j, rep);
  detail::write_text(cfg.outdir + "/report.json", j.dump(2) + "\n");
  rep.artifacts.push_back(cfg.outdir + "/report.json");
  return rep;
}

}  // namespace rshom
