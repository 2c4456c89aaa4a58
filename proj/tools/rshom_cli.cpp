#include <iostream>

#include <CLI11.hpp>

#include "rshom/report.hpp"

namespace {

using rshom::ExperimentConfig;

void add_common(CLI::App* cmd, ExperimentConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path,
                  "experiment JSON (overrides the other flags)");
  cmd->add_option("--field", cfg.field_path, "field spec JSON");
  cmd->add_option("--eps", cfg.eps_ladder, "epsilon ladder");
  cmd->add_option("--horizon", cfg.T, "time horizon T");
  cmd->add_option("--step-ratio", cfg.step_ratio, "c in dt = c*eps^p");
  cmd->add_option("--step-exponent", cfg.step_exponent, "p in dt = c*eps^p");
  cmd->add_option("--paths", cfg.paths, "ensemble size");
  cmd->add_option("--limit-paths", cfg.limit_paths, "limit ensemble size");
  cmd->add_option("--limit-dt", cfg.limit_dt, "limit ensemble step");
  cmd->add_option("--cutoff", cfg.cutoff, "Fourier cutoff");
  cmd->add_option("--direction", cfg.direction, "coordinate direction (1-based)");
  cmd->add_option("--lambda", cfg.lambda_ladder, "resolvent lambda ladder");
  cmd->add_option("--solver-tol", cfg.solver_tol, "CG relative tolerance");
  cmd->add_option("--route-tol", cfg.route_tol, "route agreement tolerance");
  cmd->add_option("--slope", cfg.slope_A, "confining potential slope A");
  cmd->add_option("--times", cfg.t_list, "observation times");
  cmd->add_option("--reflect", cfg.reflect, "reflection scheme: plain|bridge");
  cmd->add_option("--seed", cfg.seed, "master seed");
  cmd->add_option("--out", cfg.outdir, "output directory");
}

int run_kind(const std::string& kind, ExperimentConfig cfg,
             const std::string& config_path) {
  if (!config_path.empty()) cfg = rshom::load_experiment_config(config_path);
  cfg.kind = kind;
  rshom::ExperimentReport rep = rshom::run(cfg);
  for (const auto& r : rep.rows)
    std::cout << rshom::status_name(r.status) << "  " << r.name
              << "  estimate=" << r.estimate << " target=" << r.target
              << " z=" << r.z << "\n";
  std::cout << "report: " << cfg.outdir << "/report.json  status: "
            << rshom::status_name(rep.rollup()) << "\n";
  return static_cast<int>(rep.rollup());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"half-space reflected-diffusion homogenization laboratory"};
  app.require_subcommand(1);

  ExperimentConfig cfg;
  std::string config_path;
  const char* env_out = std::getenv("RSHOM_OUT");
  if (env_out) cfg.outdir = env_out;

  auto* field = app.add_subcommand("field", "coefficient field tools");
  auto* field_check =
      field->add_subcommand("check", "validate and certify a field spec");
  auto* corrector = app.add_subcommand("corrector", "cell-problem solver");
  auto* corrector_solve =
      corrector->add_subcommand("solve", "solve cell + resolvent ladder");
  auto* effective = app.add_subcommand("effective", "effective coefficients");
  auto* effective_compute =
      effective->add_subcommand("compute", "all routes with cross-checks");
  auto* verify = app.add_subcommand("verify", "statistical verifiers");
  auto* verify_ipm =
      verify->add_subcommand("ipm", "invariant-measure identities");
  auto* verify_ergodic =
      verify->add_subcommand("ergodic", "interior/boundary time averages");
  auto* verify_clt = verify->add_subcommand("clt", "scaling-limit comparison");
  auto* report = app.add_subcommand("report", "report utilities");
  auto* report_plot =
      report->add_subcommand("plot", "re-emit plot CSVs from a report");
  for (CLI::App* c : {field, corrector, effective, verify, report})
    c->require_subcommand(1);

  for (CLI::App* c : {field_check, corrector_solve, effective_compute,
                      verify_ipm, verify_ergodic, verify_clt})
    add_common(c, cfg, config_path);

  std::string report_path, plot_out = cfg.outdir;
  report_plot->add_option("--report", report_path, "report JSON path")
      ->required();
  report_plot->add_option("--out", plot_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (field_check->parsed()) return run_kind("field", cfg, config_path);
    if (corrector_solve->parsed())
      return run_kind("corrector", cfg, config_path);
    if (effective_compute->parsed())
      return run_kind("effective", cfg, config_path);
    if (verify_ipm->parsed()) return run_kind("ipm", cfg, config_path);
    if (verify_ergodic->parsed()) return run_kind("ergodic", cfg, config_path);
    if (verify_clt->parsed()) return run_kind("clt", cfg, config_path);
    if (report_plot->parsed()) {
      std::ifstream in(report_path);
      if (!in) throw rshom::IoFailure("cannot open report '" + report_path + "'");
      nlohmann::json j;
      in >> j;
      rshom::ExperimentReport rep = j.get<rshom::ExperimentReport>();
      for (const auto& f : rshom::emit_plot_data(rep, plot_out))
        std::cout << f << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
