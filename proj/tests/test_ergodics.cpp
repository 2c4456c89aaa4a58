#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rshom/ergodics.hpp"

using namespace rshom;

namespace {

FieldSpec identity_spec() {
  FieldSpec s;
  s.d = 2;
  s.base = Mat::Identity(2, 2);
  return s;
}

FieldSpec layered_spec() {
  FieldSpec s;
  s.d = 2;
  s.base = Mat::Zero(2, 2);
  s.base(0, 0) = 1.0;
  s.base(1, 1) = 2.0;
  FieldMode m;
  m.k = Eigen::Vector2i(0, 1);
  m.amplitude = Mat::Zero(2, 2);
  m.amplitude(1, 1) = 1.0;
  s.modes.push_back(m);
  return s;
}

Ensemble small_ensemble(const CoefficientField& field, long n, double eps,
                        double T) {
  EnsembleConfig ec;
  ec.epsilon = eps;
  ec.T = T;
  ec.step_ratio = 0.1;
  ec.start = Vec::Zero(2);
  ec.omega = Vec::Zero(2);
  ec.annealed_omega = true;
  ec.N = n;
  ec.seed = 12345;
  return simulate_ensemble(field, ec);
}

}  // namespace

TEST_CASE("summary statistics and scores") {
  SummaryStat s = summarize({1.0, 2.0, 3.0});
  CHECK(s.mean == 2.0);
  CHECK(s.n == 3);
  CHECK(s.stderr_ == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-14));
  CHECK(z_score(s, 2.0) == 0.0);
  CHECK(z_score(s, 1.0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK_THROWS_AS(summarize({1.0, std::nan("")}), NonFinite);
  // degenerate sample: exact match is z = 0, any deviation is infinite
  SummaryStat c = summarize({5.0, 5.0, 5.0});
  CHECK(z_score(c, 5.0) == 0.0);
  CHECK(std::isinf(z_score(c, 4.0)));
}

TEST_CASE("distribution functions against frozen values") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-13));
  CHECK(normal_cdf(-1.96) == doctest::Approx(0.024997895148220435).epsilon(1e-10));
  // folded law: P(|N(0, s^2)| <= s) = 2 Phi(1) - 1
  CHECK(folded_normal_cdf(2.0, 2.0) ==
        doctest::Approx(0.6826894921370859).epsilon(1e-13));
  CHECK(folded_normal_cdf(-0.1, 1.0) == 0.0);
  CHECK(folded_normal_cdf(0.0, 1.0) == 0.0);
}

TEST_CASE("KS statistic on a hand-checked sample") {
  auto unif = [](double x) { return std::min(1.0, std::max(0.0, x)); };
  KsResult r = ks_test({0.5}, unif);
  CHECK(r.statistic == 0.5);
  CHECK(r.n == 1);
  // evenly spread sample has the minimal possible statistic 1/(2n)
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back((i + 0.5) / 10.0);
  r = ks_test(grid, unif);
  CHECK(r.statistic == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(r.p_value > 0.99);
  CHECK_THROWS_AS(ks_test({}, unif), ConfigInvalid);
}

TEST_CASE("KS test accepts its own null and rejects a wrong law") {
  PhiloxStream rng(777, 0);
  std::vector<double> sample(2000);
  for (double& v : sample) v = rng.uniform();
  auto unif = [](double x) { return std::min(1.0, std::max(0.0, x)); };
  CHECK(ks_test(sample, unif).p_value > 0.01);
  auto wrong = [](double x) {
    double c = std::min(1.0, std::max(0.0, x));
    return c * c;  // a genuinely different law
  };
  CHECK(ks_test(sample, wrong).p_value < 1e-6);
}

TEST_CASE("two-sample z statistic") {
  SummaryStat a, b;
  a.mean = 1.0;
  a.stderr_ = 0.3;
  b.mean = 0.0;
  b.stderr_ = 0.4;
  CHECK(detail::two_sample_z(a, b) == doctest::Approx(2.0).epsilon(1e-14));
  b.mean = 1.0;
  b.stderr_ = 0.0;
  a.stderr_ = 0.0;
  CHECK(detail::two_sample_z(a, b) == 0.0);
}

TEST_CASE("parallel loop fills every slot deterministically") {
  const long n = 1000;
  std::vector<long> out(n, -1);
  detail::parallel_for(n, [&](long i) { out[i] = i * i; });
  for (long i = 0; i < n; ++i) CHECK(out[i] == i * i);
  // exceptions propagate to the caller
  CHECK_THROWS_AS(detail::parallel_for(
                      8, [](long i) { if (i == 3) throw ConfigInvalid("boom"); }),
                  ConfigInvalid);
}

TEST_CASE("make_stat records targets and per-path discrepancy") {
  EnsembleStat e = make_stat("demo", "anchor-id", {1.0, 3.0}, 2.0, 0.5, 0.01);
  CHECK(e.estimate == 2.0);
  CHECK(e.z == 0.0);
  CHECK(e.discrepancy == 1.0);
  CHECK(e.n == 2);
  CHECK(e.epsilon == 0.5);
  CHECK(e.anchor == "anchor-id");
}

TEST_CASE("annealed ensembles draw one phase per path") {
  CoefficientField f = build_field(layered_spec());
  Ensemble ens = small_ensemble(f, 16, 0.5, 0.2);
  REQUIRE(ens.omegas.size() == 16);
  for (const Vec& w : ens.omegas) {
    CHECK(w[0] >= 0.0);
    CHECK(w[0] < 1.0);
  }
  CHECK((ens.omegas[0] - ens.omegas[1]).cwiseAbs().maxCoeff() > 0.0);
  // reproducible end to end
  Ensemble again = small_ensemble(f, 16, 0.5, 0.2);
  for (int p = 0; p < 16; ++p) {
    CHECK((ens.omegas[p] - again.omegas[p]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ens.paths[p].states.back() - again.paths[p].states.back())
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("volume average is exact for constant observables") {
  CoefficientField f = build_field(identity_spec());
  Ensemble ens = small_ensemble(f, 8, 1.0, 0.5);
  EnsembleStat s = verify_volume_average(
      ens, [](const Vec&) { return 2.5; }, f, 1.0, 16);
  CHECK(std::abs(s.estimate) < 1e-13);
  CHECK(s.discrepancy < 1e-13);
  CHECK(s.anchor == "interior-time-average");
}

TEST_CASE("boundary average is exact for the unit observable") {
  CoefficientField f = build_field(layered_spec());
  Ensemble ens = small_ensemble(f, 8, 0.5, 0.5);
  EnsembleStat s = verify_boundary_average(
      ens, [](const Vec&) { return 1.0; }, f, 0.5, 16);
  // integral of dK equals K_T identically, slice mean of 1 is 1
  CHECK(s.discrepancy == 0.0);
  CHECK(s.anchor == "boundary-time-average");
  // sanity: at least one path touched the boundary from a boundary start
  bool touched = false;
  for (const auto& p : ens.paths)
    if (p.local_time.back() > 0.0) touched = true;
  CHECK(touched);
}

TEST_CASE("invariant-measure verifier: shapes and config guards") {
  CoefficientField f = build_field(identity_spec());
  ConfiningPotential pot(1.0, 2);
  std::vector<IpmObservable> vol{
      {"one", [](const Vec&, const Vec&) { return 1.0; }, 1.0},
      {"x1", [](const Vec& x, const Vec&) { return x[0]; }, 0.5}};
  std::vector<IpmObservable> bnd{
      {"one", [](const Vec&, const Vec&) { return 1.0; }, 2.0}};
  IpmConfig cfg;
  cfg.epsilon = 0.5;
  cfg.t_list = {0.1, 0.2};
  cfg.N = 64;
  cfg.seed = 99;
  IpmReport rep = verify_invariant_measure(f, pot, vol, bnd, cfg);
  REQUIRE(rep.volume.size() == 4);    // 2 observables x 2 times
  REQUIRE(rep.boundary.size() == 2);  // 1 observable x 2 times
  // the constant observable is exact at every time
  CHECK(rep.volume[0].estimate == 1.0);
  CHECK(rep.volume[0].z == 0.0);
  CHECK(rep.volume[1].t == 0.2);
  CHECK(rep.boundary[1].target == doctest::Approx(0.4).epsilon(1e-14));

  IpmConfig bad = cfg;
  bad.t_list = {0.2, 0.1};
  CHECK_THROWS_AS(verify_invariant_measure(f, pot, vol, bnd, bad), ConfigInvalid);
  bad.t_list = {};
  CHECK_THROWS_AS(verify_invariant_measure(f, pot, vol, bnd, bad), ConfigInvalid);
}

TEST_CASE("scale ensembles and the endpoint comparison run end to end") {
  CoefficientField f = build_field(identity_spec());
  CltConfig cc;
  cc.T = 0.25;
  cc.step_ratio = 0.1;
  cc.N = 400;
  cc.seed = 424242;
  EpsEnsemble e1 = draw_eps_ensemble(f, 0.5, cc);
  CHECK(e1.dt == doctest::Approx(0.025).epsilon(1e-14));
  REQUIRE(e1.X_T.size() == 400);
  for (const Vec& x : e1.X_T) CHECK(x[0] >= 0.0);

  CltReport rep = clt_compare({e1}, Mat::Identity(2, 2),
                              (Vec(2) << 1.0, 0.0).finished(), 400, 0.005, 7);
  REQUIRE(rep.rows.size() == 1);
  const CltRow& r = rep.rows.front();
  CHECK(r.epsilon == 0.5);
  CHECK(r.ks_p > 0.0);
  CHECK(std::isfinite(r.K_z));
  CHECK(r.var2_target == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(r.covariance.rows() == 2);
  // identity medium at any scale is the limit process itself up to
  // discretization, so the moment comparison cannot be wildly off
  CHECK(std::abs(r.mean_z[1]) < 5.0);
  CHECK_THROWS_AS(clt_compare({}, Mat::Identity(2, 2),
                              (Vec(2) << 1.0, 0.0).finished(), 10, 0.01, 7),
                  ConfigInvalid);
}
