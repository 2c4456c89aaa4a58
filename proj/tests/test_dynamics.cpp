#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rshom/dynamics.hpp"

using namespace rshom;

namespace {

FieldSpec identity_spec() {
  FieldSpec s;
  s.d = 2;
  s.base = Mat::Identity(2, 2);
  return s;
}

// constant medium with an oblique reflection: gamma = (1, 0.5)
FieldSpec oblique_spec() {
  FieldSpec s;
  s.d = 2;
  s.base = Mat::Zero(2, 2);
  s.base(0, 0) = 1.0;
  s.base(0, 1) = s.base(1, 0) = 0.5;
  s.base(1, 1) = 2.0;
  return s;
}

}  // namespace

TEST_CASE("hand-checked reflected Euler step") {
  // identity medium, x = (0.1, 0); increment (-0.3, 0) pushes the predictor
  // to (-0.2, 0), so dK = 0.2 and the state lands exactly on the boundary.
  CoefficientField f = build_field(identity_spec());
  Vec omega = Vec::Zero(2), x(2), g(2);
  x << 0.1, 0.0;
  double dt = 0.25;  // sqrt(dt) = 0.5 exactly
  g << -0.6, 0.0;
  StepResult s = step_reflected(f, omega, 1.0, dt, x, g);
  CHECK(s.dK == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.x[0] == 0.0);  // exact: push length is -predictor_1 and gamma_1 = 1
  CHECK(s.x[1] == 0.0);

  // interior increment: no push at all
  g << 0.6, -0.8;
  s = step_reflected(f, omega, 1.0, dt, x, g);
  CHECK(s.dK == 0.0);
  CHECK(s.x[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(s.x[1] == doctest::Approx(-0.4).epsilon(1e-15));
}

TEST_CASE("oblique push displaces the tangential coordinate by dK * gamma_2") {
  CoefficientField f = build_field(oblique_spec());
  Vec omega = Vec::Zero(2), x(2), g(2);
  x << 0.05, 1.0;
  double dt = 0.25;
  Mat sigma = symmetric_sqrt(f.spec().base);
  g << -1.0, 0.0;
  Vec inc = 0.5 * (sigma * g);
  StepResult s = step_reflected(f, omega, 1.0, dt, x, g);
  double pred1 = x[0] + inc[0];
  REQUIRE(pred1 < 0.0);
  CHECK(s.dK == doctest::Approx(-pred1).epsilon(1e-14));
  CHECK(s.x[0] == 0.0);
  CHECK(s.x[1] == doctest::Approx(x[1] + inc[1] + s.dK * 0.5).epsilon(1e-13));
}

TEST_CASE("bridge step can push even when the predictor stays inside") {
  CoefficientField f = build_field(identity_spec());
  Vec omega = Vec::Zero(2), x(2), g(2);
  x << 0.01, 0.0;
  g << 0.0, 0.0;  // predictor equals the state
  double dt = 0.25;
  // uniform near 0 forces a deep sampled bridge minimum
  StepResult s = step_reflected_bridge(f, omega, 1.0, dt, x, g, 1e-12);
  CHECK(s.dK > 0.0);
  CHECK(s.x[0] >= 0.0);
  // uniform = 1 reproduces the plain scheme's minimum (no excursion)
  s = step_reflected_bridge(f, omega, 1.0, dt, x, g, 1.0);
  CHECK(s.dK == 0.0);
}

TEST_CASE("paths stay in the half-space with nondecreasing local time") {
  CoefficientField f = build_field(oblique_spec());
  SimConfig cfg;
  cfg.epsilon = 0.5;
  cfg.T = 1.0;
  cfg.step_ratio = 0.1;
  cfg.start = Vec::Zero(2);
  cfg.omega = Vec::Zero(2);
  for (ReflectMode mode : {ReflectMode::plain, ReflectMode::bridge}) {
    cfg.reflect = mode;
    PhiloxStream rng(314, 0);
    ReflectedPath p = simulate_path(cfg, f, rng);
    CHECK(p.times.back() == cfg.T);
    CHECK(p.steps() == 40);  // T / (0.1 * 0.25)
    bool pushed = false;
    for (std::size_t i = 0; i < p.states.size(); ++i) {
      CHECK(p.states[i][0] >= 0.0);
      if (i > 0) {
        CHECK(p.local_time[i] >= p.local_time[i - 1]);
        if (p.local_time[i] > p.local_time[i - 1]) pushed = true;
      }
    }
    CHECK(pushed);  // started on the boundary, so reflection must fire
  }
}

TEST_CASE("simulation is a deterministic function of the seed") {
  CoefficientField f = build_field(oblique_spec());
  SimConfig cfg;
  cfg.epsilon = 0.3;
  cfg.T = 0.5;
  cfg.start = Vec::Zero(2);
  cfg.omega = Vec::Zero(2);
  cfg.reflect = ReflectMode::bridge;
  PhiloxStream a(2718, 9), b(2718, 9), c(2718, 10);
  ReflectedPath pa = simulate_path(cfg, f, a);
  ReflectedPath pb = simulate_path(cfg, f, b);
  ReflectedPath pc = simulate_path(cfg, f, c);
  REQUIRE(pa.states.size() == pb.states.size());
  auto same = [](const Vec& x, const Vec& y) {
    return (x - y).cwiseAbs().maxCoeff() == 0.0;
  };
  bool identical = true, differs = false;
  for (std::size_t i = 0; i < pa.states.size(); ++i) {
    if (!same(pa.states[i], pb.states[i]) ||
        pa.local_time[i] != pb.local_time[i])
      identical = false;
    if (!same(pa.states[i], pc.states[i])) differs = true;
  }
  CHECK(identical);
  CHECK(differs);
}

TEST_CASE("identity medium reduces to the discrete one-sided pushing map") {
  // replay the same stream: the first coordinate must satisfy
  // x1' = max(x1 + sqrt(dt) g1, 0), dK = max(0, -(x1 + sqrt(dt) g1))
  CoefficientField f = build_field(identity_spec());
  SimConfig cfg;
  cfg.epsilon = 1.0;
  cfg.T = 0.4;
  cfg.dt = 0.01;
  cfg.start = Vec::Zero(2);
  cfg.omega = Vec::Zero(2);
  PhiloxStream rng(55, 1);
  ReflectedPath p = simulate_path(cfg, f, rng);

  PhiloxStream replay(55, 1);
  Mat sigma = f.evaluate_at_phase(Vec::Zero(2)).sigma;
  double x1 = 0.0, K = 0.0, t = 0.0;
  const std::size_t N = p.steps();
  Vec g(2);
  for (std::size_t i = 1; i <= N; ++i) {
    double step = (i == N) ? cfg.T - t : cfg.dt;  // mirror the stepper exactly
    g[0] = replay.gaussian();
    g[1] = replay.gaussian();
    Vec inc = std::sqrt(step) * (sigma * g);
    double pred = x1 + inc[0];
    double dK = std::max(0.0, -pred);
    x1 = pred + dK;
    K += dK;
    t = (i == N) ? cfg.T : t + step;
    CHECK(p.states[i][0] == x1);
    CHECK(p.local_time[i] == K);
  }
}

TEST_CASE("simulation configs are validated") {
  CoefficientField f = build_field(identity_spec());
  SimConfig cfg;
  cfg.start = Vec::Zero(2);
  cfg.omega = Vec::Zero(2);
  PhiloxStream rng(1, 1);
  cfg.epsilon = -1.0;
  CHECK_THROWS_AS(simulate_path(cfg, f, rng), ConfigInvalid);
  cfg.epsilon = 1.0;
  cfg.dt = 5.0;  // larger than the horizon
  CHECK_THROWS_AS(simulate_path(cfg, f, rng), ConfigInvalid);
  cfg.dt = 0.0;
  cfg.start = Vec::Zero(3);
  CHECK_THROWS_AS(simulate_path(cfg, f, rng), ConfigInvalid);
  cfg.start = Vec::Zero(2);
  cfg.start[0] = -0.5;
  CHECK_THROWS_AS(simulate_path(cfg, f, rng), ConfigInvalid);
}

TEST_CASE("confining potential is normalized and weighs the boundary") {
  ConfiningPotential pot(1.0, 2);
  CHECK(pot.volume_integral([](const Vec&) { return 1.0; }) ==
        doctest::Approx(1.0).epsilon(1e-5));
  // boundary slice mass is 2A by the choice of the constant
  CHECK(pot.boundary_total_mass() == 2.0);
  CHECK(pot.boundary_integral([](const Vec&) { return 1.0; }) ==
        doctest::Approx(2.0).epsilon(1e-12));
  // first coordinate is Exp(2A) under the volume density
  CHECK(pot.volume_integral([](const Vec& x) { return x[0]; }) ==
        doctest::Approx(0.5).epsilon(1e-5));
  // gradient matches finite differences
  Vec x(2);
  x << 0.4, -0.7;
  Vec g = pot.gradient(x);
  double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    Vec up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    CHECK(g[i] ==
          doctest::Approx((pot.value(up) - pot.value(dn)) / (2.0 * h))
              .epsilon(1e-8));
  }
  CHECK_THROWS_AS(ConfiningPotential(-1.0, 2), ConfigInvalid);
  // steeper slope: same identities
  ConfiningPotential steep(2.5, 2);
  CHECK(steep.volume_integral([](const Vec&) { return 1.0; }) ==
        doctest::Approx(1.0).epsilon(1e-5));
  CHECK(steep.boundary_integral([](const Vec&) { return 1.0; }) ==
        doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("initial sampler matches the stationary marginals") {
  ConfiningPotential pot(1.0, 2);
  PhiloxStream rng(8080, 0);
  const int n = 20000;
  double m1 = 0.0, my = 0.0, my2 = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec x = sample_initial(pot, rng);
    CHECK(x[0] >= 0.0);
    m1 += x[0];
    my += x[1];
    my2 += x[1] * x[1];
  }
  m1 /= n;
  my /= n;
  my2 /= n;
  CHECK(m1 == doctest::Approx(0.5).epsilon(0.02));  // Exp(2A) mean
  CHECK(std::abs(my) < 0.02);                       // symmetric tangential law
  // quadrature oracle for the tangential second moment
  double t2 = pot.volume_integral([](const Vec& x) { return x[1] * x[1]; });
  CHECK(my2 == doctest::Approx(t2).epsilon(0.05));
  CHECK_THROWS_AS(sample_initial(pot, rng, 0), RejectionStall);
}

TEST_CASE("limit process: pushing keeps the first coordinate nonnegative") {
  Mat Abar = Mat::Identity(2, 2);
  Vec Gamma(2), x0 = Vec::Zero(2);
  Gamma << 1.0, 0.8;
  PhiloxStream rng(4242, 0);
  ReflectedPath p = simulate_limit_path(Abar, Gamma, 1.0, 0.01, x0, rng);
  for (const Vec& s : p.states) CHECK(s[0] >= 0.0);
  for (std::size_t i = 1; i < p.local_time.size(); ++i)
    CHECK(p.local_time[i] >= p.local_time[i - 1]);
  // started far inside, the boundary is never reached on [0, 1]
  Vec far(2);
  far << 100.0, 0.0;
  PhiloxStream rng2(4242, 1);
  ReflectedPath q = simulate_limit_path(Abar, Gamma, 1.0, 0.01, far, rng2);
  CHECK(q.local_time.back() == 0.0);
}

TEST_CASE("limit process: oblique reflection correlates drift and local time") {
  // X2 = W2 + 0.8 K with W2 independent of K, so Cov(X2, K) = 0.8 Var(K) > 0
  Mat Abar = Mat::Identity(2, 2);
  Vec Gamma(2), x0 = Vec::Zero(2);
  Gamma << 1.0, 0.8;
  SeedPlan plan{90210};
  const int n = 4000;
  double sx = 0.0, sk = 0.0, sxk = 0.0;
  for (int i = 0; i < n; ++i) {
    PhiloxStream rng = plan.stream(i);
    ReflectedPath p = simulate_limit_path(Abar, Gamma, 1.0, 0.005, x0, rng);
    double x2 = p.states.back()[1], k = p.local_time.back();
    sx += x2;
    sk += k;
    sxk += x2 * k;
  }
  double cov = sxk / n - (sx / n) * (sk / n);
  // oracle: 0.8 * Var(K_1) = 0.8 * (1 - 2/pi) ~ 0.29
  CHECK(cov > 0.15);
  CHECK(cov < 0.45);
  // mean local time of reflected Brownian motion: E[K_1] = sqrt(2/pi)
  CHECK(sk / n == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.08));
}

TEST_CASE("limit process rejects degenerate coefficients") {
  Vec x0 = Vec::Zero(2), Gamma(2);
  Gamma << 1.0, 0.0;
  PhiloxStream rng(1, 0);
  Mat bad = Mat::Identity(2, 2);
  bad(1, 1) = -1.0;
  CHECK_THROWS_AS(simulate_limit_path(bad, Gamma, 1.0, 0.1, x0, rng),
                  BadEffective);
  Vec gbad(2);
  gbad << -1.0, 0.0;
  CHECK_THROWS_AS(simulate_limit_path(Mat::Identity(2, 2), gbad, 1.0, 0.1, x0, rng),
                  BadEffective);
  Vec xbad(2);
  xbad << -1.0, 0.0;
  CHECK_THROWS_AS(simulate_limit_path(Mat::Identity(2, 2), Gamma, 1.0, 0.1, xbad, rng),
                  ConfigInvalid);
}

TEST_CASE("occupation estimator on hand-built paths") {
  ReflectedPath p;
  p.times = {0.0, 0.5, 1.0};
  Vec a(2), b(2), c(2);
  a << 1.0, 0.0;
  b << 1.5, 0.0;
  c << 0.8, 0.0;
  p.states = {a, b, c};
  p.local_time = {0.0, 0.0, 0.0};
  // every left endpoint lies in the strip [0, 2]: estimate = T / delta
  CHECK(occupation_local_time(p, 2.0) == doctest::Approx(0.5).epsilon(1e-15));
  // strip [0, 0.1] misses the whole path
  CHECK(occupation_local_time(p, 0.1) == 0.0);
  // boundary states can be down-weighted
  ReflectedPath q = p;
  q.states[0][0] = 0.0;
  CHECK(occupation_local_time(q, 2.0, 0.5) ==
        doctest::Approx((0.25 + 0.5) / 2.0).epsilon(1e-15));
  CHECK_THROWS_AS(occupation_local_time(p, 0.0), ConfigInvalid);
}
