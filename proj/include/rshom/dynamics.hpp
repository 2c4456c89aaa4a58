#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rshom/effective.hpp"
#include "rshom/rng.hpp"

namespace rshom {

// Euler time-stepping on the half-space D = {x1 > 0}. Reflection is an
// oblique push along gamma; the push length is -predictor_1, which restores
// the boundary exactly because gamma_1 = a11 = 1.

enum class ReflectMode {
  plain,   // push only when the predictor left the half-space
  bridge,  // Brownian-bridge boundary crossing for the first coordinate
};

struct SimConfig {
  double epsilon = 1.0;
  double T = 1.0;
  double dt = 0.0;          // 0 -> derived as step_ratio * epsilon^2
  double step_ratio = 0.1;  // c in dt = c * epsilon^2
  Vec start;
  Vec omega;  // environment phase
  ReflectMode reflect = ReflectMode::plain;

  double resolved_dt() const {
    return dt > 0.0 ? dt : step_ratio * epsilon * epsilon;
  }

  void validate(int d) const {
    if (epsilon <= 0.0) throw ConfigInvalid("epsilon must be positive");
    double h = resolved_dt();
    if (!(h > 0.0) || h > T) throw ConfigInvalid("need 0 < dt <= T");
    if (start.size() != d || omega.size() != d)
      throw ConfigInvalid("start/omega dimension mismatch");
    if (start[0] < 0.0) throw ConfigInvalid("start must lie in the half-space");
  }
};

struct ReflectedPath {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<double> local_time;  // cumulative, K0 = 0

  std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
};

struct StepResult {
  Vec x;
  double dK = 0.0;
};

/// One Euler step with oblique projection; gaussian ~ N(0, I) from the caller.
inline StepResult step_reflected(const CoefficientField& field, const Vec& omega,
                                 double epsilon, double dt, const Vec& x,
                                 const Vec& gaussian,
                                 const Vec* extra_drift = nullptr) {
  Coefficients c = field.evaluate(omega, x / epsilon);
  Vec xhat = x + (dt / epsilon) * c.b + std::sqrt(dt) * (c.sigma * gaussian);
  if (extra_drift) xhat += dt * (*extra_drift);
  if (!xhat.allFinite())
    throw NonFinite("predictor overflow; dt too large for this epsilon");
  if (xhat[0] >= 0.0) return {std::move(xhat), 0.0};
  double dK = -xhat[0];
  Vec p = xhat;
  p[0] = 0.0;
  Vec gamma = field.evaluate(omega, p / epsilon).gamma;
  StepResult out{xhat + dK * gamma, dK};
  return out;
}

/// Bridge variant: the first coordinate's running minimum over the step is
/// sampled from the Brownian bridge law (variance a11 = 1 per unit time) and
/// the push covers any sub-step excursion below the boundary.
inline StepResult step_reflected_bridge(const CoefficientField& field,
                                        const Vec& omega, double epsilon,
                                        double dt, const Vec& x,
                                        const Vec& gaussian, double uniform,
                                        const Vec* extra_drift = nullptr) {
  Coefficients c = field.evaluate(omega, x / epsilon);
  Vec xhat = x + (dt / epsilon) * c.b + std::sqrt(dt) * (c.sigma * gaussian);
  if (extra_drift) xhat += dt * (*extra_drift);
  if (!xhat.allFinite())
    throw NonFinite("predictor overflow; dt too large for this epsilon");
  double lo = x[0], hi = xhat[0];
  double disc = (hi - lo) * (hi - lo) - 2.0 * dt * std::log(uniform);
  double m = 0.5 * (lo + hi - std::sqrt(disc));
  double dK = std::max(0.0, -m);
  if (dK == 0.0) return {std::move(xhat), 0.0};
  Vec p = xhat;
  p[0] = 0.0;
  Vec gamma = field.evaluate(omega, p / epsilon).gamma;
  StepResult out{xhat + dK * gamma, dK};
  if (out.x[0] < 0.0) out.x[0] = 0.0;
  return out;
}

// Confining potential V(x) = A*x1 + A*sqrt(1 + |y|^2) + c with the constant c
// fixed so that e^{-2V} integrates to 1 over the half-space. The boundary
// slice then has total mass exactly 2A.
class ConfiningPotential {
 public:
  ConfiningPotential(double A, int d) : A_(A), d_(d) {
    if (A <= 0.0) throw ConfigInvalid("potential slope A must be positive");
    if (d < 1) throw ConfigInvalid("dimension must be >= 1");
    double Z = tangential_integral([&](const Vec& x) {
                 double y2 = 0.0;
                 for (int i = 1; i < d_; ++i) y2 += x[i] * x[i];
                 return std::exp(-2.0 * A_ * std::sqrt(1.0 + y2));
               }) /
               (2.0 * A_);
    c_ = 0.5 * std::log(Z);
  }

  double slope() const { return A_; }
  int dim() const { return d_; }
  double constant() const { return c_; }

  double value(const Vec& x) const {
    double y2 = 0.0;
    for (int i = 1; i < d_; ++i) y2 += x[i] * x[i];
    return A_ * x[0] + A_ * std::sqrt(1.0 + y2) + c_;
  }

  Vec gradient(const Vec& x) const {
    Vec g(d_);
    g[0] = A_;
    double y2 = 0.0;
    for (int i = 1; i < d_; ++i) y2 += x[i] * x[i];
    double r = std::sqrt(1.0 + y2);
    for (int i = 1; i < d_; ++i) g[i] = A_ * x[i] / r;
    return g;
  }

  double density(const Vec& x) const { return std::exp(-2.0 * value(x)); }

  /// Total mass of e^{-2V} restricted to the boundary slice {x1 = 0}.
  double boundary_total_mass() const { return 2.0 * A_; }

  /// Boundary functional: integral of f(0, y) e^{-2V(0,y)} dy.
  double boundary_integral(const std::function<double(const Vec&)>& f) const {
    double norm = std::exp(-2.0 * c_);
    return norm * tangential_integral([&](const Vec& x) {
             double y2 = 0.0;
             for (int i = 1; i < d_; ++i) y2 += x[i] * x[i];
             return f(x) * std::exp(-2.0 * A_ * std::sqrt(1.0 + y2));
           });
  }

  /// Volume functional: integral of f(x) e^{-2V(x)} dx over the half-space
  /// (equals the expectation under the normalized density).
  double volume_integral(const std::function<double(const Vec&)>& f) const {
    double L = 20.0 / A_;
    int n = 512;
    double h = L / n;
    double norm = std::exp(-2.0 * c_);
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
      double x1 = i * h;
      double w = simpson_weight(i, n) * h;
      double inner = tangential_integral([&](const Vec& x) {
        Vec xx = x;
        xx[0] = x1;
        double y2 = 0.0;
        for (int k = 1; k < d_; ++k) y2 += xx[k] * xx[k];
        return f(xx) * std::exp(-2.0 * A_ * std::sqrt(1.0 + y2));
      });
      sum += w * inner * std::exp(-2.0 * A_ * x1);
    }
    return norm * sum;
  }

 private:
  static double simpson_weight(int i, int n) {
    if (i == 0 || i == n) return 1.0 / 3.0;
    return (i % 2 == 1 ? 4.0 : 2.0) / 3.0;
  }

  // Integral over the tangential block y in R^{d-1} of g(0, y) dy, without
  // the Gaussian-free weight (callers supply the integrand including any
  // density factor except the outer e^{-2c}).
  double tangential_integral(const std::function<double(const Vec&)>& g) const {
    if (d_ == 1) {
      Vec x = Vec::Zero(1);
      return g(x);
    }
    double L = 1.0 + 20.0 / A_;
    int n = d_ <= 2 ? 1024 : 128;
    double h = 2.0 * L / n;
    std::vector<int> idx(d_ - 1, 0);
    Vec x = Vec::Zero(d_);
    double sum = 0.0;
    long total = 1;
    for (int i = 1; i < d_; ++i) total *= (n + 1);
    for (long t = 0; t < total; ++t) {
      long r = t;
      double w = 1.0;
      for (int i = 1; i < d_; ++i) {
        int m = static_cast<int>(r % (n + 1));
        r /= (n + 1);
        x[i] = -L + m * h;
        w *= simpson_weight(m, n) * h;
      }
      sum += w * g(x);
    }
    if (!std::isfinite(sum)) throw QuadratureFail("tangential quadrature blew up");
    return sum;
  }

  double A_;
  int d_;
  double c_ = 0.0;
};

namespace detail {

inline ReflectedPath simulate_impl(const SimConfig& cfg,
                                   const CoefficientField& field,
                                   const ConfiningPotential* pot,
                                   PhiloxStream& rng) {
  cfg.validate(field.dim());
  const int d = field.dim();
  const double h = cfg.resolved_dt();
  const long N = static_cast<long>(std::ceil(cfg.T / h - 1e-12));
  ReflectedPath path;
  path.times.reserve(N + 1);
  path.states.reserve(N + 1);
  path.local_time.reserve(N + 1);
  path.times.push_back(0.0);
  path.states.push_back(cfg.start);
  path.local_time.push_back(0.0);
  Vec x = cfg.start, g(d);
  double K = 0.0, t = 0.0;
  for (long i = 0; i < N; ++i) {
    double step = (i == N - 1) ? cfg.T - t : h;
    for (int k = 0; k < d; ++k) g[k] = rng.gaussian();
    Vec drift;
    const Vec* dp = nullptr;
    if (pot) {
      drift = -(field.evaluate(cfg.omega, x / cfg.epsilon).a * pot->gradient(x));
      dp = &drift;
    }
    StepResult s =
        cfg.reflect == ReflectMode::bridge
            ? step_reflected_bridge(field, cfg.omega, cfg.epsilon, step, x, g,
                                    rng.uniform(), dp)
            : step_reflected(field, cfg.omega, cfg.epsilon, step, x, g, dp);
    x = std::move(s.x);
    K += s.dK;
    t = (i == N - 1) ? cfg.T : t + step;
    path.times.push_back(t);
    path.states.push_back(x);
    path.local_time.push_back(K);
  }
  return path;
}

}  // namespace detail

/// Path of the scaled reflected diffusion; a deterministic function of
/// (cfg, field, stream).
inline ReflectedPath simulate_path(const SimConfig& cfg,
                                   const CoefficientField& field,
                                   PhiloxStream& rng) {
  return detail::simulate_impl(cfg, field, nullptr, rng);
}

/// Same scheme with the confining drift -a(.)dV(x) per step; the resulting
/// process has invariant density e^{-2V} dx.
inline ReflectedPath simulate_drifted_path(const SimConfig& cfg,
                                           const CoefficientField& field,
                                           const ConfiningPotential& pot,
                                           PhiloxStream& rng) {
  if (pot.dim() != field.dim())
    throw ConfigInvalid("potential/field dimension mismatch");
  return detail::simulate_impl(cfg, field, &pot, rng);
}

/// Draws from the density e^{-2V(x)} dx: exponential first coordinate and a
/// Laplace-proposal rejection sampler for the tangential block.
inline Vec sample_initial(const ConfiningPotential& pot, PhiloxStream& rng,
                          int max_tries = 100000) {
  const int d = pot.dim();
  const double A = pot.slope();
  Vec x = Vec::Zero(d);
  x[0] = -std::log(rng.uniform()) / (2.0 * A);
  if (d == 1) return x;
  const double rt = std::sqrt(static_cast<double>(d - 1));
  const double scale = rt / (2.0 * A);
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    double l1 = 0.0, y2 = 0.0;
    for (int i = 1; i < d; ++i) {
      double u = rng.uniform();
      double y = u < 0.5 ? scale * std::log(2.0 * u)
                         : -scale * std::log(2.0 * (1.0 - u));
      x[i] = y;
      l1 += std::abs(y);
      y2 += y * y;
    }
    double log_acc = -2.0 * A * (std::sqrt(1.0 + y2) - l1 / rt);
    if (std::log(rng.uniform()) < log_acc) return x;
  }
  throw RejectionStall("tangential rejection sampler exceeded max_tries");
}

/// Constant-coefficient limit process: Gaussian walk with covariance Abar,
/// Skorokhod pushing of the first coordinate, oblique displacement Gamma.
inline ReflectedPath simulate_limit_path(const Mat& Abar, const Vec& Gamma,
                                         double T, double dt, const Vec& x0,
                                         PhiloxStream& rng) {
  const int d = static_cast<int>(Abar.rows());
  if (Gamma.size() != d || x0.size() != d)
    throw ConfigInvalid("limit path dimension mismatch");
  if (min_eigenvalue(Abar) <= 0.0)
    throw BadEffective("effective matrix not positive definite");
  if (Gamma[0] <= 0.0)
    throw BadEffective("effective reflection has nonpositive normal component");
  if (x0[0] < 0.0) throw ConfigInvalid("start must lie in the half-space");
  Mat root = symmetric_sqrt(Abar);
  const long N = static_cast<long>(std::ceil(T / dt - 1e-12));
  ReflectedPath path;
  path.times.reserve(N + 1);
  path.states.reserve(N + 1);
  path.local_time.reserve(N + 1);
  Vec w = x0, g(d);
  double run_min = 0.0;  // running min of the free first coordinate vs 0
  double t = 0.0;
  path.times.push_back(0.0);
  path.states.push_back(x0);
  path.local_time.push_back(0.0);
  for (long i = 0; i < N; ++i) {
    double step = (i == N - 1) ? T - t : dt;
    for (int k = 0; k < d; ++k) g[k] = rng.gaussian();
    w += std::sqrt(step) * (root * g);
    run_min = std::min(run_min, w[0]);
    double K = std::max(0.0, -run_min) / Abar(0, 0);
    Vec x = w + K * Gamma;
    t = (i == N - 1) ? T : t + step;
    path.times.push_back(t);
    path.states.push_back(std::move(x));
    path.local_time.push_back(K);
  }
  return path;
}

inline ReflectedPath simulate_limit_path(const EffectiveCoefficients& eff,
                                         double T, double dt, const Vec& x0,
                                         PhiloxStream& rng) {
  return simulate_limit_path(eff.Abar, eff.Gamma, T, dt, x0, rng);
}

/// Occupation-density estimate of the local time: (1/delta) * sum of step
/// durations whose state lies in the boundary strip [0, delta]. States
/// exactly on the boundary can be down-weighted (endpoint quadrature of the
/// indicator) via boundary_weight; the default matches the plain estimator.
inline double occupation_local_time(const ReflectedPath& path, double delta,
                                    double boundary_weight = 1.0) {
  if (delta <= 0.0) throw ConfigInvalid("strip width must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
    double h = path.times[i + 1] - path.times[i];
    double x1 = path.states[i][0];
    if (x1 < 0.0 || x1 > delta) continue;
    sum += h * (x1 == 0.0 ? boundary_weight : 1.0);
  }
  return sum / delta;
}

}  // namespace rshom
