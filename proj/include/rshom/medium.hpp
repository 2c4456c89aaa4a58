#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rshom/linalg.hpp"

namespace rshom {

// Stationary coefficient fields realized as trigonometric polynomials on the
// torus: a(u) = base + sum_m amp_m * cos(2*pi*(k_m . u + phase_m)).
// Periodic fields translate the phase by x itself; quasi-periodic fields by
// F*x for an incommensurate frequency matrix F.

struct FieldMode {
  Eigen::VectorXi k;
  Mat amplitude;
  double phase = 0.0;
};

struct FieldSpec {
  enum class Family { periodic, quasi_periodic };

  int d = 0;
  Mat base;
  std::vector<FieldMode> modes;
  Family family = Family::periodic;
  Mat frequency;  // used when quasi-periodic
  double ellipticity_floor = 0.0;

  void validate() const {
    if (d < 1) throw BadSpec("dimension must be >= 1");
    if (base.rows() != d || base.cols() != d) throw BadSpec("base matrix shape");
    if ((base - base.transpose()).cwiseAbs().maxCoeff() > 1e-14)
      throw BadSpec("base matrix not symmetric");
    if (std::abs(base(0, 0) - 1.0) > 1e-14)
      throw BadSpec("base(0,0) must equal 1 (normalization a11 = 1)");
    for (const auto& m : modes) {
      if (m.k.size() != d) throw BadSpec("mode wavevector dimension");
      if (m.amplitude.rows() != d || m.amplitude.cols() != d)
        throw BadSpec("mode amplitude shape");
      if ((m.amplitude - m.amplitude.transpose()).cwiseAbs().maxCoeff() > 1e-14)
        throw BadSpec("mode amplitude not symmetric");
      if (std::abs(m.amplitude(0, 0)) > 1e-14)
        throw BadSpec("mode amplitude (0,0) entry must vanish (a11 = 1)");
      if (m.k.isZero()) throw BadSpec("mode wavevector must be nonzero");
    }
    if (family == Family::quasi_periodic &&
        (frequency.rows() != d || frequency.cols() != d))
      throw BadSpec("quasi-periodic family requires a d x d frequency matrix");
  }

  /// Translation matrix P in tau_x(omega) = omega + P*x (mod 1).
  Mat translation() const {
    return family == Family::periodic ? Mat(Mat::Identity(d, d)) : frequency;
  }
};

struct EnvironmentPhase {
  Vec omega;

  static Vec reduce(Vec u) {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      u[i] -= std::floor(u[i]);
      if (u[i] >= 1.0) u[i] = 0.0;  // guard against -1e-17 -> 1.0
    }
    return u;
  }
};

struct Coefficients {
  Mat a;
  Mat sigma;
  Vec b;
  Vec gamma;
};

class CoefficientField {
 public:
  CoefficientField(FieldSpec spec, double lambda, int cert_grid)
      : spec_(std::move(spec)),
        lambda_(lambda),
        cert_grid_(cert_grid),
        P_(spec_.translation()),
        constant_(spec_.modes.empty()) {
    if (constant_) sigma0_ = symmetric_sqrt(spec_.base);
  }

  const FieldSpec& spec() const { return spec_; }
  int dim() const { return spec_.d; }
  double ellipticity() const { return lambda_; }
  int cert_grid() const { return cert_grid_; }
  bool constant() const { return constant_; }
  const Mat& translation() const { return P_; }

  Vec translate(const Vec& omega, const Vec& x) const {
    return EnvironmentPhase::reduce(omega + P_ * x);
  }

  Mat a_at(const Vec& phase) const {
    Mat a = spec_.base;
    for (const auto& m : spec_.modes)
      a += m.amplitude *
           std::cos(2.0 * M_PI * (m.k.cast<double>().dot(phase) + m.phase));
    return a;
  }

  /// b_j = (1/2) sum_i D_i a_ij with exact analytic derivatives.
  Vec b_at(const Vec& phase) const {
    Vec b = Vec::Zero(spec_.d);
    for (const auto& m : spec_.modes) {
      double s =
          std::sin(2.0 * M_PI * (m.k.cast<double>().dot(phase) + m.phase));
      // D_i along direction i carries the factor 2*pi*(P^T k)_i.
      Vec pk = P_.transpose() * m.k.cast<double>();
      b += (-M_PI * s) * (m.amplitude * pk);
    }
    return b;
  }

  Coefficients evaluate(const Vec& omega, const Vec& x) const {
    Vec phase = translate(omega, x);
    return evaluate_at_phase(phase);
  }

  Coefficients evaluate_at_phase(const Vec& phase) const {
    Coefficients c;
    c.a = a_at(phase);
    c.sigma = constant_ ? sigma0_ : symmetric_sqrt(c.a);
    c.b = b_at(phase);
    c.gamma = c.a.col(0);
    return c;
  }

 private:
  FieldSpec spec_;
  double lambda_;
  int cert_grid_;
  Mat P_;
  bool constant_;
  Mat sigma0_;  // cached root for constant media
};

/// Ellipticity certificate by eigenvalue scan over cert_grid^d phase points,
/// shrunk by a 0.95 safety factor. Lambda certifies Lambda*I <= a <= (1/Lambda)*I.
inline CoefficientField build_field(const FieldSpec& spec, int cert_grid = 32,
                                    double safety = 0.95) {
  spec.validate();
  CoefficientField probe(spec, 0.0, cert_grid);
  const int d = spec.d;
  double min_eig = std::numeric_limits<double>::infinity();
  double max_eig = 0.0;
  std::vector<int> idx(d, 0);
  Vec u(d);
  long total = 1;
  for (int i = 0; i < d; ++i) total *= cert_grid;
  for (long t = 0; t < total; ++t) {
    long r = t;
    for (int i = 0; i < d; ++i) {
      u[i] = static_cast<double>(r % cert_grid) / cert_grid;
      r /= cert_grid;
    }
    Mat a = probe.a_at(u);
    min_eig = std::min(min_eig, min_eigenvalue(a));
    max_eig = std::max(max_eig, max_eigenvalue(a));
  }
  if (min_eig <= spec.ellipticity_floor)
    throw NonElliptic("scanned minimum eigenvalue " + std::to_string(min_eig) +
                      " below floor");
  double lambda = std::min(min_eig, 1.0 / max_eig) * safety;
  return CoefficientField(spec, lambda, cert_grid);
}

/// Quadrature approximation of the medium expectation M[f]; exact for
/// trigonometric polynomials of degree < grid_n.
inline double torus_mean(const std::function<double(const Vec&)>& f, int d,
                         int grid_n) {
  long total = 1;
  for (int i = 0; i < d; ++i) total *= grid_n;
  Vec u(d);
  double sum = 0.0;
  for (long t = 0; t < total; ++t) {
    long r = t;
    for (int i = 0; i < d; ++i) {
      u[i] = static_cast<double>(r % grid_n) / grid_n;
      r /= grid_n;
    }
    sum += f(u);
  }
  return sum / static_cast<double>(total);
}

/// Conditional expectation M_1[f] at fixed first coordinate: average of f over
/// the tangential slice {omega1} x T^{d-1}.
inline double tangential_mean(const std::function<double(const Vec&)>& f, int d,
                              double omega1, int grid_n) {
  if (d == 1) {
    Vec u(1);
    u[0] = omega1;
    return f(u);
  }
  long total = 1;
  for (int i = 1; i < d; ++i) total *= grid_n;
  Vec u(d);
  u[0] = omega1;
  double sum = 0.0;
  for (long t = 0; t < total; ++t) {
    long r = t;
    for (int i = 1; i < d; ++i) {
      u[i] = static_cast<double>(r % grid_n) / grid_n;
      r /= grid_n;
    }
    sum += f(u);
  }
  return sum / static_cast<double>(total);
}

// ---- serialization (documented schema "rshom-field/1") ----

inline void to_json(nlohmann::json& j, const FieldSpec& s) {
  auto mat = [](const Mat& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(row);
    }
    return rows;
  };
  j = nlohmann::json{
      {"schema", "rshom-field/1"},
      {"dimension", s.d},
      {"family",
       s.family == FieldSpec::Family::periodic ? "periodic" : "quasi-periodic"},
      {"base", mat(s.base)},
      {"ellipticity_floor", s.ellipticity_floor}};
  if (s.family == FieldSpec::Family::quasi_periodic)
    j["frequency"] = mat(s.frequency);
  j["modes"] = nlohmann::json::array();
  for (const auto& m : s.modes) {
    std::vector<int> k(m.k.data(), m.k.data() + m.k.size());
    j["modes"].push_back(
        {{"k", k}, {"amplitude", mat(m.amplitude)}, {"phase", m.phase}});
  }
}

inline void from_json(const nlohmann::json& j, FieldSpec& s) {
  auto mat = [](const nlohmann::json& rows) {
    int nr = static_cast<int>(rows.size());
    int nc = nr > 0 ? static_cast<int>(rows[0].size()) : 0;
    Mat m(nr, nc);
    for (int r = 0; r < nr; ++r)
      for (int c = 0; c < nc; ++c) m(r, c) = rows[r][c].get<double>();
    return m;
  };
  s.d = j.at("dimension").get<int>();
  s.base = mat(j.at("base"));
  std::string fam = j.value("family", "periodic");
  s.family = fam == "quasi-periodic" ? FieldSpec::Family::quasi_periodic
                                     : FieldSpec::Family::periodic;
  if (j.contains("frequency")) s.frequency = mat(j.at("frequency"));
  s.ellipticity_floor = j.value("ellipticity_floor", 0.0);
  s.modes.clear();
  for (const auto& jm : j.value("modes", nlohmann::json::array())) {
    FieldMode m;
    auto kv = jm.at("k").get<std::vector<int>>();
    m.k = Eigen::Map<Eigen::VectorXi>(kv.data(), kv.size());
    m.amplitude = mat(jm.at("amplitude"));
    m.phase = jm.value("phase", 0.0);
    s.modes.push_back(m);
  }
}

}  // namespace rshom
