#pragma once

#include <vector>

#include "rshom/corrector.hpp"

namespace rshom {

// Quadrature of functionals of the corrector gradients happens on a grid
// twice as fine as the solver grid so products (I+zeta)* a (I+zeta) are
// integrated without aliasing.
class FieldQuadrature {
 public:
  FieldQuadrature(const CoefficientField& field, int grid_n)
      : field_(field), d_(field.dim()), n_(grid_n) {
    total_ = 1;
    for (int i = 0; i < d_; ++i) total_ *= n_;
    std::vector<int> dims(d_, n_);
    CplxField probe(total_);
    auto* w = reinterpret_cast<fftw_complex*>(probe.data());
    bwd_.reset(fftw_plan_dft(d_, dims.data(), w, w, FFTW_BACKWARD,
                             FFTW_ESTIMATE | FFTW_UNALIGNED));
    a_grid_.assign(d_ * d_, std::vector<double>(total_));
    gamma_grid_.assign(d_, std::vector<double>(total_));
    Vec u(d_);
    for (long t = 0; t < total_; ++t) {
      long r = t;
      for (int i = d_ - 1; i >= 0; --i) {
        u[i] = static_cast<double>(r % n_) / n_;
        r /= n_;
      }
      Mat a = field.a_at(u);
      for (int i = 0; i < d_; ++i) {
        for (int j = 0; j < d_; ++j) a_grid_[i * d_ + j][t] = a(i, j);
        gamma_grid_[i][t] = a(i, 0);
      }
    }
    fac_.assign(d_, std::vector<double>(total_));
    Mat P = field.translation();
    Eigen::VectorXi kv(d_);
    for (long t = 0; t < total_; ++t) {
      long r = t;
      for (int i = d_ - 1; i >= 0; --i) {
        int m = static_cast<int>(r % n_);
        kv[i] = m < n_ / 2 ? m : m - n_;
        r /= n_;
      }
      Vec pk = P.transpose() * kv.cast<double>();
      for (int i = 0; i < d_; ++i) fac_[i][t] = 2.0 * M_PI * pk[i];
    }
  }

  int dim() const { return d_; }
  int grid_n() const { return n_; }
  long size() const { return total_; }
  double a(int i, int j, long t) const { return a_grid_[i * d_ + j][t]; }
  double gamma(int i, long t) const { return gamma_grid_[i][t]; }

  /// Embeds a coarse-grid coefficient array onto this grid (zero padding).
  CplxField embed(const TorusOperator& src, const CplxField& coeff) const {
    CplxField out(total_, Cplx(0.0));
    Eigen::VectorXi kv(src.dim());
    for (long t = 0; t < static_cast<long>(coeff.size()); ++t) {
      if (coeff[t] == Cplx(0.0)) continue;
      src.mode_vector(t, kv);
      long idx = 0;
      for (int i = 0; i < d_; ++i) {
        int m = kv[i] >= 0 ? kv[i] : kv[i] + n_;
        idx = idx * n_ + m;
      }
      out[idx] = coeff[t];
    }
    return out;
  }

  /// Gradient fields D_i u of a coarse solution, sampled on this grid.
  std::vector<std::vector<double>> gradient(const TorusOperator& src,
                                            const CplxField& coeff) const {
    CplxField fine = embed(src, coeff);
    std::vector<std::vector<double>> grad(d_, std::vector<double>(total_));
    CplxField tmp(total_);
    for (int i = 0; i < d_; ++i) {
      for (long t = 0; t < total_; ++t)
        tmp[t] = Cplx(0.0, fac_[i][t]) * fine[t];
      auto* w = reinterpret_cast<fftw_complex*>(tmp.data());
      fftw_execute_dft(bwd_.get(), w, w);
      for (long t = 0; t < total_; ++t) grad[i][t] = tmp[t].real();
    }
    return grad;
  }

 private:
  const CoefficientField& field_;
  int d_, n_;
  long total_;
  detail::FftwPlan bwd_;
  std::vector<std::vector<double>> a_grid_, gamma_grid_, fac_;
};

struct EffectiveCoefficients {
  Mat Abar;        // canonical (quadratic-form route, symmetrized)
  Mat Abar_short;  // M[(I+zeta*) a]
  Vec Gamma;       // M[(I+zeta*) gamma]
  double Lambda = 0.0;
  double resid_sym_short = 0.0;  // |Abar_sym - Abar_short|_maxabs
  double resid_gamma = 0.0;      // |Gamma - first row of Abar_short|_maxabs
  double resid_var_sym = -1.0;   // filled once the variational route ran
  int cutoff = 0;
  double tol = 0.0;
  std::size_t field_hash = 0;
};

/// Both algebraic routes to Abar plus Gamma, by dealiased quadrature.
inline EffectiveCoefficients effective_matrix(
    const TorusOperator& op, const std::vector<CorrectorSolution>& correctors,
    double route_tol = 1e-6) {
  const int d = op.dim();
  if (static_cast<int>(correctors.size()) != d)
    throw ConfigInvalid("need one cell corrector per direction");
  for (const auto& c : correctors)
    if (c.lambda != 0.0)
      throw ConfigInvalid("effective coefficients require lambda = 0 correctors");

  FieldQuadrature quad(op.field(), 2 * op.grid_n());
  const long N = quad.size();
  // zeta(i,j) = D_i u^j on the fine grid
  std::vector<std::vector<std::vector<double>>> zeta(d);
  for (int j = 0; j < d; ++j) zeta[j] = quad.gradient(op, correctors[j].coeff);

  Mat Asym = Mat::Zero(d, d), Ashort = Mat::Zero(d, d);
  Vec Gam = Vec::Zero(d);
  Mat G(d, d), aG(d, d), a(d, d);
  for (long t = 0; t < N; ++t) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        a(i, j) = quad.a(i, j, t);
        G(i, j) = (i == j ? 1.0 : 0.0) + zeta[j][i][t];
      }
    aG.noalias() = a * G;
    Asym.noalias() += G.transpose() * aG;
    Ashort.noalias() += G.transpose() * a;
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int l = 0; l < d; ++l) s += G(l, i) * quad.gamma(l, t);
      Gam[i] += s;
    }
  }
  Asym /= static_cast<double>(N);
  Ashort /= static_cast<double>(N);
  Gam /= static_cast<double>(N);

  EffectiveCoefficients eff;
  eff.Abar_short = Ashort;
  eff.Abar = 0.5 * (Asym + Asym.transpose());
  eff.Gamma = Gam;
  eff.Lambda = op.field().ellipticity();
  eff.cutoff = op.cutoff();
  eff.tol = route_tol;
  eff.resid_sym_short = (Asym - Ashort).cwiseAbs().maxCoeff();
  eff.resid_gamma = (Gam.transpose() - Ashort.row(0)).cwiseAbs().maxCoeff();
  nlohmann::json js;
  to_json(js, op.field().spec());
  eff.field_hash = std::hash<std::string>{}(js.dump());
  if (eff.resid_sym_short > route_tol)
    throw RouteMismatch("quadratic-form and short routes disagree by " +
                        std::to_string(eff.resid_sym_short));
  if (eff.resid_gamma > route_tol)
    throw RouteMismatch("Gamma differs from the first row of Abar by " +
                        std::to_string(eff.resid_gamma));
  return eff;
}

/// Gamma = M[(I+zeta*) gamma] alone.
inline Vec effective_reflection(const TorusOperator& op,
                                const std::vector<CorrectorSolution>& correctors,
                                double route_tol = 1e-6) {
  return effective_matrix(op, correctors, route_tol).Gamma;
}

/// M[(X+Dphi)* a (X+Dphi)] for a trial function given by its coefficients.
inline double variational_value(const TorusOperator& op, const CplxField& phi,
                                const Vec& X) {
  FieldQuadrature quad(op.field(), 2 * op.grid_n());
  const int d = op.dim();
  const long N = quad.size();
  auto grad = quad.gradient(op, phi);
  double sum = 0.0;
  for (long t = 0; t < N; ++t) {
    double v[8];  // d is small
    for (int i = 0; i < d; ++i) v[i] = X[i] + grad[i][t];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) sum += v[i] * quad.a(i, j, t) * v[j];
  }
  return sum / static_cast<double>(N);
}

/// Minimizes the Dirichlet functional over the Galerkin trial space; the
/// minimum is an independent route to X* Abar X.
inline double variational_minimize(const TorusOperator& op, const Vec& X,
                                   double tol = 1e-10, int max_iter = 10000,
                                   CplxField* minimizer = nullptr) {
  const int d = op.dim();
  const long N = op.size();
  // rhs = (1/2) div(a X) in Fourier space, assembled from grid samples
  CplxField rhs(N, Cplx(0.0));
  {
    std::vector<CplxField> w(d, CplxField(N));
    for (int j = 0; j < d; ++j) {
      for (long t = 0; t < N; ++t) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += op.a_entry(j, i)[t] * X[i];
        w[j][t] = Cplx(s, 0.0);
      }
      op.to_coeff(w[j]);
    }
    for (long t = 0; t < N; ++t) {
      Cplx div(0.0);
      for (int j = 0; j < d; ++j)
        div += Cplx(0.0, op.deriv_factor(j)[t]) * w[j][t];
      rhs[t] = 0.5 * div;
    }
    op.project(rhs, true);
  }

  CplxField phi(N, Cplx(0.0));
  double bnorm = TorusOperator::l2norm(rhs);
  if (bnorm > 0.0) {
    CplxField r = rhs, p = rhs, Ap(N);
    double rr = TorusOperator::dot(r, r);
    int it = 0;
    for (; it < max_iter; ++it) {
      if (std::sqrt(rr) <= tol * bnorm) break;
      op.apply(0.0, p, Ap);
      double alpha = rr / TorusOperator::dot(p, Ap);
      for (long t = 0; t < N; ++t) {
        phi[t] += alpha * p[t];
        r[t] -= alpha * Ap[t];
      }
      double rr_new = TorusOperator::dot(r, r);
      double beta = rr_new / rr;
      rr = rr_new;
      for (long t = 0; t < N; ++t) p[t] = r[t] + beta * p[t];
    }
    if (std::sqrt(rr) > tol * bnorm)
      throw NoConvergence("variational CG did not reach tolerance");
  }
  if (minimizer) *minimizer = phi;
  return variational_value(op, phi, X);
}

/// Weak-form optimality of a cell corrector: the flux a(e_i + Du) must be
/// divergence-free against every trial mode. Returns the max coefficient of
/// div(flux) over the Galerkin box (zero for an exact corrector).
inline double orthogonality_residual(const TorusOperator& op,
                                     const CorrectorSolution& cor) {
  const int d = op.dim();
  const long N = op.size();
  std::vector<CplxField> grad;
  op.gradient(cor.coeff, grad);
  std::vector<CplxField> flux(d, CplxField(N));
  for (int j = 0; j < d; ++j) {
    for (long t = 0; t < N; ++t) {
      Cplx s(0.0);
      for (int l = 0; l < d; ++l) {
        Cplx e = (l == cor.direction) ? Cplx(1.0) : Cplx(0.0);
        s += op.a_entry(j, l)[t] * (e + grad[l][t]);
      }
      flux[j][t] = s;
    }
    op.to_coeff(flux[j]);
  }
  double worst = 0.0;
  for (long t = 0; t < N; ++t) {
    if (!op.in_galerkin_box(t)) continue;
    Cplx div(0.0);
    for (int j = 0; j < d; ++j)
      div += Cplx(0.0, op.deriv_factor(j)[t]) * flux[j][t];
    worst = std::max(worst, std::abs(div));
  }
  return worst;
}

// ---- serialization ----

inline void to_json(nlohmann::json& j, const EffectiveCoefficients& e) {
  auto mat = [](const Mat& m) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      rows.emplace_back(m.row(r).begin(), m.row(r).end());
    return rows;
  };
  j = nlohmann::json{{"Abar", mat(e.Abar)},
                     {"Abar_short", mat(e.Abar_short)},
                     {"Gamma", std::vector<double>(e.Gamma.begin(), e.Gamma.end())},
                     {"Lambda", e.Lambda},
                     {"resid_sym_short", e.resid_sym_short},
                     {"resid_gamma", e.resid_gamma},
                     {"resid_var_sym", e.resid_var_sym},
                     {"cutoff", e.cutoff},
                     {"tol", e.tol},
                     {"field_hash", e.field_hash}};
}

}  // namespace rshom
