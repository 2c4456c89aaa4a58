#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <vector>

#include <fftw3.h>

#include "rshom/medium.hpp"

namespace rshom {

using Cplx = std::complex<double>;
using CplxField = std::vector<Cplx>;

namespace detail {

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDeleter>;

}  // namespace detail

// Pseudospectral realization of the generator on the phase torus.
// Galerkin space: Fourier modes with |k_i| <= cutoff-1; transform grid is
// 2*cutoff points per axis so products a*Du are dealiased for low-degree a.
// Coefficient arrays hold u_hat with u(x) = sum_k u_hat(k) exp(2*pi*i k.x)
// in row-major FFTW layout on the full grid.
class TorusOperator {
 public:
  TorusOperator(const CoefficientField& field, int cutoff)
      : field_(field), d_(field.dim()), cutoff_(cutoff), n_(2 * cutoff) {
    total_ = 1;
    for (int i = 0; i < d_; ++i) total_ *= n_;
    std::vector<int> dims(d_, n_);
    work_.resize(total_);
    auto* w = reinterpret_cast<fftw_complex*>(work_.data());
    fwd_.reset(fftw_plan_dft(d_, dims.data(), w, w, FFTW_FORWARD,
                             FFTW_ESTIMATE | FFTW_UNALIGNED));
    bwd_.reset(fftw_plan_dft(d_, dims.data(), w, w, FFTW_BACKWARD,
                             FFTW_ESTIMATE | FFTW_UNALIGNED));

    // coefficient tensor and derivative factors on the grid
    a_grid_.assign(d_ * d_, std::vector<double>(total_));
    b_grid_.assign(d_, std::vector<double>(total_));
    gamma_grid_.assign(d_, std::vector<double>(total_));
    Vec u(d_);
    for (long t = 0; t < total_; ++t) {
      grid_point(t, u);
      Mat a = field.a_at(u);
      Vec b = field.b_at(u);
      for (int i = 0; i < d_; ++i) {
        for (int j = 0; j < d_; ++j) a_grid_[i * d_ + j][t] = a(i, j);
        b_grid_[i][t] = b[i];
        gamma_grid_[i][t] = a(i, 0);
      }
    }
    // 2*pi*(P^T k)_i per grid index and axis
    fac_.assign(d_, std::vector<double>(total_));
    Mat P = field.translation();
    Eigen::VectorXi kv(d_);
    for (long t = 0; t < total_; ++t) {
      mode_vector(t, kv);
      Vec pk = P.transpose() * kv.cast<double>();
      for (int i = 0; i < d_; ++i) fac_[i][t] = 2.0 * M_PI * pk[i];
    }
  }

  int dim() const { return d_; }
  int cutoff() const { return cutoff_; }
  int grid_n() const { return n_; }
  long size() const { return total_; }
  const CoefficientField& field() const { return field_; }
  const std::vector<double>& a_entry(int i, int j) const {
    return a_grid_[i * d_ + j];
  }
  const std::vector<double>& gamma_entry(int i) const { return gamma_grid_[i]; }
  const std::vector<double>& deriv_factor(int i) const { return fac_[i]; }

  void grid_point(long t, Vec& u) const {
    long r = t;
    for (int i = d_ - 1; i >= 0; --i) {
      u[i] = static_cast<double>(r % n_) / n_;
      r /= n_;
    }
  }

  void mode_vector(long t, Eigen::VectorXi& k) const {
    long r = t;
    for (int i = d_ - 1; i >= 0; --i) {
      int m = static_cast<int>(r % n_);
      k[i] = m < n_ / 2 ? m : m - n_;
      r /= n_;
    }
  }

  bool in_galerkin_box(long t) const {
    long r = t;
    for (int i = 0; i < d_; ++i) {
      int m = static_cast<int>(r % n_);
      int k = m < n_ / 2 ? m : m - n_;
      if (std::abs(k) > cutoff_ - 1) return false;
      r /= n_;
    }
    return true;
  }

  void to_coeff(CplxField& v) const {
    auto* w = reinterpret_cast<fftw_complex*>(v.data());
    fftw_execute_dft(fwd_.get(), w, w);
    double inv = 1.0 / static_cast<double>(total_);
    for (auto& z : v) z *= inv;
  }

  void to_grid(CplxField& v) const {
    auto* w = reinterpret_cast<fftw_complex*>(v.data());
    fftw_execute_dft(bwd_.get(), w, w);
  }

  /// Zero all modes outside the Galerkin box; optionally the mean too.
  void project(CplxField& v, bool zero_mean = false) const {
    for (long t = 0; t < total_; ++t)
      if (!in_galerkin_box(t)) v[t] = Cplx(0.0);
    if (zero_mean) v[0] = Cplx(0.0);
  }

  /// Spectral gradient: out_i = D_i u on the grid (complex values, real field
  /// inputs stay real to roundoff).
  void gradient(const CplxField& u_hat, std::vector<CplxField>& grad) const {
    grad.assign(d_, u_hat);
    for (int i = 0; i < d_; ++i) {
      for (long t = 0; t < total_; ++t)
        grad[i][t] *= Cplx(0.0, fac_[i][t]);
      to_grid(grad[i]);
    }
  }

  /// Applies lambda*I + (1/2) D* a D (the SPD Galerkin operator).
  void apply(double lambda, const CplxField& u_hat, CplxField& out) const {
    std::vector<CplxField> grad;
    gradient(u_hat, grad);
    std::vector<CplxField> flux(d_, CplxField(total_));
    for (int j = 0; j < d_; ++j) {
      for (long t = 0; t < total_; ++t) {
        Cplx s(0.0);
        for (int i = 0; i < d_; ++i) s += a_grid_[i * d_ + j][t] * grad[i][t];
        flux[j][t] = s;
      }
      to_coeff(flux[j]);
    }
    out.assign(total_, Cplx(0.0));
    for (long t = 0; t < total_; ++t) {
      Cplx div(0.0);
      for (int j = 0; j < d_; ++j)
        div += Cplx(0.0, fac_[j][t]) * flux[j][t];
      out[t] = lambda * u_hat[t] - 0.5 * div;
    }
    project(out, lambda == 0.0);
  }

  /// Fourier coefficients of b_i, projected to the Galerkin box.
  CplxField rhs(int direction) const {
    CplxField r(total_);
    for (long t = 0; t < total_; ++t) r[t] = Cplx(b_grid_[direction][t], 0.0);
    to_coeff(r);
    if (std::abs(r[0]) > 1e-12)
      throw MeanNotZero("b_" + std::to_string(direction + 1) +
                        " has nonzero torus mean");
    project(r, true);
    return r;
  }

  static double dot(const CplxField& x, const CplxField& y) {
    double s = 0.0;
    for (size_t t = 0; t < x.size(); ++t)
      s += x[t].real() * y[t].real() + x[t].imag() * y[t].imag();
    return s;
  }

  static double l2norm(const CplxField& x) { return std::sqrt(dot(x, x)); }

  double grad_l2norm(const CplxField& u_hat) const {
    double s = 0.0;
    for (long t = 0; t < total_; ++t) {
      double f2 = 0.0;
      for (int i = 0; i < d_; ++i) f2 += fac_[i][t] * fac_[i][t];
      s += f2 * std::norm(u_hat[t]);
    }
    return std::sqrt(s);
  }

 private:
  const CoefficientField& field_;
  int d_, cutoff_, n_;
  long total_;
  mutable CplxField work_;
  detail::FftwPlan fwd_, bwd_;
  std::vector<std::vector<double>> a_grid_, b_grid_, gamma_grid_, fac_;
};

struct CorrectorSolution {
  int direction = 0;  // 0-based
  double lambda = 0.0;
  int cutoff = 0;
  int grid_n = 0;
  CplxField coeff;  // full-grid layout, modes outside the box are zero
  double residual = 0.0;
  int iterations = 0;
};

struct DecayReport {
  std::vector<double> lambda;
  std::vector<double> lam_u2;        // lambda * |u|_2^2
  std::vector<double> sqrtlam_Du;    // |sqrt(lambda) Du|_2
  std::vector<double> dist_to_zeta;  // |Du_lambda - zeta|_2
};

namespace detail {

// Preconditioned CG with a Fourier-diagonal preconditioner
// (lambda + (1/2)*abar*|2 pi P^T k|^2)^-1; abar = mean trace of a / d.
inline CorrectorSolution spectral_cg(const TorusOperator& op, int direction,
                                     double lambda, double tol, int max_iter) {
  const long N = op.size();
  CplxField b = op.rhs(direction);
  CorrectorSolution sol;
  sol.direction = direction;
  sol.lambda = lambda;
  sol.cutoff = op.cutoff();
  sol.grid_n = op.grid_n();
  sol.coeff.assign(N, Cplx(0.0));

  double bnorm = TorusOperator::l2norm(b);
  if (bnorm == 0.0) return sol;  // zero right-hand side -> zero solution

  double abar = 0.0;
  for (int i = 0; i < op.dim(); ++i) {
    const auto& aii = op.a_entry(i, i);
    for (long t = 0; t < N; ++t) abar += aii[t];
  }
  abar /= static_cast<double>(op.dim()) * N;

  std::vector<double> precond(N);
  for (long t = 0; t < N; ++t) {
    double f2 = 0.0;
    for (int i = 0; i < op.dim(); ++i) {
      double f = op.deriv_factor(i)[t];
      f2 += f * f;
    }
    double diag = lambda + 0.5 * abar * f2;
    precond[t] = diag > 0.0 ? 1.0 / diag : 1.0;
  }

  CplxField r = b, z(N), p(N), Ap(N);
  auto apply_precond = [&](const CplxField& x, CplxField& y) {
    for (long t = 0; t < N; ++t) y[t] = precond[t] * x[t];
  };
  apply_precond(r, z);
  p = z;
  double rz = TorusOperator::dot(r, z);
  int it = 0;
  for (; it < max_iter; ++it) {
    if (TorusOperator::l2norm(r) <= tol * bnorm) break;
    op.apply(lambda, p, Ap);
    double alpha = rz / TorusOperator::dot(p, Ap);
    for (long t = 0; t < N; ++t) {
      sol.coeff[t] += alpha * p[t];
      r[t] -= alpha * Ap[t];
    }
    apply_precond(r, z);
    double rz_new = TorusOperator::dot(r, z);
    double beta = rz_new / rz;
    rz = rz_new;
    for (long t = 0; t < N; ++t) p[t] = z[t] + beta * p[t];
  }
  sol.residual = TorusOperator::l2norm(r) / bnorm;
  sol.iterations = it;
  if (sol.residual > tol)
    throw NoConvergence("CG stalled at relative residual " +
                        std::to_string(sol.residual) + " after " +
                        std::to_string(it) + " iterations");
  return sol;
}

}  // namespace detail

/// Resolvent equation lambda*u - L*u = b_i on the Galerkin space.
inline CorrectorSolution solve_resolvent(const TorusOperator& op, int direction,
                                         double lambda, double tol = 1e-10,
                                         int max_iter = 10000) {
  if (lambda <= 0.0) throw ConfigInvalid("solve_resolvent requires lambda > 0");
  return detail::spectral_cg(op, direction, lambda, tol, max_iter);
}

/// Mean-zero cell problem -L*u = b_i; the gradient of the solution is zeta^i.
inline CorrectorSolution solve_cell(const TorusOperator& op, int direction,
                                    double tol = 1e-10, int max_iter = 10000) {
  return detail::spectral_cg(op, direction, 0.0, tol, max_iter);
}

/// Per-lambda diagnostics along a decreasing ladder, against the cell solution.
inline DecayReport resolvent_decay_scan(const TorusOperator& op, int direction,
                                        const std::vector<double>& ladder,
                                        double tol = 1e-10) {
  CorrectorSolution cell = solve_cell(op, direction, tol);
  DecayReport rep;
  for (double lam : ladder) {
    CorrectorSolution s = solve_resolvent(op, direction, lam, tol);
    rep.lambda.push_back(lam);
    double u2 = TorusOperator::l2norm(s.coeff);
    rep.lam_u2.push_back(lam * u2 * u2);
    rep.sqrtlam_Du.push_back(std::sqrt(lam) * op.grad_l2norm(s.coeff));
    CplxField diff = s.coeff;
    for (long t = 0; t < op.size(); ++t) diff[t] -= cell.coeff[t];
    rep.dist_to_zeta.push_back(op.grad_l2norm(diff));
  }
  return rep;
}

}  // namespace rshom
