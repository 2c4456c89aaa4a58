#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace rshom {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct BadSpec : std::runtime_error {
  explicit BadSpec(const std::string& m) : std::runtime_error("BadSpec: " + m) {}
};
struct NonElliptic : std::runtime_error {
  explicit NonElliptic(const std::string& m) : std::runtime_error("NonElliptic: " + m) {}
};
struct NonFinite : std::runtime_error {
  explicit NonFinite(const std::string& m) : std::runtime_error("NonFinite: " + m) {}
};
struct NoConvergence : std::runtime_error {
  explicit NoConvergence(const std::string& m) : std::runtime_error("NoConvergence: " + m) {}
};
struct MeanNotZero : std::runtime_error {
  explicit MeanNotZero(const std::string& m) : std::runtime_error("MeanNotZero: " + m) {}
};
struct RouteMismatch : std::runtime_error {
  explicit RouteMismatch(const std::string& m) : std::runtime_error("RouteMismatch: " + m) {}
};
struct RejectionStall : std::runtime_error {
  explicit RejectionStall(const std::string& m) : std::runtime_error("RejectionStall: " + m) {}
};
struct BadEffective : std::runtime_error {
  explicit BadEffective(const std::string& m) : std::runtime_error("BadEffective: " + m) {}
};
struct ConfigInvalid : std::runtime_error {
  explicit ConfigInvalid(const std::string& m) : std::runtime_error("ConfigInvalid: " + m) {}
};
struct QuadratureFail : std::runtime_error {
  explicit QuadratureFail(const std::string& m) : std::runtime_error("QuadratureFail: " + m) {}
};
struct IoFailure : std::runtime_error {
  explicit IoFailure(const std::string& m) : std::runtime_error("IoFailure: " + m) {}
};

/// Symmetric positive square root via eigendecomposition.
inline Mat symmetric_sqrt(const Mat& a, double floor_eig = 0.0) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  if (es.info() != Eigen::Success)
    throw NonFinite("eigendecomposition failed in symmetric_sqrt");
  Vec lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < floor_eig)
      throw NonElliptic("matrix not positive definite in symmetric_sqrt");
    lam[i] = std::sqrt(lam[i]);
  }
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

inline double min_eigenvalue(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace rshom
