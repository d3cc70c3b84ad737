#pragma once

#include <stdexcept>

#include <Eigen/Dense>

#include "limbctl/limb_model.hpp"
#include "limbctl/state_space.hpp"

namespace limbctl {

/// Shared PI gains for both singular-value channels,
/// l(s) = kp * (1 + ki / s).
struct PiGains {
  double kp = 2.0;
  double ki = 1.5;

  void validate() const {
    if (!(kp > 0.0)) throw std::domain_error("PiGains.kp must be strictly positive");
    if (!(ki > 0.0)) throw std::domain_error("PiGains.ki must be strictly positive");
  }
};

/// Singular value decomposition G = U * Sigma * V^T with orthogonal U, V
/// and descending nonnegative singular values.
struct SvdFactors {
  Eigen::Matrix2d U;
  Eigen::Matrix2d Sigma;
  Eigen::Matrix2d V;
};

/// The nominal decoupling controller
///   K(s) = V * diag(kp (1 + ki/s)) * Sigma^-1 * U^T
/// realized with one integrator per channel:
///   A = 0, B = ki Sigma^-1 U^T, C = kp V, D = kp V Sigma^-1 U^T.
/// D is invertible whenever Sigma is, which the anti-windup gain relies on.
struct NominalController {
  StateSpaceModel ss;
  SvdFactors factors;
  PiGains gains;
};

/// SVD of the static gain with a deterministic sign convention: each
/// column of U gets a nonnegative dominant entry (columns of U and V flip
/// in pairs), and exactly equal singular values resolve to U = I.
/// Rejects plants whose second singular value is negligible, since the
/// decoupling inverse would blow up.
inline SvdFactors svd_2x2(const StaticGain& g) {
  if (!g.matrix.allFinite()) throw std::invalid_argument("svd_2x2: gain must be finite");
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(g.matrix, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdFactors f;
  f.U = svd.matrixU();
  f.V = svd.matrixV();
  f.Sigma = svd.singularValues().asDiagonal();
  const double s1 = f.Sigma(0, 0);
  const double s2 = f.Sigma(1, 1);
  if (!(s2 > 1e-9 * s1))
    throw std::domain_error("svd_2x2: plant is nearly singular, decoupling is ill-posed");

  for (int j = 0; j < 2; ++j) {
    int dominant = std::abs(f.U(0, j)) >= std::abs(f.U(1, j)) ? 0 : 1;
    if (f.U(dominant, j) < 0.0) {
      f.U.col(j) *= -1.0;
      f.V.col(j) *= -1.0;
    }
  }
  if (s1 - s2 <= 1e-12 * s1) {
    // Degenerate spectrum: any orthogonal mixing is valid, pick U = I.
    f.V = f.V * f.U.transpose();
    f.U.setIdentity();
  }
  return f;
}

/// Builds the two-integrator realization of the decoupling PI controller.
inline NominalController build_nominal_controller(const SvdFactors& f, const PiGains& g) {
  g.validate();
  if (!(f.Sigma(0, 0) > 0.0) || !(f.Sigma(1, 1) > 0.0))
    throw std::domain_error("build_nominal_controller: singular values must be strictly positive");
  Eigen::Matrix2d sigma_inv_ut = f.Sigma.inverse() * f.U.transpose();
  NominalController nc;
  nc.factors = f;
  nc.gains = g;
  nc.ss.A = Eigen::MatrixXd::Zero(2, 2);
  nc.ss.B = g.ki * sigma_inv_ut;
  nc.ss.C = g.kp * f.V;
  nc.ss.D = g.kp * f.V * sigma_inv_ut;
  return nc;
}

/// U^T G V Sigma^-1. Equals the identity for factors that actually came
/// from the SVD of G; anything else flags a mis-paired decomposition.
inline Eigen::Matrix2d dc_decoupling_matrix(const SvdFactors& f, const StaticGain& g) {
  return f.U.transpose() * g.matrix * f.V * f.Sigma.inverse();
}

}  // namespace limbctl
