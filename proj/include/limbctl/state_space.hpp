#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace limbctl {

/// Finite-dimensional LTI realization y = C x + D u, xdot = A x + B u.
/// n = 0 states is allowed and denotes a static gain D.
struct StateSpaceModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;

  int states() const { return static_cast<int>(A.rows()); }
  int inputs() const { return static_cast<int>(D.cols()); }
  int outputs() const { return static_cast<int>(D.rows()); }

  void validate() const {
    if (A.rows() != A.cols()) throw std::invalid_argument("StateSpaceModel: A must be square");
    if (B.rows() != A.rows()) throw std::invalid_argument("StateSpaceModel: B row count must match A");
    if (C.cols() != A.cols()) throw std::invalid_argument("StateSpaceModel: C column count must match A");
    if (D.rows() != C.rows() || D.cols() != B.cols())
      throw std::invalid_argument("StateSpaceModel: D dimensions must match B and C");
  }

  static StateSpaceModel static_gain(const Eigen::MatrixXd& D) {
    StateSpaceModel s;
    s.A.resize(0, 0);
    s.B.resize(0, D.cols());
    s.C.resize(D.rows(), 0);
    s.D = D;
    return s;
  }
};

/// First-order relative-uncertainty weight
///   w(s) = (tau*s + r0) / ((tau/r_inf)*s + 1)
/// with DC magnitude r0, high-frequency magnitude r_inf, and unity
/// crossing near 1/tau. The magnitude is monotone increasing, which
/// requires 0 < r0 < r_inf.
struct UncertaintyWeight {
  double r0 = 0.1;
  double r_inf = 1.5;
  double tau = 0.1;

  void validate() const {
    if (!(r0 > 0.0) || !(r_inf > r0) || !(tau > 0.0))
      throw std::domain_error("UncertaintyWeight: requires 0 < r0 < r_inf and tau > 0");
  }
};

/// C (jw I - A)^-1 B + D.
inline Eigen::MatrixXcd freq_response(const StateSpaceModel& sys, double omega) {
  sys.validate();
  const int n = sys.states();
  if (n == 0) return sys.D.cast<std::complex<double>>();
  Eigen::MatrixXcd resolvent =
      std::complex<double>(0.0, omega) * Eigen::MatrixXcd::Identity(n, n) -
      sys.A.cast<std::complex<double>>();
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(resolvent);
  if (!lu.isInvertible())
    throw std::runtime_error("freq_response: resolvent is singular at this frequency");
  return sys.C.cast<std::complex<double>>() * lu.solve(sys.B.cast<std::complex<double>>()) +
         sys.D.cast<std::complex<double>>();
}

/// True when every eigenvalue of A has real part below -margin.
/// The empty matrix counts as stable.
inline bool is_hurwitz(const Eigen::MatrixXd& A, double margin = 1e-9) {
  if (A.rows() != A.cols()) throw std::invalid_argument("is_hurwitz: matrix must be square");
  if (A.rows() == 0) return true;
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, /*computeEigenvectors=*/false);
  for (int i = 0; i < A.rows(); ++i)
    if (es.eigenvalues()(i).real() >= -margin) return false;
  return true;
}

namespace detail {

/// Largest singular value of the frequency response at omega.
inline double gain_at(const StateSpaceModel& sys, double omega) {
  return freq_response(sys, omega).jacobiSvd().singularValues()(0);
}

/// Tests whether the level-gamma Hamiltonian has an eigenvalue on the
/// imaginary axis, which happens exactly when some singular value of the
/// frequency response crosses gamma.
inline bool hamiltonian_touches_axis(const StateSpaceModel& sys, double gamma) {
  const int n = sys.states();
  const int m = sys.inputs();
  const Eigen::MatrixXd& D = sys.D;
  Eigen::MatrixXd R = gamma * gamma * Eigen::MatrixXd::Identity(m, m) - D.transpose() * D;
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success)
    return true;  // gamma does not dominate the feedthrough, treat as a crossing
  Eigen::MatrixXd Rinv = R.inverse();
  Eigen::MatrixXd Acl = sys.A + sys.B * Rinv * D.transpose() * sys.C;
  Eigen::MatrixXd H(2 * n, 2 * n);
  H.topLeftCorner(n, n) = Acl;
  H.topRightCorner(n, n) = sys.B * Rinv * sys.B.transpose();
  H.bottomLeftCorner(n, n) =
      -sys.C.transpose() * (Eigen::MatrixXd::Identity(sys.outputs(), sys.outputs()) +
                            D * Rinv * D.transpose()) *
      sys.C;
  H.bottomRightCorner(n, n) = -Acl.transpose();
  Eigen::EigenSolver<Eigen::MatrixXd> es(H, /*computeEigenvectors=*/false);
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  for (int i = 0; i < 2 * n; ++i) {
    const auto ev = es.eigenvalues()(i);
    if (std::abs(ev.real()) <= 1e-10 * scale + 1e-9 * std::abs(ev.imag())) return true;
  }
  return false;
}

}  // namespace detail

/// H-infinity norm by bisection on the Hamiltonian imaginary-axis test.
/// Requires a Hurwitz A; throws otherwise since the norm is infinite.
/// The returned value is within the given relative tolerance of the
/// supremum of the largest singular value over all frequencies.
inline double hinf_norm(const StateSpaceModel& sys, double tol = 1e-6) {
  sys.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("hinf_norm: tolerance must be positive");
  if (sys.states() == 0) return sys.D.jacobiSvd().singularValues()(0);
  if (!is_hurwitz(sys.A))
    throw std::runtime_error("hinf_norm: system is not stable, norm is unbounded");

  // Lower bound from the feedthrough and a coarse frequency probe.
  double lo = sys.D.jacobiSvd().singularValues()(0);
  Eigen::VectorXcd poles = Eigen::EigenSolver<Eigen::MatrixXd>(sys.A, false).eigenvalues();
  std::vector<double> probes = {0.0};
  for (int i = 0; i < poles.size(); ++i) {
    const double w = std::abs(poles(i));
    if (w > 0.0) probes.insert(probes.end(), {0.3 * w, w, 3.0 * w});
  }
  for (double w : probes) lo = std::max(lo, detail::gain_at(sys, w));
  if (lo == 0.0) return 0.0;  // zero feedthrough and zero response: B or C vanishes

  double hi = 2.0 * lo;
  int guard = 0;
  while (detail::hamiltonian_touches_axis(sys, hi)) {
    hi *= 2.0;
    if (++guard > 60) throw std::runtime_error("hinf_norm: failed to bracket the norm");
  }
  // lo is an attained gain, hi is strictly above the norm.
  while (hi - lo > tol * lo) {
    const double mid = 0.5 * (lo + hi);
    if (detail::hamiltonian_touches_axis(sys, mid))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// One-state realization of the uncertainty weight, exact at all
/// frequencies: pole at -r_inf/tau, DC gain r0, feedthrough r_inf.
inline StateSpaceModel realize_weight(const UncertaintyWeight& w) {
  w.validate();
  StateSpaceModel sys;
  const double a = w.tau / w.r_inf;  // denominator time constant
  sys.A = Eigen::MatrixXd::Constant(1, 1, -1.0 / a);
  sys.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  sys.C = Eigen::MatrixXd::Constant(1, 1, (w.r0 - w.r_inf) / a);
  sys.D = Eigen::MatrixXd::Constant(1, 1, w.r_inf);
  return sys;
}

/// Similarity scaling of a square system: the realization of
/// W G(s) W^-1, namely (A, B W^-1, W C, W D W^-1).
inline StateSpaceModel similarity_scale(const StateSpaceModel& sys, const Eigen::MatrixXd& W) {
  sys.validate();
  if (sys.inputs() != sys.outputs())
    throw std::invalid_argument("similarity_scale: system must be square");
  if (W.rows() != W.cols() || W.rows() != sys.outputs())
    throw std::invalid_argument("similarity_scale: W must match the channel dimension");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(W);
  if (!lu.isInvertible()) throw std::invalid_argument("similarity_scale: W is singular");
  Eigen::MatrixXd Winv = lu.inverse();
  StateSpaceModel out;
  out.A = sys.A;
  out.B = sys.B * Winv;
  out.C = W * sys.C;
  out.D = W * sys.D * Winv;
  return out;
}

/// Exact zero-order-hold discretization through the matrix exponential of
/// the augmented [A B; 0 0] block. C and D carry over unchanged.
inline StateSpaceModel discretize(const StateSpaceModel& sys, double dt) {
  sys.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("discretize: dt must be positive");
  const int n = sys.states();
  const int m = sys.inputs();
  StateSpaceModel out = sys;
  if (n == 0) return out;
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = sys.A;
  aug.topRightCorner(n, m) = sys.B;
  Eigen::MatrixXd expm = (aug * dt).exp();
  out.A = expm.topLeftCorner(n, n);
  out.B = expm.topRightCorner(n, m);
  return out;
}

}  // namespace limbctl
