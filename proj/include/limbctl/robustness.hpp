#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "limbctl/anti_windup.hpp"
#include "limbctl/state_space.hpp"
#include "limbctl/svd_controller.hpp"

namespace limbctl {

// ---------------------------------------------------------------------------
// Uncertainty block structure
// ---------------------------------------------------------------------------

enum class BlockKind { ConeNonlinear, Lti };

/// Admissible constant scalings commuting with a block. A scalar-times-
/// identity uncertainty admits a full scaling, a diagonal uncertainty a
/// diagonal scaling, and a full uncertainty only a scalar-times-identity
/// scaling.
enum class ScalingClass { Full, Diagonal, ScalarIdentity };

struct DeltaBlock {
  BlockKind kind;
  int size;
  ScalingClass scaling;
};

struct DeltaStructure {
  std::vector<DeltaBlock> blocks;

  int channels() const {
    int total = 0;
    for (const auto& b : blocks) total += b.size;
    return total;
  }
};

/// The known LTI part of the loop with every uncertainty channel pulled
/// out: inputs are the block outputs p, outputs are the block inputs q.
/// Closing every channel at zero recovers the nominal linear closed loop.
struct InterconnectionM {
  StateSpaceModel ss;
  DeltaStructure structure;
};

struct LmiCertificate {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd W;
  double delta = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  bool feasible = false;
  std::string diagnostics;
};

struct RobustnessReport {
  bool m_stable = false;
  double beta = std::numeric_limits<double>::infinity();
  bool robustly_stable = false;
  PiGains gains;
  bool with_dynamics = false;
  LmiCertificate certificate;
};

// ---------------------------------------------------------------------------
// Interconnection builders
// ---------------------------------------------------------------------------

/// Saturation-only interconnection. The clamp (with the direction scaling
/// lumped into the same memoryless block) is written as u_applied = q - p
/// with q = u_commanded and p the deadzone output, a cone-bounded operator
/// in the [0, 1] sector. Eliminating the loop algebra with r = 0 gives,
/// with S = (I + D G)^-1,
///   A_M = (A - H C) + H S C,  B_M = -H S,
///   C_M = S C,                D_M = S D G.
inline InterconnectionM build_m_sat(const ConditionedController& cc, const StaticGain& g) {
  const Eigen::Matrix2d A = cc.nominal.ss.A;
  const Eigen::Matrix2d C = cc.nominal.ss.C;
  const Eigen::Matrix2d D = cc.nominal.ss.D;
  const Eigen::Matrix2d DG = D * g.matrix;
  const Eigen::Matrix2d loop = Eigen::Matrix2d::Identity() + DG;
  Eigen::FullPivLU<Eigen::Matrix2d> lu(loop);
  if (!lu.isInvertible())
    throw std::runtime_error("build_m_sat: I + D G is singular, loop is ill-posed");
  const Eigen::Matrix2d S = lu.inverse();

  InterconnectionM m;
  m.ss.A = (A - cc.H * C) + cc.H * S * C;
  m.ss.B = -cc.H * S;
  m.ss.C = S * C;
  m.ss.D = S * DG;
  m.structure.blocks = {{BlockKind::ConeNonlinear, 2, ScalingClass::Full}};
  return m;
}

/// Mixed interconnection: the saturation block plus a multiplicative
/// input uncertainty G (u_applied + w_dyn(s) p_dyn) with q_dyn = u_applied.
/// The weight w_dyn contributes one state per channel; states stack as
/// (controller, weight) and channels as (saturation, dynamics).
inline InterconnectionM build_m_mixed(const ConditionedController& cc, const StaticGain& g,
                                      const UncertaintyWeight& w) {
  const Eigen::Matrix2d A = cc.nominal.ss.A;
  const Eigen::Matrix2d C = cc.nominal.ss.C;
  const Eigen::Matrix2d D = cc.nominal.ss.D;
  const Eigen::Matrix2d DG = D * g.matrix;
  const Eigen::Matrix2d loop = Eigen::Matrix2d::Identity() + DG;
  Eigen::FullPivLU<Eigen::Matrix2d> lu(loop);
  if (!lu.isInvertible())
    throw std::runtime_error("build_m_mixed: I + D G is singular, loop is ill-posed");
  const Eigen::Matrix2d S = lu.inverse();
  const Eigen::Matrix2d SC = S * C;
  const Eigen::Matrix2d SDG = S * DG;

  const StateSpaceModel wss = realize_weight(w);
  const double aw = wss.A(0, 0);
  const double bw = wss.B(0, 0);
  const double cw = wss.C(0, 0);
  const double dw = wss.D(0, 0);
  const Eigen::Matrix2d I2 = Eigen::Matrix2d::Identity();

  InterconnectionM m;
  m.ss.A.setZero(4, 4);
  m.ss.A.topLeftCorner(2, 2) = (A - cc.H * C) + cc.H * SC;
  m.ss.A.topRightCorner(2, 2) = -cw * cc.H * SDG;
  m.ss.A.bottomRightCorner(2, 2) = aw * I2;

  m.ss.B.setZero(4, 4);
  m.ss.B.topLeftCorner(2, 2) = -cc.H * S;
  m.ss.B.topRightCorner(2, 2) = -dw * cc.H * SDG;
  m.ss.B.bottomRightCorner(2, 2) = bw * I2;

  m.ss.C.setZero(4, 4);
  m.ss.C.topLeftCorner(2, 2) = SC;
  m.ss.C.topRightCorner(2, 2) = -cw * SDG;
  m.ss.C.bottomLeftCorner(2, 2) = SC;
  m.ss.C.bottomRightCorner(2, 2) = -cw * SDG;

  m.ss.D.setZero(4, 4);
  m.ss.D.topLeftCorner(2, 2) = SDG;
  m.ss.D.topRightCorner(2, 2) = -dw * SDG;
  m.ss.D.bottomLeftCorner(2, 2) = -S;
  m.ss.D.bottomRightCorner(2, 2) = -dw * SDG;

  m.structure.blocks = {{BlockKind::ConeNonlinear, 2, ScalingClass::Full},
                        {BlockKind::Lti, 2, ScalingClass::ScalarIdentity}};
  return m;
}

// ---------------------------------------------------------------------------
// Cone-bounded nonlinearity LMI
// ---------------------------------------------------------------------------

/// The block matrix whose negative semidefiniteness certifies the cone
/// condition:
///   [ A^T Q + Q A        Q B - C^T W              ]
///   [ B^T Q - W C        delta I - 2W - WD - D^T W ]
inline Eigen::MatrixXd cone_lmi_matrix(const StateSpaceModel& m11, const Eigen::MatrixXd& Q,
                                       const Eigen::MatrixXd& W, double delta) {
  const int n = m11.states();
  const int c = m11.inputs();
  Eigen::MatrixXd F(n + c, n + c);
  F.topLeftCorner(n, n) = m11.A.transpose() * Q + Q * m11.A;
  F.topRightCorner(n, c) = Q * m11.B - m11.C.transpose() * W;
  F.bottomLeftCorner(c, n) = m11.B.transpose() * Q - W * m11.C;
  F.bottomRightCorner(c, c) = delta * Eigen::MatrixXd::Identity(c, c) - 2.0 * W -
                              W * m11.D - m11.D.transpose() * W;
  return F;
}

namespace detail {

/// Symmetric basis matrices spanning the admissible scaling class.
inline std::vector<Eigen::MatrixXd> scaling_basis(const DeltaStructure& structure) {
  const int c = structure.channels();
  std::vector<Eigen::MatrixXd> basis;
  int offset = 0;
  for (const auto& block : structure.blocks) {
    auto add = [&](int i, int j) {
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(c, c);
      e(offset + i, offset + j) = 1.0;
      e(offset + j, offset + i) = 1.0;
      basis.push_back(e);
    };
    switch (block.scaling) {
      case ScalingClass::Full:
        for (int i = 0; i < block.size; ++i)
          for (int j = i; j < block.size; ++j) add(i, j);
        break;
      case ScalingClass::Diagonal:
        for (int i = 0; i < block.size; ++i) add(i, i);
        break;
      case ScalingClass::ScalarIdentity: {
        Eigen::MatrixXd e = Eigen::MatrixXd::Zero(c, c);
        e.block(offset, offset, block.size, block.size).setIdentity();
        basis.push_back(e);
        break;
      }
    }
    offset += block.size;
  }
  return basis;
}

inline Eigen::MatrixXd scaling_from_params(const std::vector<Eigen::MatrixXd>& basis,
                                           const Eigen::VectorXd& params) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(basis.front().rows(), basis.front().cols());
  for (int i = 0; i < params.size(); ++i) W += params(i) * basis[static_cast<size_t>(i)];
  return W;
}

/// Coefficients reproducing W = I in the given basis: weight one on every
/// diagonal-carrying element, zero elsewhere.
inline Eigen::VectorXd identity_params(const std::vector<Eigen::MatrixXd>& basis) {
  Eigen::VectorXd p(static_cast<int>(basis.size()));
  for (size_t i = 0; i < basis.size(); ++i)
    p(static_cast<int>(i)) = basis[i].trace() > 0.5 ? 1.0 : 0.0;
  Eigen::MatrixXd w = scaling_from_params(basis, p);
  if ((w - Eigen::MatrixXd::Identity(w.rows(), w.cols())).norm() > 1e-12)
    throw std::logic_error("identity_params: basis cannot represent the identity");
  return p;
}

/// Solves A^T Q + Q A = -I for the unique symmetric Q of a Hurwitz A.
inline Eigen::MatrixXd lyapunov_gramian(const Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n * n, n * n);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  // vec(A^T Q + Q A) = (I (x) A^T + A^T (x) I) vec(Q)
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          K(i + n * j, k + n * l) +=
              I(j, l) * A.transpose()(i, k) + A.transpose()(j, l) * I(i, k);
        }
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(
      Eigen::MatrixXd(-Eigen::MatrixXd::Identity(n, n)).data(), n * n);
  Eigen::VectorXd q = K.fullPivLu().solve(rhs);
  Eigen::MatrixXd Q = Eigen::Map<Eigen::MatrixXd>(q.data(), n, n);
  return 0.5 * (Q + Q.transpose());
}

struct LmiParams {
  Eigen::MatrixXd Q;
  Eigen::VectorXd w;
  double delta;
};

}  // namespace detail

/// Searches symmetric Q > 0, a structured scaling W, and delta > 0 making
/// the cone LMI negative semidefinite. The search runs a projected
/// subgradient descent on a softmax-smoothed largest eigenvalue of the
/// block matrix, multi-started from Lyapunov-based and randomized
/// initializations. Every candidate is re-checked by assembling the block
/// matrix and inspecting its spectrum before the feasible flag is set;
/// non-convergence reports an infeasible certificate with diagnostics
/// rather than a silent pass.
inline LmiCertificate solve_cone_lmi(const StateSpaceModel& m11, const DeltaStructure& structure,
                                     double eps = 1e-9) {
  m11.validate();
  const int n = m11.states();
  const int c = m11.inputs();
  if (m11.outputs() != c || structure.channels() != c)
    throw std::invalid_argument("solve_cone_lmi: channel dimensions do not match the structure");
  if (!is_hurwitz(m11.A))
    throw std::invalid_argument("solve_cone_lmi: M11 must be stable before running the cone test");

  const auto basis = detail::scaling_basis(structure);
  const int nw = static_cast<int>(basis.size());
  const double q_floor = 1e-8;
  const double delta_floor = 1e-8;

  auto project = [&](detail::LmiParams& p) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (p.Q + p.Q.transpose()));
    Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(q_floor);
    p.Q = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    p.delta = std::max(p.delta, delta_floor);
  };

  auto residual_of = [&](const detail::LmiParams& p) {
    Eigen::MatrixXd F =
        cone_lmi_matrix(m11, p.Q, detail::scaling_from_params(basis, p.w), p.delta);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (F + F.transpose()),
                                                      Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
  };

  std::vector<detail::LmiParams> starts;
  {
    detail::LmiParams p;
    p.Q = detail::lyapunov_gramian(m11.A);
    p.w = detail::identity_params(basis);
    p.delta = 0.1;
    starts.push_back(p);
    p.Q = Eigen::MatrixXd::Identity(n, n);
    starts.push_back(p);
    std::mt19937 rng(20240416u);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int s = 0; s < 3; ++s) {
      detail::LmiParams r;
      Eigen::MatrixXd G(n, n);
      for (int i = 0; i < n * n; ++i) G(i / n, i % n) = gauss(rng);
      r.Q = G * G.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
      r.w = detail::identity_params(basis);
      for (int i = 0; i < nw; ++i) r.w(i) += 0.3 * gauss(rng);
      r.delta = 0.1;
      starts.push_back(r);
    }
  }

  detail::LmiParams best = starts.front();
  project(best);
  double best_residual = residual_of(best);
  int best_start = 0;

  const int iters = 2500;
  for (size_t s = 0; s < starts.size(); ++s) {
    detail::LmiParams p = starts[s];
    project(p);
    double step_scale = std::max(1.0, p.Q.norm());
    for (int k = 1; k <= iters; ++k) {
      Eigen::MatrixXd W = detail::scaling_from_params(basis, p.w);
      Eigen::MatrixXd F = cone_lmi_matrix(m11, p.Q, W, p.delta);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (F + F.transpose()));
      const Eigen::VectorXd lam = es.eigenvalues();
      const double lmax = lam.maxCoeff();
      if (lmax < best_residual) {
        best_residual = lmax;
        best = p;
        best_start = static_cast<int>(s);
      }
      // Softmax weights over the spectrum; sharpen as iterations progress.
      const double temp = 50.0 + 450.0 * (static_cast<double>(k) / iters);
      Eigen::VectorXd weights = ((lam.array() - lmax) * temp).exp();
      weights /= weights.sum();

      // Gradient of sum_i weights_i * v_i^T F(theta) v_i in each parameter.
      Eigen::MatrixXd QG = Eigen::MatrixXd::Zero(n, n);
      Eigen::VectorXd wG = Eigen::VectorXd::Zero(nw);
      double dG = 0.0;
      for (int i = 0; i < lam.size(); ++i) {
        if (weights(i) < 1e-12) continue;
        const Eigen::VectorXd v = es.eigenvectors().col(i);
        const Eigen::VectorXd v1 = v.head(n);
        const Eigen::VectorXd v2 = v.tail(c);
        const Eigen::VectorXd z = m11.A * v1 + m11.B * v2;
        QG += weights(i) * (v1 * z.transpose() + z * v1.transpose());
        const Eigen::VectorXd y = m11.C * v1 + v2 + m11.D * v2;
        for (int b = 0; b < nw; ++b)
          wG(b) += weights(i) * (-2.0) * v2.dot(basis[static_cast<size_t>(b)] * y);
        dG += weights(i) * v2.squaredNorm();
      }
      const double gnorm =
          std::sqrt(QG.squaredNorm() + wG.squaredNorm() + dG * dG) + 1e-15;
      const double eta = step_scale / (std::sqrt(static_cast<double>(k)) * gnorm);
      p.Q -= eta * QG;
      p.w -= eta * wG;
      p.delta -= eta * dG;
      project(p);
    }
    const double r = residual_of(p);
    if (r < best_residual) {
      best_residual = r;
      best = p;
      best_start = static_cast<int>(s);
    }
    if (best_residual < -10.0 * eps) break;  // comfortably feasible already
  }

  LmiCertificate cert;
  cert.Q = best.Q;
  cert.W = detail::scaling_from_params(basis, best.w);
  cert.delta = best.delta;
  cert.residual = best_residual;

  // Plug-back acceptance: recompute the spectrum from the assembled block
  // matrix and re-check the side constraints; only then claim feasibility.
  Eigen::MatrixXd F = cone_lmi_matrix(m11, cert.Q, cert.W, cert.delta);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(0.5 * (F + F.transpose()),
                                                       Eigen::EigenvaluesOnly);
  const double plugged = check.eigenvalues().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qcheck(cert.Q, Eigen::EigenvaluesOnly);
  const double qmin = qcheck.eigenvalues().minCoeff();
  Eigen::JacobiSVD<Eigen::MatrixXd> wsvd(cert.W);
  const double wcond = wsvd.singularValues()(0) / wsvd.singularValues()(c - 1);
  cert.feasible = plugged <= eps && qmin >= 1e-9 && cert.delta >= 1e-9 &&
                  std::isfinite(wcond) && wcond < 1e12;

  std::ostringstream diag;
  diag << "residual=" << best_residual << " plug_back=" << plugged << " q_min=" << qmin
       << " delta=" << cert.delta << " w_cond=" << wcond << " start=" << best_start;
  if (!cert.feasible) diag << " (no negative semidefinite certificate found)";
  cert.diagnostics = diag.str();
  cert.residual = plugged;
  return cert;
}

namespace detail {

/// Nelder-Mead on a small parameter vector. Returns the best point found.
inline Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                   Eigen::VectorXd x0, double spread, int max_evals) {
  const int dim = static_cast<int>(x0.size());
  std::vector<std::pair<double, Eigen::VectorXd>> simplex;
  simplex.reserve(static_cast<size_t>(dim) + 1);
  simplex.emplace_back(f(x0), x0);
  for (int i = 0; i < dim; ++i) {
    Eigen::VectorXd xi = x0;
    xi(i) += spread * std::max(1.0, std::abs(x0(i)));
    simplex.emplace_back(f(xi), xi);
  }
  int evals = dim + 1;
  auto by_value = [](const auto& a, const auto& b) { return a.first < b.first; };
  while (evals < max_evals) {
    std::sort(simplex.begin(), simplex.end(), by_value);
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < dim; ++i) centroid += simplex[static_cast<size_t>(i)].second;
    centroid /= dim;
    const auto& worst = simplex.back();
    Eigen::VectorXd xr = centroid + (centroid - worst.second);
    double fr = f(xr);
    ++evals;
    if (fr < simplex.front().first) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - worst.second);
      double fe = f(xe);
      ++evals;
      simplex.back() = fe < fr ? std::make_pair(fe, xe) : std::make_pair(fr, xr);
    } else if (fr < simplex[simplex.size() - 2].first) {
      simplex.back() = {fr, xr};
    } else {
      Eigen::VectorXd xc = centroid + 0.5 * (worst.second - centroid);
      double fc = f(xc);
      ++evals;
      if (fc < worst.first) {
        simplex.back() = {fc, xc};
      } else {
        for (size_t i = 1; i < simplex.size(); ++i) {
          simplex[i].second = simplex.front().second +
                              0.5 * (simplex[i].second - simplex.front().second);
          simplex[i].first = f(simplex[i].second);
          ++evals;
        }
      }
    }
  }
  std::sort(simplex.begin(), simplex.end(), by_value);
  return simplex.front().second;
}

}  // namespace detail

/// The scaled small-gain value ||W M11 W^-1||_inf, locally refined over
/// the structured scaling class starting from both the supplied W and the
/// identity. The refinement can only improve on those two anchors.
inline double compute_beta(const StateSpaceModel& m11, const Eigen::MatrixXd& W,
                           const DeltaStructure& structure, double tol = 1e-6) {
  m11.validate();
  if (m11.inputs() != m11.outputs())
    throw std::invalid_argument("compute_beta: M11 must be square");
  if (!is_hurwitz(m11.A)) throw std::invalid_argument("compute_beta: M11 must be stable");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(W);
  if (!lu.isInvertible()) throw std::invalid_argument("compute_beta: W is singular");

  const auto basis = detail::scaling_basis(structure);
  auto evaluate = [&](const Eigen::VectorXd& params) {
    Eigen::MatrixXd cand = detail::scaling_from_params(basis, params);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cand);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (!(smin > 1e-8 * svd.singularValues()(0)))
      return std::numeric_limits<double>::infinity();
    return hinf_norm(similarity_scale(m11, cand), tol);
  };

  // Project the supplied W onto the basis coefficients (exact when W is a
  // structured symmetric scaling, least squares otherwise).
  Eigen::VectorXd w_coeff(static_cast<int>(basis.size()));
  for (size_t i = 0; i < basis.size(); ++i)
    w_coeff(static_cast<int>(i)) =
        (W.cwiseProduct(basis[i])).sum() / basis[i].squaredNorm();

  double best = hinf_norm(similarity_scale(m11, W), tol);
  Eigen::VectorXd id = detail::identity_params(basis);
  best = std::min(best, evaluate(id));

  for (const Eigen::VectorXd& start : {w_coeff, id}) {
    Eigen::VectorXd refined = detail::nelder_mead(evaluate, start, 0.25, 160);
    best = std::min(best, evaluate(refined));
  }
  return best;
}

/// Runs both conditions of the stability test: M stable, and a scaled
/// small-gain value below one found through the LMI scaling and local
/// refinement.
inline RobustnessReport verify_robust_stability(const ConditionedController& cc,
                                                const StaticGain& g, const PiGains& gains,
                                                bool with_dynamics,
                                                const UncertaintyWeight& w = {}) {
  InterconnectionM m = with_dynamics ? build_m_mixed(cc, g, w) : build_m_sat(cc, g);
  RobustnessReport report;
  report.gains = gains;
  report.with_dynamics = with_dynamics;
  report.m_stable = is_hurwitz(m.ss.A);
  if (!report.m_stable) {
    report.beta = std::numeric_limits<double>::infinity();
    report.robustly_stable = false;
    report.certificate.diagnostics = "M is unstable; cone test not attempted";
    return report;
  }
  report.certificate = solve_cone_lmi(m.ss, m.structure);
  Eigen::MatrixXd W0 = report.certificate.W;
  Eigen::JacobiSVD<Eigen::MatrixXd> wsvd(W0);
  const bool usable = wsvd.singularValues()(0) > 0.0 &&
                      wsvd.singularValues()(wsvd.singularValues().size() - 1) >
                          1e-10 * wsvd.singularValues()(0);
  if (!usable) W0 = Eigen::MatrixXd::Identity(m.ss.inputs(), m.ss.inputs());
  report.beta = compute_beta(m.ss, W0, m.structure);
  report.robustly_stable = report.m_stable && report.beta < 1.0;
  return report;
}

/// Largest proportional gain that still passes the robustness test.
/// Scans upward in steps of `grid` from `grid` to `kp_max`, then bisects
/// the step where the verdict flips from pass to fail. Monotonicity is
/// not assumed: the scan returns the last passing gain below the first
/// failure that follows a pass. If no scanned gain passes, throws.
inline double max_stable_gain(double ki, bool with_dynamics, const UncertaintyWeight& w,
                              const StaticGain& g, double grid, double kp_max = 10.0) {
  if (!(grid > 0.0)) throw std::invalid_argument("max_stable_gain: grid step must be positive");
  if (!(kp_max >= grid)) throw std::invalid_argument("max_stable_gain: empty scan range");

  auto passes = [&](double kp) {
    PiGains gains{kp, ki};
    NominalController nc = build_nominal_controller(svd_2x2(g), gains);
    ConditionedController cc = hanus_condition(nc);
    return verify_robust_stability(cc, g, gains, with_dynamics, w).robustly_stable;
  };

  double last_pass = std::numeric_limits<double>::quiet_NaN();
  double first_fail = std::numeric_limits<double>::quiet_NaN();
  for (double kp = grid; kp <= kp_max + 0.5 * grid; kp += grid) {
    if (passes(kp)) {
      last_pass = kp;
    } else if (!std::isnan(last_pass)) {
      first_fail = kp;
      break;
    }
  }
  if (std::isnan(last_pass))
    throw std::domain_error("max_stable_gain: no robustly stable gain on the scanned grid");
  if (std::isnan(first_fail)) return last_pass;  // never flipped below kp_max

  double lo = last_pass, hi = first_fail;
  for (int i = 0; i < 12; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (passes(mid))
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace limbctl
