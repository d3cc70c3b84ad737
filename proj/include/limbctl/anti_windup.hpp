#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "limbctl/state_space.hpp"
#include "limbctl/svd_controller.hpp"

namespace limbctl {

/// Integrator-channel states of the running controller.
struct ControllerState {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
};

/// Per-step behaviour switches, exposed on the command line as
/// --no-antiwindup and --no-direction-scaling.
struct StepOptions {
  bool antiwindup = true;
  bool direction_scaling = true;
};

/// Nominal controller augmented with the conditioning gain H = B D^-1.
/// Feeding the applied input back through H cancels the error path into
/// the states exactly (B - H D = 0), so saturation cannot wind up the
/// integrators. For the SVD-PI family H = (ki/kp) V^T and A - H C = -ki I.
///
/// Immutable after construction; prepare() caches the zero-order-hold
/// update for one sample time, so each simulation loop should own its
/// copy when stepping.
struct ConditionedController {
  NominalController nominal;
  Eigen::Matrix2d H;

  struct DiscreteUpdate {
    double dt = -1.0;
    Eigen::Matrix2d cond_A;  // state transition of (A - H C)
    Eigen::Matrix2d cond_B;  // ZOH input map of H driven by u_applied
  };
  DiscreteUpdate cache;

  void prepare(double dt);
};

inline ConditionedController hanus_condition(const NominalController& nc) {
  Eigen::Matrix2d D = nc.ss.D;
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(D);
  const double cond = svd.singularValues()(0) / svd.singularValues()(1);
  if (!std::isfinite(cond) || cond >= 1e9)
    throw std::domain_error("hanus_condition: D is ill-conditioned, conditioning gain undefined");
  ConditionedController cc;
  cc.nominal = nc;
  cc.H = nc.ss.B * D.inverse();
  return cc;
}

namespace detail {

inline ConditionedController::DiscreteUpdate conditioned_zoh(const ConditionedController& cc,
                                                             double dt) {
  StateSpaceModel cond;
  cond.A = cc.nominal.ss.A - cc.H * cc.nominal.ss.C;
  cond.B = cc.H;
  cond.C = Eigen::MatrixXd::Identity(2, 2);
  cond.D = Eigen::MatrixXd::Zero(2, 2);
  StateSpaceModel d = discretize(cond, dt);
  ConditionedController::DiscreteUpdate u;
  u.dt = dt;
  u.cond_A = d.A;
  u.cond_B = d.B;
  return u;
}

}  // namespace detail

inline void ConditionedController::prepare(double dt) {
  if (cache.dt != dt) cache = detail::conditioned_zoh(*this, dt);
}

/// Component-wise clamp to the unit actuator box.
inline Eigen::Vector2d saturate(const Eigen::Vector2d& u) {
  if (!u.allFinite()) throw std::invalid_argument("saturate: input must be finite");
  return u.cwiseMax(-1.0).cwiseMin(1.0);
}

/// Direction-preserving scaling: shrink the whole vector by its largest
/// component instead of letting the clamp rotate it.
inline Eigen::Vector2d preserve_direction(const Eigen::Vector2d& u) {
  if (!u.allFinite()) throw std::invalid_argument("preserve_direction: input must be finite");
  const double peak = u.cwiseAbs().maxCoeff();
  return peak <= 1.0 ? u : Eigen::Vector2d(u / peak);
}

struct StepResult {
  Eigen::Vector2d u_commanded;
  Eigen::Vector2d u_applied;
  ControllerState state;
};

/// One controller sample: emit u_c from the current state, shape it with
/// the direction scaling and the clamp, then advance the state. With
/// anti-windup on, the state update is the exact ZOH of the conditioned
/// dynamics driven by the same-sample applied input; with it off, the
/// plain integrator update x+ = x + dt B e.
inline StepResult controller_step(const ConditionedController& cc, const ControllerState& state,
                                  const Eigen::Vector2d& error, double dt,
                                  const StepOptions& options = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("controller_step: dt must be positive");
  StepResult r;
  r.u_commanded = cc.nominal.ss.C * state.x + cc.nominal.ss.D * error;
  const Eigen::Vector2d shaped =
      options.direction_scaling ? preserve_direction(r.u_commanded) : r.u_commanded;
  r.u_applied = saturate(shaped);
  if (options.antiwindup) {
    const ConditionedController::DiscreteUpdate& d =
        cc.cache.dt == dt ? cc.cache : detail::conditioned_zoh(cc, dt);
    r.state.x = d.cond_A * state.x + d.cond_B * r.u_applied;
  } else {
    r.state.x = state.x + dt * (cc.nominal.ss.B * error);
  }
  return r;
}

}  // namespace limbctl
