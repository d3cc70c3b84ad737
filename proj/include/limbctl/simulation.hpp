#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "limbctl/anti_windup.hpp"
#include "limbctl/limb_model.hpp"
#include "limbctl/state_space.hpp"

namespace limbctl {

/// Simulation stand-in for the physical limb: the static gain, an
/// optional first-order actuator lag with unit DC gain, and an optional
/// multiplicative input mismatch w_dyn(s) * Delta(s) with a randomly
/// sampled stable Delta normalized to unit peak gain.
struct TruthPlant {
  StaticGain gain;
  std::optional<double> lag_time_constant;
  std::optional<StateSpaceModel> mismatch;  // continuous series w_dyn * Delta
};

struct TruthPlantOptions {
  std::optional<double> lag_time_constant;
  std::optional<unsigned> mismatch_seed;
  UncertaintyWeight weight;
};

struct TrajectorySample {
  double t;
  double pitch;
  double yaw;
};

/// Reference trajectory resampled on the simulation grid.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  double duration = 0.0;
  double dt = 0.0;
};

enum class TrajectoryKind { Step, HoldSequence };

struct SimRow {
  double t;
  double r_pitch, r_yaw;
  double y_pitch, y_yaw;
  double u1_c, u2_c;
  double u1_a, u2_a;
  double x1, x2;
};

struct SimTrace {
  std::vector<SimRow> rows;
  double dt = 0.0;
};

/// Raised when the closed loop diverges; carries whatever was simulated
/// up to the blow-up so the caller can inspect it.
class SimulationDiverged : public std::runtime_error {
 public:
  SimulationDiverged(std::string what, SimTrace partial)
      : std::runtime_error(std::move(what)), partial_trace(std::move(partial)) {}
  SimTrace partial_trace;
};

inline TruthPlant build_truth_plant(const StaticGain& g, const TruthPlantOptions& options = {}) {
  if (options.lag_time_constant && !(*options.lag_time_constant > 0.0))
    throw std::domain_error("build_truth_plant: lag time constant must be positive");
  TruthPlant plant;
  plant.gain = g;
  plant.lag_time_constant = options.lag_time_constant;
  if (options.mismatch_seed) {
    options.weight.validate();
    std::mt19937 rng(*options.mismatch_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    // Random stable two-state channel coupling, then peak gain forced to one.
    StateSpaceModel delta;
    delta.A.resize(2, 2);
    delta.B.resize(2, 2);
    delta.C.resize(2, 2);
    delta.D.resize(2, 2);
    for (int i = 0; i < 4; ++i) delta.A(i / 2, i % 2) = gauss(rng);
    Eigen::EigenSolver<Eigen::MatrixXd> es(delta.A, false);
    const double shift = es.eigenvalues().real().maxCoeff();
    delta.A -= (shift + 0.5 + std::abs(shift)) * Eigen::MatrixXd::Identity(2, 2);
    for (int i = 0; i < 4; ++i) delta.B(i / 2, i % 2) = gauss(rng);
    for (int i = 0; i < 4; ++i) delta.C(i / 2, i % 2) = gauss(rng);
    for (int i = 0; i < 4; ++i) delta.D(i / 2, i % 2) = 0.2 * gauss(rng);
    const double peak = hinf_norm(delta, 1e-8);
    delta.C /= peak;
    delta.D /= peak;

    // Series connection: weight channel follows the sampled block.
    const StateSpaceModel w = realize_weight(options.weight);
    const double aw = w.A(0, 0), bw = w.B(0, 0), cw = w.C(0, 0), dw = w.D(0, 0);
    const Eigen::Matrix2d I2 = Eigen::Matrix2d::Identity();
    StateSpaceModel chain;
    chain.A.setZero(4, 4);
    chain.A.topLeftCorner(2, 2) = delta.A;
    chain.A.bottomLeftCorner(2, 2) = bw * delta.C;
    chain.A.bottomRightCorner(2, 2) = aw * I2;
    chain.B.setZero(4, 2);
    chain.B.topRows(2) = delta.B;
    chain.B.bottomRows(2) = bw * delta.D;
    chain.C.setZero(2, 4);
    chain.C.leftCols(2) = dw * delta.C;
    chain.C.rightCols(2) = cw * I2;
    chain.D = dw * delta.D;
    plant.mismatch = chain;
  }
  return plant;
}

inline Trajectory make_trajectory(TrajectoryKind kind, double amplitude, double duration,
                                  double dt) {
  if (!(duration > dt) || !(dt > 0.0))
    throw std::domain_error("make_trajectory: requires duration > dt > 0");
  Trajectory traj;
  traj.duration = duration;
  traj.dt = dt;
  const int n = static_cast<int>(std::llround(duration / dt));
  traj.samples.reserve(static_cast<size_t>(n));
  if (kind == TrajectoryKind::Step) {
    for (int k = 0; k < n; ++k)
      traj.samples.push_back({k * dt, amplitude, amplitude});
    return traj;
  }
  // Piecewise-linear loop through five corners, scaled in time to the
  // requested duration; the shape itself never changes.
  const std::vector<std::pair<double, double>> corners = {
      {0.0, 0.0},       {amplitude, 0.0}, {amplitude, amplitude},
      {0.0, amplitude}, {-amplitude, 0.0}, {0.0, 0.0}};
  const double segment = duration / static_cast<double>(corners.size() - 1);
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    size_t idx = std::min(static_cast<size_t>(t / segment), corners.size() - 2);
    const double frac = (t - idx * segment) / segment;
    const double pitch =
        corners[idx].first + frac * (corners[idx + 1].first - corners[idx].first);
    const double yaw =
        corners[idx].second + frac * (corners[idx + 1].second - corners[idx].second);
    traj.samples.push_back({t, pitch, yaw});
  }
  return traj;
}

/// Waypoint file: one `t,pitch_deg,yaw_deg` row per line, strictly
/// increasing times, optional header. Resampled on the dt grid by linear
/// interpolation; the reference holds its last value past the final row.
inline Trajectory load_waypoint_trajectory(const std::string& path, double dt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("trajectory file not readable: " + path);
  std::vector<TrajectorySample> points;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.find_first_not_of("0123456789+-.eE, \t\r") != std::string::npos)
      continue;  // header row
    std::istringstream row(line);
    double t, pitch_deg, yaw_deg;
    char c1, c2;
    if (!(row >> t >> c1 >> pitch_deg >> c2 >> yaw_deg) || c1 != ',' || c2 != ',')
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed waypoint row, expected t,pitch_deg,yaw_deg");
    if (!points.empty() && !(t > points.back().t))
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": waypoint times must be strictly increasing");
    points.push_back({t, pitch_deg * M_PI / 180.0, yaw_deg * M_PI / 180.0});
  }
  if (points.size() < 2)
    throw std::runtime_error(path + ": need at least two waypoints");
  Trajectory traj;
  traj.duration = points.back().t;
  traj.dt = dt;
  if (!(traj.duration > dt)) throw std::domain_error("waypoint span must exceed dt");
  const int n = static_cast<int>(std::llround(traj.duration / dt));
  size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    while (seg + 2 < points.size() && t >= points[seg + 1].t) ++seg;
    const auto& a = points[seg];
    const auto& b = points[seg + 1];
    const double frac = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
    traj.samples.push_back(
        {t, a.pitch + frac * (b.pitch - a.pitch), a.yaw + frac * (b.yaw - a.yaw)});
  }
  return traj;
}

/// Fixed-step closed-loop run. Within a sample the measured output comes
/// from the held input of the previous sample (through the lag state when
/// a lag is configured), so the loop has the one-sample computation delay
/// of the real controller. Deterministic for a fixed plant and options.
inline SimTrace run_closed_loop(ConditionedController cc, const TruthPlant& plant,
                                const Trajectory& traj, double dt,
                                const StepOptions& options = {}) {
  if (!(dt > 0.0)) throw std::invalid_argument("run_closed_loop: dt must be positive");
  if (!(dt <= traj.duration / 100.0))
    throw std::invalid_argument("run_closed_loop: dt must be at most duration/100");
  if (traj.dt != dt)
    throw std::invalid_argument("run_closed_loop: trajectory was sampled with a different dt");

  cc.prepare(dt);
  ControllerState state;
  Eigen::Vector2d prev_u = Eigen::Vector2d::Zero();
  Eigen::Vector2d lag_state = Eigen::Vector2d::Zero();
  const bool has_lag = plant.lag_time_constant.has_value();
  const double lag_alpha = has_lag ? std::exp(-dt / *plant.lag_time_constant) : 0.0;

  StateSpaceModel mis;
  Eigen::VectorXd mis_state;
  const bool has_mismatch = plant.mismatch.has_value();
  if (has_mismatch) {
    mis = discretize(*plant.mismatch, dt);
    mis_state = Eigen::VectorXd::Zero(mis.states());
  }

  SimTrace trace;
  trace.dt = dt;
  trace.rows.reserve(traj.samples.size());
  for (const TrajectorySample& ref : traj.samples) {
    const Eigen::Vector2d u_held = has_lag ? lag_state : prev_u;
    Eigen::Vector2d disturbance = Eigen::Vector2d::Zero();
    if (has_mismatch) disturbance = mis.C * mis_state + mis.D * u_held;
    const Eigen::Vector2d y = plant.gain.matrix * (u_held + disturbance);
    if (y.cwiseAbs().maxCoeff() > 1e3)
      throw SimulationDiverged("run_closed_loop: output diverged at t=" + std::to_string(ref.t),
                               std::move(trace));
    const Eigen::Vector2d r(ref.pitch, ref.yaw);
    const Eigen::Vector2d e = r - y;
    StepResult step = controller_step(cc, state, e, dt, options);
    trace.rows.push_back({ref.t, r(0), r(1), y(0), y(1), step.u_commanded(0),
                          step.u_commanded(1), step.u_applied(0), step.u_applied(1), state.x(0),
                          state.x(1)});
    if (has_mismatch) mis_state = mis.A * mis_state + mis.B * u_held;
    if (has_lag) lag_state = lag_alpha * lag_state + (1.0 - lag_alpha) * step.u_applied;
    prev_u = step.u_applied;
    state = step.state;
  }
  return trace;
}

struct TrackingError {
  double yaw_mae_deg = 0.0;
  double pitch_mae_deg = 0.0;
};

/// Mean absolute error per axis over t >= skip, in degrees.
inline TrackingError tracking_errors(const SimTrace& trace, double skip) {
  double pitch_sum = 0.0, yaw_sum = 0.0;
  long count = 0;
  for (const SimRow& row : trace.rows) {
    if (row.t < skip) continue;
    pitch_sum += std::abs(row.r_pitch - row.y_pitch);
    yaw_sum += std::abs(row.r_yaw - row.y_yaw);
    ++count;
  }
  if (count == 0) throw std::domain_error("tracking_errors: no samples past the skip window");
  const double to_deg = 180.0 / M_PI;
  return {yaw_sum / count * to_deg, pitch_sum / count * to_deg};
}

/// CSV with a fixed header and nine-digit scientific notation so that
/// identical runs produce byte-identical files.
inline void write_csv(const SimTrace& trace, std::ostream& out) {
  out << "t,r_pitch,r_yaw,y_pitch,y_yaw,u1_c,u2_c,u1_a,u2_a,x1,x2\n";
  char buf[64];
  for (const SimRow& row : trace.rows) {
    const double values[] = {row.t,   row.r_pitch, row.r_yaw, row.y_pitch, row.y_yaw, row.u1_c,
                             row.u2_c, row.u1_a,    row.u2_a,  row.x1,      row.x2};
    for (int i = 0; i < 11; ++i) {
      std::snprintf(buf, sizeof(buf), "%.9e", values[i]);
      out << buf << (i == 10 ? '\n' : ',');
    }
  }
}

}  // namespace limbctl
