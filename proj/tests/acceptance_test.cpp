// Acceptance suite: one pass/fail line per criterion, nonzero exit when
// any criterion fails. Each check pins its tolerance in code; reference
// values from the original hardware study are printed for comparison
// where the criterion calls for it.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "limbctl/config.hpp"
#include "limbctl/limb_model.hpp"
#include "limbctl/robustness.hpp"
#include "limbctl/simulation.hpp"
#include "support/oracles.hpp"

using namespace limbctl;

namespace {

struct Outcome {
  bool pass = true;
  std::string details;
};

int failures = 0;

void run(int id, const std::string& name, const std::function<Outcome()>& body) {
  Outcome outcome;
  const auto start = std::chrono::steady_clock::now();
  try {
    outcome = body();
  } catch (const std::exception& e) {
    outcome.pass = false;
    outcome.details += std::string(outcome.details.empty() ? "" : "; ") + "exception: " + e.what();
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!outcome.pass) ++failures;
  std::printf("[%2d] %s  %-52s (%.2fs)%s%s\n", id, outcome.pass ? "PASS" : "FAIL", name.c_str(),
              elapsed, outcome.details.empty() ? "" : "  -- ", outcome.details.c_str());
  std::fflush(stdout);
}

void expect(Outcome& o, bool condition, const std::string& message) {
  if (!condition) {
    o.pass = false;
    if (!o.details.empty()) o.details += "; ";
    o.details += message;
  }
}

void note(Outcome& o, const std::string& message) {
  if (!o.details.empty()) o.details += "; ";
  o.details += message;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void expect_runtime(Outcome& o, std::chrono::steady_clock::time_point start, double limit_s) {
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  expect(o, elapsed < limit_s,
         "runtime " + fmt(elapsed) + "s exceeded the " + fmt(limit_s) + "s budget");
}

const UncertaintyWeight kWeight{0.1, 1.5, 0.1};
constexpr double kDt = 1e-3;

StaticGain default_gain() { return static_gain_matrix(LimbParams{}); }

ConditionedController make_cc(const StaticGain& g, double kp, double ki) {
  return hanus_condition(build_nominal_controller(svd_2x2(g), PiGains{kp, ki}));
}

bool signed_permutation(const Eigen::Matrix2d& u) {
  int ones = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double a = std::abs(u(i, j));
      if (std::abs(a - 1.0) < 1e-9) ++ones;
      else if (a > 1e-9) return false;
    }
  return ones == 2;
}

Eigen::MatrixXd plug_back(const StateSpaceModel& m, const Eigen::MatrixXd& Q,
                          const Eigen::MatrixXd& W, double delta) {
  const int n = m.states(), c = m.inputs();
  Eigen::MatrixXd F(n + c, n + c);
  F.block(0, 0, n, n) = m.A.transpose() * Q + Q * m.A;
  F.block(0, n, n, c) = Q * m.B - m.C.transpose() * W;
  F.block(n, 0, c, n) = m.B.transpose() * Q - W * m.C;
  F.block(n, n, c, c) =
      delta * Eigen::MatrixXd::Identity(c, c) - 2.0 * W - W * m.D - m.D.transpose() * W;
  return F;
}

double max_eig(const Eigen::MatrixXd& F) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (F + F.transpose()),
                                                        Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

struct StepStats {
  double iae = 0.0;
  double overshoot = -1e9;
  double final_err_deg = 0.0;
};

StepStats step_stats(const SimTrace& trace) {
  StepStats s;
  for (const auto& r : trace.rows) {
    s.iae += (std::abs(r.r_pitch - r.y_pitch) + std::abs(r.r_yaw - r.y_yaw)) * trace.dt;
    s.overshoot = std::max({s.overshoot, r.y_pitch - r.r_pitch, r.y_yaw - r.r_yaw});
  }
  const auto& last = trace.rows.back();
  s.final_err_deg = std::max(std::abs(last.r_pitch - last.y_pitch),
                             std::abs(last.r_yaw - last.y_yaw)) *
                    180.0 / M_PI;
  return s;
}

// --------------------------------------------------------------------------

Outcome c01_svd() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(101u);
  double worst_recon = 0.0, worst_decouple = 0.0;
  bool all_perm = true;
  for (int i = 0; i < 1000; ++i) {
    StaticGain g = oracles::random_structured_gain(rng);
    SvdFactors f = svd_2x2(g);
    worst_recon = std::max(worst_recon, (f.U * f.Sigma * f.V.transpose() - g.matrix).norm());
    worst_decouple = std::max(
        worst_decouple,
        (dc_decoupling_matrix(f, g) - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff());
    all_perm = all_perm && signed_permutation(f.U);
  }
  expect(o, worst_recon <= 1e-9, "reconstruction error " + fmt(worst_recon));
  expect(o, worst_decouple <= 1e-9, "decoupling error " + fmt(worst_decouple));
  expect(o, all_perm, "U was not a signed permutation for some gain");
  expect_runtime(o, start, 5.0);
  note(o, "1000 gains, recon<=" + fmt(worst_recon) + ", decouple<=" + fmt(worst_decouple));
  return o;
}

Outcome c02_hanus() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(102u);
  std::uniform_real_distribution<double> gain(0.2, 4.0);
  double worst_bhd = 0.0, worst_h = 0.0, worst_ahc = 0.0;
  for (int i = 0; i < 100; ++i) {
    StaticGain g = oracles::random_structured_gain(rng);
    PiGains gains{gain(rng), gain(rng)};
    NominalController nc = build_nominal_controller(svd_2x2(g), gains);
    ConditionedController cc = hanus_condition(nc);
    worst_bhd = std::max(worst_bhd, (nc.ss.B - cc.H * nc.ss.D).cwiseAbs().maxCoeff());
    worst_h = std::max(
        worst_h,
        (cc.H - (gains.ki / gains.kp) * nc.factors.V.transpose()).cwiseAbs().maxCoeff());
    worst_ahc =
        std::max(worst_ahc, (nc.ss.A - cc.H * nc.ss.C + gains.ki * Eigen::Matrix2d::Identity())
                                .cwiseAbs()
                                .maxCoeff());
  }
  expect(o, worst_bhd <= 1e-12, "B-HD residual " + fmt(worst_bhd));
  expect(o, worst_h <= 1e-10, "H closed-form residual " + fmt(worst_h));
  expect(o, worst_ahc <= 1e-10, "A-HC closed-form residual " + fmt(worst_ahc));
  expect_runtime(o, start, 1.0);
  note(o, "100 draws, residuals " + fmt(worst_bhd) + "/" + fmt(worst_h) + "/" + fmt(worst_ahc));
  return o;
}

Outcome c03_pole_oracle() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  StaticGain g = default_gain();
  double worst = 0.0;
  for (double kp : {0.5, 1.0, 1.5, 2.0, 2.5, 3.0}) {
    for (double ki : {0.5, 1.5, 2.5}) {
      InterconnectionM m = build_m_sat(make_cc(g, kp, ki), g);
      const double expected = -kp * ki / (1.0 + kp);
      Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(m.ss.A, false).eigenvalues();
      for (int i = 0; i < 2; ++i)
        worst = std::max(worst, std::abs(eig(i) - std::complex<double>(expected, 0.0)));
    }
  }
  InterconnectionM ref = build_m_sat(make_cc(g, 2.0, 1.5), g);
  Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(ref.ss.A, false).eigenvalues();
  for (int i = 0; i < 2; ++i)
    worst = std::max(worst, std::abs(eig(i) - std::complex<double>(-1.0, 0.0)));
  expect(o, worst <= 1e-9, "pole deviation " + fmt(worst));
  expect_runtime(o, start, 1.0);
  note(o, "max pole deviation " + fmt(worst) + " over the gain grid; {-1,-1} at kp=2,ki=1.5");
  return o;
}

Outcome c04_m11_closed_form() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  StaticGain g = default_gain();
  const double kp = 2.0, ki = 1.5;
  InterconnectionM m = build_m_sat(make_cc(g, kp, ki), g);
  const double pole = ki * kp / (1.0 + kp);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double omega = std::pow(10.0, -2.0 + 5.0 * i / 19.0);
    const std::complex<double> s(0.0, omega);
    const std::complex<double> scalar =
        kp / (1.0 + kp) - ki / ((1.0 + kp) * (1.0 + kp) * (s + pole));
    worst = std::max(
        worst,
        (freq_response(m.ss, omega) - scalar * Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff());
  }
  expect(o, worst <= 1e-9, "transfer mismatch " + fmt(worst));
  const double beta = compute_beta(m.ss, Eigen::MatrixXd::Identity(2, 2), m.structure);
  expect(o, std::abs(beta - 2.0 / 3.0) <= 1e-6, "beta(W=I) = " + fmt(beta) + ", expected 2/3");
  expect_runtime(o, start, 1.0);
  note(o, "20 frequencies, mismatch<=" + fmt(worst) + ", beta=" + fmt(beta));
  return o;
}

Outcome c05_hinf_oracle() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(105u);
  std::uniform_int_distribution<int> dim(1, 6);
  double worst_rel = 0.0;
  for (int i = 0; i < 50; ++i) {
    StateSpaceModel sys = oracles::random_stable_system(rng, dim(rng), dim(rng), dim(rng));
    const double fast = hinf_norm(sys, 1e-8);
    const double brute = oracles::grid_hinf(sys);
    const double rel = std::abs(fast - brute) / std::max(brute, 1e-300);
    worst_rel = std::max(worst_rel, rel);
  }
  expect(o, worst_rel <= 1e-3, "bisection vs grid disagreement " + fmt(worst_rel));
  const double wnorm = hinf_norm(realize_weight(kWeight), 1e-9);
  expect(o, std::abs(wnorm - 1.5) <= 1e-6, "weight norm " + fmt(wnorm) + ", expected 1.5");
  expect_runtime(o, start, 30.0);
  note(o, "50 systems, worst rel gap " + fmt(worst_rel) + "; weight norm " + fmt(wnorm));
  return o;
}

Outcome c06_lmi_plug_back() {
  Outcome o;
  StaticGain g = default_gain();
  double worst_lambda = -1e300, worst_q = 1e300, slowest = 0.0;
  int certified = 0;
  std::vector<std::pair<StateSpaceModel, DeltaStructure>> instances;
  for (double kp : {0.8, 1.0, 1.5, 2.0, 3.0, 5.0}) {
    InterconnectionM m = build_m_sat(make_cc(g, kp, 1.5), g);
    instances.emplace_back(m.ss, m.structure);
  }
  {
    StateSpaceModel toy;
    toy.A = -Eigen::MatrixXd::Identity(2, 2);
    toy.B = Eigen::MatrixXd::Zero(2, 2);
    toy.C = Eigen::MatrixXd::Zero(2, 2);
    toy.D = Eigen::MatrixXd::Zero(2, 2);
    DeltaStructure st;
    st.blocks = {{BlockKind::ConeNonlinear, 2, ScalingClass::Full}};
    instances.emplace_back(toy, st);
  }
  for (const auto& [ss, st] : instances) {
    const auto t0 = std::chrono::steady_clock::now();
    LmiCertificate cert = solve_cone_lmi(ss, st);
    slowest = std::max(
        slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    if (!cert.feasible) continue;
    ++certified;
    worst_lambda = std::max(worst_lambda, max_eig(plug_back(ss, cert.Q, cert.W, cert.delta)));
    worst_q = std::min(worst_q, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                    cert.Q, Eigen::EigenvaluesOnly)
                                    .eigenvalues()
                                    .minCoeff());
  }
  expect(o, certified > 0, "no instance produced a certificate");
  expect(o, worst_lambda <= 1e-8, "plug-back residual " + fmt(worst_lambda));
  expect(o, worst_q >= 1e-9, "smallest Q eigenvalue " + fmt(worst_q));
  expect(o, slowest < 10.0, "slowest solve " + fmt(slowest) + "s exceeded 10s");
  note(o, fmt(double(certified)) + " certificates, plug-back lambda<=" + fmt(worst_lambda) +
              ", Qmin>=" + fmt(worst_q));
  return o;
}

Outcome c07_operators() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(107u);
  std::uniform_real_distribution<double> span(-5.0, 5.0);
  bool fixed_point = true, collinear = true, bounded = true;
  for (int i = 0; i < 100000; ++i) {
    Eigen::Vector2d u(span(rng), span(rng));
    Eigen::Vector2d n = preserve_direction(u);
    bounded = bounded && n.cwiseAbs().maxCoeff() <= 1.0 + 1e-15;
    fixed_point = fixed_point && (saturate(n) - n).cwiseAbs().maxCoeff() == 0.0;
    collinear = collinear && std::abs(u(0) * n(1) - u(1) * n(0)) <= 1e-12 * u.norm();
  }
  expect(o, fixed_point, "clamp altered a direction-scaled input");
  expect(o, collinear, "direction scaling rotated an input");
  expect(o, bounded, "direction scaling exceeded the unit box");
  expect_runtime(o, start, 1.0);
  note(o, "100000 vectors");
  return o;
}

Outcome c08_ablation() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  StaticGain g = default_gain();
  TruthPlantOptions opt;
  opt.lag_time_constant = 0.5;
  Trajectory traj = make_trajectory(TrajectoryKind::Step, M_PI / 3, 60.0, kDt);
  ConditionedController cc = make_cc(g, 2.0, 1.5);
  SimTrace on = run_closed_loop(cc, build_truth_plant(g, opt), traj, kDt, {true, true});
  SimTrace off = run_closed_loop(cc, build_truth_plant(g, opt), traj, kDt, {false, true});
  StepStats son = step_stats(on);
  StepStats soff = step_stats(off);
  expect(o, son.iae < soff.iae, "IAE on=" + fmt(son.iae) + " not below off=" + fmt(soff.iae));
  expect(o, son.overshoot < soff.overshoot,
         "overshoot on=" + fmt(son.overshoot) + " not below off=" + fmt(soff.overshoot));
  expect_runtime(o, start, 5.0);
  note(o, "IAE " + fmt(son.iae) + " vs " + fmt(soff.iae) + ", overshoot " +
              fmt(son.overshoot * 180.0 / M_PI) + " vs " + fmt(soff.overshoot * 180.0 / M_PI) +
              " deg");
  return o;
}

Outcome c09_step_tracking() {
  Outcome o;
  StaticGain g = default_gain();
  TruthPlantOptions opt;
  opt.lag_time_constant = 0.5;
  Trajectory traj = make_trajectory(TrajectoryKind::Step, M_PI / 6, 30.0, kDt);
  for (double kp : {0.5, 2.0}) {
    SimTrace trace = run_closed_loop(make_cc(g, kp, 1.5), build_truth_plant(g, opt), traj, kDt);
    StepStats s = step_stats(trace);
    expect(o, s.final_err_deg < 0.5,
           "kp=" + fmt(kp) + " steady-state error " + fmt(s.final_err_deg) + " deg");
    note(o, "kp=" + fmt(kp) + " ss err " + fmt(s.final_err_deg) + " deg");
  }
  note(o, "hardware residuals for context: 2.19/1.94 deg at kp=2, not asserted");
  return o;
}

Outcome c10_robust_echo() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  StaticGain g = default_gain();
  ConditionedController cc = make_cc(g, 0.5, 1.5);
  Trajectory traj = make_trajectory(TrajectoryKind::Step, M_PI / 6, 20.0, kDt);
  int bounded = 0;
  for (unsigned seed = 1; seed <= 50; ++seed) {
    TruthPlantOptions opt;
    opt.mismatch_seed = seed;
    opt.weight = kWeight;
    try {
      run_closed_loop(cc, build_truth_plant(g, opt), traj, kDt);
      ++bounded;
    } catch (const SimulationDiverged&) {
    }
  }
  expect(o, bounded == 50, fmt(double(bounded)) + "/50 runs bounded");
  expect_runtime(o, start, 60.0);
  note(o, fmt(double(bounded)) + "/50 mismatch draws bounded");
  return o;
}

Outcome c11_verify_low_gain_dynamics() {
  Outcome o;
  StaticGain g = default_gain();
  PiGains gains{0.5, 1.5};
  RobustnessReport r = verify_robust_stability(make_cc(g, 0.5, 1.5), g, gains, true, kWeight);
  // Published outcome: the largest gain passing the dynamic-uncertainty
  // test is kp = 0.5, so this point must certify with beta < 1.
  expect(o, r.m_stable, "M unstable");
  expect(o, r.beta < 1.0 && r.robustly_stable,
         "not certified: computed beta=" + fmt(r.beta) +
             " (saturation channel DC gain |(kp-1)/kp| = 1 at kp = 0.5 pins the scaled norm "
             "at or above one for every admissible constant scaling)");
  note(o, "computed beta=" + fmt(r.beta));
  return o;
}

Outcome c12_verify_sat_only() {
  Outcome o;
  StaticGain g = default_gain();
  PiGains gains{2.0, 1.5};
  RobustnessReport r = verify_robust_stability(make_cc(g, 2.0, 1.5), g, gains, false, kWeight);
  expect(o, r.m_stable && r.robustly_stable && r.beta < 1.0,
         "expected certification, beta=" + fmt(r.beta));
  note(o, "beta=" + fmt(r.beta) + " < 1, lmi " +
              (r.certificate.feasible ? "feasible" : "infeasible"));
  return o;
}

Outcome c13_verify_high_gain_dynamics() {
  Outcome o;
  StaticGain g = default_gain();
  PiGains gains{2.0, 1.5};
  RobustnessReport r = verify_robust_stability(make_cc(g, 2.0, 1.5), g, gains, true, kWeight);
  expect(o, r.beta > 1.0, "expected beta above one, got " + fmt(r.beta));
  expect(o, !r.robustly_stable, "verdict should be not robustly stable");
  note(o, "computed beta=" + fmt(r.beta) + " (reference comparison value 4.7793); verdict " +
              (r.robustly_stable ? "stable" : "not robustly stable"));
  return o;
}

Outcome c14_sweep_ordering() {
  Outcome o;
  StaticGain g = default_gain();
  double max_sat = std::numeric_limits<double>::quiet_NaN();
  double max_mix = std::numeric_limits<double>::quiet_NaN();
  try {
    max_sat = max_stable_gain(1.5, false, kWeight, g, 0.25, 4.0);
  } catch (const std::exception& e) {
    expect(o, false, std::string("saturation-only sweep failed: ") + e.what());
  }
  try {
    max_mix = max_stable_gain(1.5, true, kWeight, g, 0.25, 4.0);
  } catch (const std::exception& e) {
    expect(o, false, std::string("with-dynamics sweep failed: ") + e.what());
  }
  expect(o, max_mix < max_sat,
         "ordering not established (max_mix=" + fmt(max_mix) + ", max_sat=" + fmt(max_sat) + ")");
  note(o, "max_sat=" + fmt(max_sat) + ", max_mix=" + fmt(max_mix) +
              " (reference comparison pair: 2.0 / 0.5)");
  return o;
}

Outcome c15_duration_trend() {
  Outcome o;
  StaticGain g = default_gain();
  TruthPlantOptions opt;
  opt.lag_time_constant = 0.5;
  ConditionedController cc = make_cc(g, 2.0, 1.5);
  std::vector<double> durations = {120.0, 60.0, 30.0, 15.0};
  std::vector<TrackingError> errors;
  std::string table;
  for (double duration : durations) {
    Trajectory traj = make_trajectory(TrajectoryKind::HoldSequence, M_PI / 6, duration, kDt);
    SimTrace trace = run_closed_loop(cc, build_truth_plant(g, opt), traj, kDt);
    TrackingError e = tracking_errors(trace, 0.0);
    errors.push_back(e);
    table += fmt(duration) + "s:" + fmt(e.yaw_mae_deg) + "/" + fmt(e.pitch_mae_deg) + " ";
  }
  for (size_t i = 0; i + 1 < errors.size(); ++i) {
    expect(o, errors[i].yaw_mae_deg <= errors[i + 1].yaw_mae_deg + 1e-12,
           "yaw MAE not monotone at step " + fmt(double(i)));
    expect(o, errors[i].pitch_mae_deg <= errors[i + 1].pitch_mae_deg + 1e-12,
           "pitch MAE not monotone at step " + fmt(double(i)));
  }
  note(o, "MAE yaw/pitch deg: " + table + "(reference yaw trend 5.18/6.43/7.35/12.02)");
  return o;
}

}  // namespace

int main() {
  std::printf("acceptance suite: synthesis, certification, and simulation criteria\n");
  run(1, "SVD reconstruction and decoupling", c01_svd);
  run(2, "conditioning gain identities", c02_hanus);
  run(3, "closed-loop pole oracle", c03_pole_oracle);
  run(4, "M11 closed form and beta at the identity scaling", c04_m11_closed_form);
  run(5, "H-infinity bisection vs dense grid oracle", c05_hinf_oracle);
  run(6, "LMI certificates survive the plug-back check", c06_lmi_plug_back);
  run(7, "clamp and direction-scaling operator properties", c07_operators);
  run(8, "anti-windup ablation on a saturating step", c08_ablation);
  run(9, "step tracking steady-state error", c09_step_tracking);
  run(10, "bounded loops across 50 plant mismatch draws", c10_robust_echo);
  run(11, "certification at kp=0.5 with dynamic uncertainty", c11_verify_low_gain_dynamics);
  run(12, "certification at kp=2.0, saturation only", c12_verify_sat_only);
  run(13, "beta above one at kp=2.0 with dynamic uncertainty", c13_verify_high_gain_dynamics);
  run(14, "certified gain shrinks when dynamics are added", c14_sweep_ordering);
  run(15, "tracking error grows as the trajectory speeds up", c15_duration_trend);

  std::printf("%d of 15 criteria passed\n", 15 - failures);
  return failures == 0 ? 0 : 1;
}
