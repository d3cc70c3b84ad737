#pragma once

// Test-only reference computations, kept independent of the library code
// paths they are used to check.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "limbctl/limb_model.hpp"
#include "limbctl/state_space.hpp"

namespace oracles {

/// Largest singular value of C (jw I - A)^-1 B + D computed directly,
/// bypassing limbctl::freq_response.
inline double direct_gain(const limbctl::StateSpaceModel& sys, double omega) {
  const int n = sys.states();
  Eigen::MatrixXcd resp;
  if (n == 0) {
    resp = sys.D.cast<std::complex<double>>();
  } else {
    Eigen::MatrixXcd jw =
        std::complex<double>(0, omega) * Eigen::MatrixXcd::Identity(n, n) -
        sys.A.cast<std::complex<double>>();
    resp = sys.C.cast<std::complex<double>>() * jw.lu().solve(sys.B.cast<std::complex<double>>()) +
           sys.D.cast<std::complex<double>>();
  }
  return resp.jacobiSvd().singularValues()(0);
}

/// Brute-force H-infinity estimate: dense log-spaced scan of
/// [1e-3, 1e5] rad/s plus zero frequency, followed by a local refinement
/// pass around the best point.
inline double grid_hinf(const limbctl::StateSpaceModel& sys, int points = 2400) {
  double best = direct_gain(sys, 0.0);
  double best_w = 0.0;
  const double lo = std::log10(1e-3), hi = std::log10(1e5);
  for (int i = 0; i < points; ++i) {
    const double w = std::pow(10.0, lo + (hi - lo) * i / (points - 1));
    const double gain = direct_gain(sys, w);
    if (gain > best) {
      best = gain;
      best_w = w;
    }
  }
  // Refinement: shrink a bracket around the incumbent frequency.
  if (best_w > 0.0) {
    double span = best_w * (std::pow(10.0, (hi - lo) / (points - 1)) - 1.0) * 2.0;
    for (int pass = 0; pass < 40; ++pass) {
      for (int i = -4; i <= 4; ++i) {
        const double w = best_w + span * i / 4.0;
        if (w <= 0.0) continue;
        const double gain = direct_gain(sys, w);
        if (gain > best) {
          best = gain;
          best_w = w;
        }
      }
      span *= 0.5;
    }
  }
  return best;
}

/// Random stable system with n states, m inputs, p outputs. The spectrum
/// is shifted strictly into the left half plane.
inline limbctl::StateSpaceModel random_stable_system(std::mt19937& rng, int n, int m, int p) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  limbctl::StateSpaceModel sys;
  sys.A.resize(n, n);
  sys.B.resize(n, m);
  sys.C.resize(p, n);
  sys.D.resize(p, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sys.A(i, j) = gauss(rng);
  const double shift = Eigen::EigenSolver<Eigen::MatrixXd>(sys.A, false)
                           .eigenvalues()
                           .real()
                           .maxCoeff();
  sys.A -= (shift + 0.2 + std::abs(gauss(rng))) * Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) sys.B(i, j) = gauss(rng);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < n; ++j) sys.C(i, j) = gauss(rng);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < m; ++j) sys.D(i, j) = 0.5 * gauss(rng);
  return sys;
}

/// Random gain with the pitch/yaw row structure of the bending statics.
inline limbctl::StaticGain random_structured_gain(std::mt19937& rng) {
  std::uniform_real_distribution<double> mag(0.05, 5.0);
  limbctl::StaticGain g;
  const double a = mag(rng);
  const double b = mag(rng);
  g.matrix << a, a, b, -b;
  return g;
}

/// Discrete-time frequency response at angular frequency omega for a
/// sample time dt (evaluates at z = exp(j omega dt)).
inline Eigen::MatrixXcd discrete_response(const limbctl::StateSpaceModel& sysd, double omega,
                                          double dt) {
  const int n = sysd.states();
  const std::complex<double> z = std::exp(std::complex<double>(0.0, omega * dt));
  Eigen::MatrixXcd zi = z * Eigen::MatrixXcd::Identity(n, n) - sysd.A.cast<std::complex<double>>();
  return sysd.C.cast<std::complex<double>>() * zi.lu().solve(sysd.B.cast<std::complex<double>>()) +
         sysd.D.cast<std::complex<double>>();
}

}  // namespace oracles
