#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace limbctl {

/// Geometry and material constants of the bending limb.
///
/// The limb is treated as a cantilevered beam with a rectangular
/// cross-section, driven by two diagonal actuator pairs. Inputs are
/// normalized duty commands in [-1, 1]; the moment arms below are
/// *effective* arms (geometric arm scaled by the full-duty force
/// magnitude), so that a unit command maps directly to a bending moment.
///
/// Defaults describe a limb that holds a simultaneous 60 degree bend on
/// both axes just inside the unit input box (|u| peaks near 0.96), so
/// large steps drive the actuators through sustained saturation.
struct LimbParams {
  double length_L = 0.12;                          // manipulator length [m]
  std::vector<double> moduli = {0.19e6, 1.4e6};    // constituent Young's moduli [Pa]
  double cross_width_b = 0.0164;                   // cross-section width [m]
  double cross_height_h = 0.008;                   // cross-section height [m]
  double moment_arm_dx = 0.0216;                   // effective pitch moment arm [m]
  double moment_arm_dy = 0.0118;                   // effective yaw moment arm [m]
  double sma_angle_phi = M_PI / 4.0;               // diagonal pair angle [rad]

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::domain_error(std::string("LimbParams.") + name + " must be strictly positive");
    };
    positive(length_L, "length_L");
    positive(cross_width_b, "cross_width_b");
    positive(cross_height_h, "cross_height_h");
    positive(moment_arm_dx, "moment_arm_dx");
    positive(moment_arm_dy, "moment_arm_dy");
    if (moduli.empty()) throw std::domain_error("LimbParams.moduli must be non-empty");
    for (double e : moduli) positive(e, "moduli[]");
    if (!(sma_angle_phi >= 0.0 && sma_angle_phi <= M_PI / 2.0))
      throw std::domain_error("LimbParams.sma_angle_phi must lie in [0, pi/2]");
  }
};

/// DC input-to-bend-angle map.
/// Row 0 is pitch, row 1 is yaw; columns are the diagonal pair inputs.
/// The construction guarantees row 0 has equal entries and row 1 entries
/// that are negatives of each other.
struct StaticGain {
  Eigen::Matrix2d matrix;
};

/// Second moment of area of a b x h rectangle about the centroidal axis
/// parallel to the side of length b.
inline double rect_moment_of_inertia(double b, double h) {
  if (!(b > 0.0) || !(h > 0.0))
    throw std::domain_error("rect_moment_of_inertia: dimensions must be strictly positive");
  return b * h * h * h / 12.0;
}

/// Single effective Young's modulus for the composite section: the
/// arithmetic mean of the constituent moduli.
inline double effective_modulus(const std::vector<double>& moduli) {
  if (moduli.empty())
    throw std::domain_error("effective_modulus: modulus list must be non-empty");
  for (double e : moduli)
    if (!(e > 0.0)) throw std::domain_error("effective_modulus: moduli must be strictly positive");
  return std::accumulate(moduli.begin(), moduli.end(), 0.0) / static_cast<double>(moduli.size());
}

/// Tip bend angle of a cantilever under a constant moment F*d:
/// theta = F*d*L / (E*I). Linear in the force-equivalent input F.
inline double bend_angle(double force, double moment_arm, double length, double modulus,
                         double inertia) {
  if (!(moment_arm > 0.0) || !(length > 0.0) || !(modulus > 0.0) || !(inertia > 0.0))
    throw std::domain_error("bend_angle: geometry and material constants must be strictly positive");
  return force * moment_arm * length / (modulus * inertia);
}

/// Assembles the 2x2 static gain from beam statics. Each diagonal pair
/// contributes d*cos(phi) of pitch arm and d*sin(phi) of yaw arm; the
/// pairs act on yaw with opposite signs.
inline StaticGain static_gain_matrix(const LimbParams& p) {
  p.validate();
  const double E = effective_modulus(p.moduli);
  // I_x: bending about the width axis; I_y: bending about the height axis.
  const double inertia_x = rect_moment_of_inertia(p.cross_width_b, p.cross_height_h);
  const double inertia_y = rect_moment_of_inertia(p.cross_height_h, p.cross_width_b);
  const double pitch = bend_angle(1.0, p.moment_arm_dx, p.length_L, E, inertia_y) *
                       std::cos(p.sma_angle_phi);
  const double yaw = bend_angle(1.0, p.moment_arm_dy, p.length_L, E, inertia_x) *
                     std::sin(p.sma_angle_phi);
  StaticGain g;
  g.matrix << pitch, pitch, yaw, -yaw;
  return g;
}

}  // namespace limbctl
