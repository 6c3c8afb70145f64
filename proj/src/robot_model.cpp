#include "slipbound/robot_model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "slipbound/slip.hpp"

namespace slipbound {

namespace {

constexpr double kPi = std::numbers::pi;

Link rod(const std::string& name, double mass, double length, double com_offset) {
  return {name, mass, mass * length * length / 12.0, length, com_offset};
}

RobotModel biped(const std::string& name, double total_mass, double hip_height, double thigh,
                 double shank, double torso_len, double torso_com, int n_stance_legs) {
  RobotModel m;
  m.name = name;
  m.total_mass = total_mass;
  m.hip_height = hip_height;
  m.n_stance_legs = n_stance_legs;
  const double torso = 0.70 * total_mass;
  const double upper = 0.11 * total_mass;
  const double lower = 0.04 * total_mass;
  m.links = {rod("torso", torso, torso_len, torso_com),
             rod("left_thigh", upper, thigh, thigh / 2.0),
             rod("left_shank", lower, shank, shank / 2.0),
             rod("right_thigh", upper, thigh, thigh / 2.0),
             rod("right_shank", lower, shank, shank / 2.0)};
  // Rounding of the mass split must not break the total.
  m.links[0].mass = total_mass - 2.0 * (upper + lower);
  m.links[0].inertia = m.links[0].mass * torso_len * torso_len / 12.0;
  m.joints = {Joint{"left_hip", 0, -kPi, kPi, 4.0 * kPi, 2.7},
              Joint{"left_knee", 1, -kPi, kPi, 4.0 * kPi, 2.7},
              Joint{"right_hip", 0, -kPi, kPi, 4.0 * kPi, 2.7},
              Joint{"right_knee", 3, -kPi, kPi, 4.0 * kPi, 2.7}};
  return m;
}

}  // namespace

std::array<double, 4> RobotModel::torque_limits() const {
  return {joints[0].torque_limit, joints[1].torque_limit, joints[2].torque_limit,
          joints[3].torque_limit};
}

std::array<double, 4> RobotModel::velocity_limits() const {
  return {joints[0].vel_limit, joints[1].vel_limit, joints[2].vel_limit, joints[3].vel_limit};
}

void RobotModel::validate() const {
  double sum = 0.0;
  for (const Link& l : links) {
    if (!(l.mass > 0.0) || !(l.inertia > 0.0) || !(l.length > 0.0)) {
      throw ParameterError("link '" + l.name + "' needs positive mass, inertia and length");
    }
    sum += l.mass;
  }
  if (std::abs(sum - total_mass) > 1e-12 * total_mass) {
    std::ostringstream os;
    os << "link masses sum to " << sum << " kg but total_mass is " << total_mass;
    throw ParameterError(os.str());
  }
  if (!(hip_height > 0.0)) throw ParameterError("hip height must be positive");
  if (hip_height > links[1].length + links[2].length) {
    throw ParameterError("hip height exceeds the leg length");
  }
  for (const Joint& j : joints) {
    if (!(j.pos_min < j.pos_max) || !(j.vel_limit > 0.0) || !(j.torque_limit > 0.0)) {
      throw ParameterError("joint '" + j.name + "' has invalid limits");
    }
  }
}

void ContactParams::validate() const {
  if (!(k_n > 0.0) || !(d_n > 0.0) || !(v_slip > 0.0)) {
    throw ParameterError("contact stiffness, damping and slip velocity must be positive");
  }
  if (!(mu > 0.0) || mu > 2.0) throw ParameterError("friction coefficient must lie in (0, 2]");
}

RobotModel planar_bolt() { return biped("bolt", 1.3, 0.35, 0.2, 0.2, 0.2, 0.06, 1); }

RobotModel planar_solo() { return biped("solo", 2.2, 0.24, 0.16, 0.16, 0.2, 0.04, 2); }

RobotModel robot_preset(const std::string& name) {
  if (name == "bolt") return planar_bolt();
  if (name == "solo") return planar_solo();
  throw ParameterError("unknown robot preset '" + name + "' (expected bolt or solo)");
}

double knee_angle_for_extension(const RobotModel& model, double d) {
  const double a = model.links[1].length;
  const double b = model.links[2].length;
  if (!(d > std::abs(a - b)) || !(d < a + b)) {
    std::ostringstream os;
    os << "hip-to-foot distance " << d << " m unreachable for leg (" << a << ", " << b << ")";
    throw ParameterError(os.str());
  }
  const double c = (d * d - a * a - b * b) / (2.0 * a * b);
  return std::acos(c);
}

}  // namespace slipbound
