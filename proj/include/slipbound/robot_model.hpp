#pragma once

#include <array>
#include <string>
#include <vector>

namespace slipbound {

struct Link {
  std::string name;
  double mass = 0.0;
  double inertia = 0.0;     // about the link CoM
  double length = 0.0;
  double com_offset = 0.0;  // along the link axis from its proximal joint
};

struct Joint {
  std::string name;
  int parent_link = 0;
  double pos_min = 0.0;
  double pos_max = 0.0;
  double vel_limit = 0.0;
  double torque_limit = 0.0;
};

/// Sagittal-plane biped: a torso (link 0) carrying two hip-knee legs.
/// Link order: torso, left thigh, left shank, right thigh, right shank.
/// Joint order: left hip, left knee, right hip, right knee.
/// The base frame sits at the hip; the torso CoM lies com_offset above it.
struct RobotModel {
  std::string name;
  std::array<Link, 5> links;
  std::array<Joint, 4> joints;
  double total_mass = 0.0;
  double hip_height = 0.0;
  int n_stance_legs = 1;  // SLIP contact count used for gait synthesis

  std::array<double, 4> torque_limits() const;
  std::array<double, 4> velocity_limits() const;
  void validate() const;
};

struct ContactParams {
  double k_n = 5000.0;
  double d_n = 50.0;
  double mu = 0.8;
  double v_slip = 0.01;

  void validate() const;
};

/// Mass split and leg geometry are artifact defaults; the totals, hip height
/// and joint limits follow the published robot table.
RobotModel planar_bolt();

/// Planar two-leg stand-in for the quadruped: its parameters matter for gait
/// synthesis (n_stance_legs = 2), not as a faithful multibody model.
RobotModel planar_solo();

RobotModel robot_preset(const std::string& name);

/// Knee flexion giving a hip-to-foot distance d for the model's leg.
double knee_angle_for_extension(const RobotModel& model, double d);

}  // namespace slipbound
