#pragma once

#include <Eigen/Dense>
#include <array>
#include <random>
#include <stdexcept>

#include "slipbound/bound.hpp"
#include "slipbound/robot_model.hpp"
#include "slipbound/slip.hpp"

namespace slipbound {

inline constexpr int kNumDof = 7;     // x, z, pitch, 4 joints
inline constexpr int kNumJoints = 4;  // left hip, left knee, right hip, right knee

using Dof = Eigen::Matrix<double, kNumDof, 1>;
using MassMatrix = Eigen::Matrix<double, kNumDof, kNumDof>;
using PointJacobian = Eigen::Matrix<double, 2, kNumDof>;
using JointVec = Eigen::Matrix<double, kNumJoints, 1>;

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PoseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimState {
  Dof q = Dof::Zero();
  Dof qd = Dof::Zero();
  double t = 0.0;
  std::array<bool, 2> foot_contacts{false, false};
  std::array<Eigen::Vector2d, 2> foot_forces{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};

  JointVec joint_positions() const { return q.tail<kNumJoints>(); }
  JointVec joint_velocities() const { return qd.tail<kNumJoints>(); }
};

struct CentroidalMomentum {
  Eigen::Vector2d linear = Eigen::Vector2d::Zero();
  double angular = 0.0;
};

struct SimOptions {
  double gravity = 9.81;
  // Clamp the floating base in place; used for pendulum-style checks.
  bool fixed_base = false;
};

/// Planar floating-base biped with penalty point-foot contact.
///
/// Dynamics: M(q) qdd = tau - h(q, qd) + sum_f J_f^T f_f, where h collects
/// the velocity-product and gravity terms. Steps with a foot on the ground
/// use semi-implicit Euler with the contact force linearized implicitly in
/// foot position and velocity; contact-free steps use RK4.
class PlanarSim {
 public:
  PlanarSim(RobotModel model, ContactParams contact, SimOptions options = {});

  const RobotModel& model() const { return model_; }
  const ContactParams& contact() const { return contact_; }
  const SimOptions& options() const { return options_; }

  SimState step(const SimState& state, const JointVec& tau, double dt) const;

  ComState com_state(const SimState& state) const;
  CentroidalMomentum centroidal_momentum(const SimState& state) const;
  std::array<bool, 2> contact_flags(const SimState& state) const;

  /// Base at the apex position, pitch zero, both legs at a symmetric bent
  /// pose with foot clearance, base velocity (apex.vx, 0), and uniform joint
  /// noise of +-noise_scale.
  SimState initial_pose(const SlipState& apex, std::mt19937_64& rng,
                        double noise_scale) const;

  // Model terms, exposed for analysis and tests.
  MassMatrix mass_matrix(const Dof& q) const;
  Dof bias_forces(const Dof& q, const Dof& qd) const;
  Dof accelerations(const Dof& q, const Dof& qd, const JointVec& tau) const;
  double kinetic_energy(const SimState& s) const;
  double potential_energy(const SimState& s) const;
  Eigen::Vector2d foot_position(const Dof& q, int leg) const;
  Eigen::Vector2d foot_velocity(const Dof& q, const Dof& qd, int leg) const;
  PointJacobian foot_jacobian(const Dof& q, int leg) const;
  Eigen::Vector2d link_com(const Dof& q, int link) const;
  Eigen::Vector2d link_com_velocity(const Dof& q, const Dof& qd, int link) const;

  /// Penalty force at a foot given its position and velocity.
  Eigen::Vector2d contact_force(const Eigen::Vector2d& p, const Eigen::Vector2d& v) const;

  /// Minimum base height accepted by initial_pose.
  double min_standing_height() const;

 private:
  Dof generalized_forces(const Dof& q, const Dof& qd, const JointVec& tau, bool with_contact) const;
  SimState finalize(Dof q, Dof qd, double t) const;

  RobotModel model_;
  ContactParams contact_;
  SimOptions options_;
};

}  // namespace slipbound
