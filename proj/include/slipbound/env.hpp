#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "slipbound/bound.hpp"
#include "slipbound/environment.hpp"
#include "slipbound/gait.hpp"
#include "slipbound/planar_sim.hpp"
#include "slipbound/symmetry.hpp"

namespace slipbound {

/// Observation layout:
///   [0..2]  centroidal momentum in the base frame (px, pz, L)
///   [3]     base height
///   [4..5]  cos, sin of base pitch
///   [6..9]  joint positions (left hip, left knee, right hip, right knee)
///   [10..11] cos, sin of the reference gait phase
///   [12]    vx_des - CoM forward velocity
///   [13..14] contact flags (left, right)
inline constexpr int kObsDim = 15;
inline constexpr int kActDim = 4;

using Observation = std::array<double, kObsDim>;
using Action = std::array<double, kActDim>;

namespace obs_index {
inline constexpr int kMomentum = 0;
inline constexpr int kBaseHeight = 3;
inline constexpr int kPitchCos = 4;
inline constexpr int kPitchSin = 5;
inline constexpr int kJoints = 6;
inline constexpr int kPhaseCos = 10;
inline constexpr int kPhaseSin = 11;
inline constexpr int kVelocityError = 12;
inline constexpr int kContacts = 13;
}  // namespace obs_index

/// Left/right swap for the planar biped: joints and contacts trade places,
/// sagittal quantities are unchanged.
MirrorSpec planar_biped_mirror();

struct EnvConfig {
  std::string robot_preset = "bolt";
  RobotModel robot = planar_bolt();
  ContactParams contact;
  double k_rel = 10.7;
  double vx_des = 1.05;
  BoundKind bound_kind = BoundKind::Slip;
  double epsilon = 0.75;
  double control_hz = 200.0;
  int physics_substeps = 10;
  int max_cycles = 20;
  double init_noise = 0.05;  // rad, uniform on joint positions
  std::uint64_t seed = 0;
  GaitSearchConfig gait_search;
  MirrorSpec mirror = planar_biped_mirror();

  double control_dt() const { return 1.0 / control_hz; }
  double physics_dt() const { return control_dt() / physics_substeps; }
  void validate() const;
};

/// Default epsilon per bound kind (0.75 for the SLIP bound, 2.0 for the
/// constant-velocity baseline).
double default_epsilon(BoundKind kind);

/// Default target velocity per robot preset (the slower of its two targets).
double default_vx_des(const std::string& preset);

EnvConfig make_env_config(const std::string& preset, std::optional<double> vx_des = std::nullopt,
                          BoundKind kind = BoundKind::Slip,
                          std::optional<double> epsilon = std::nullopt);

struct StepInfo {
  int r_s = 1;
  double r_p = 1.0;
  std::optional<int> violated;
  std::array<double, 6> deviation{};
  ComState com;
  bool bound_violation = false;
  bool fell = false;
  bool exhausted = false;
  std::string error;
};

struct StepResult {
  Observation obs{};
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct TraceRow {
  double t = 0.0;
  ComState com;
  double reward = 0.0;
  int r_s = 1;
  double r_p = 1.0;
  JointVec tau = JointVec::Zero();
  JointVec q = JointVec::Zero();
  JointVec qd = JointVec::Zero();
  std::array<bool, 2> contacts{false, false};
};

struct EpisodeTrace {
  double start_x = 0.0;
  double dt = 0.0;
  std::vector<TraceRow> rows;
};

/// Torque/energy factor of the reward, in [0, 1]:
///   (1 - |tau * qd| / |tau_max * qd_max|) * (1 - |tau| / |tau_max|)
/// with Euclidean norms of the element-wise products. tau and qd are
/// clamped to their limits first.
double energy_reward(const JointVec& tau, const JointVec& qd, const JointVec& tau_max,
                     const JointVec& qd_max);

/// Sum of |tau_j qd_j| dt over the trace divided by m g times the forward
/// CoM displacement; +inf when the displacement is not positive.
double cost_of_transport(const EpisodeTrace& trace, double mass, double g = 9.81);

void write_trace_csv(const EpisodeTrace& trace, const std::filesystem::path& path);

/// Shared, immutable pieces of an environment: reference gait and bound.
struct EnvAssets {
  std::shared_ptr<const ReferenceTrajectory> reference;
  SpaceTimeBound bound;
};

EnvAssets build_env_assets(const EnvConfig& cfg);

/// Planar biped tracking a SLIP reference under a space-time bound.
class LocomotionEnv : public Environment {
 public:
  explicit LocomotionEnv(EnvConfig cfg);
  LocomotionEnv(EnvConfig cfg, EnvAssets assets);

  const EnvConfig& config() const { return cfg_; }
  const PlanarSim& sim() const { return sim_; }
  const ReferenceTrajectory& reference() const { return *assets_.reference; }
  const SpaceTimeBound& bound() const { return assets_.bound; }
  const SimState& state() const { return state_; }
  double time() const { return state_.t; }
  const EpisodeTrace& trace() const { return trace_; }

  Observation reset_episode(std::mt19937_64& rng);
  Observation reset_episode(std::uint64_t seed);
  StepResult step_episode(const Action& action);

  /// Starts an episode from an arbitrary simulator state at time t.
  Observation reset_to(const SimState& state);

  Observation observe(const SimState& s) const;

  // Environment interface.
  int obs_dim() const override { return kObsDim; }
  int act_dim() const override { return kActDim; }
  int horizon() const override;
  Eigen::VectorXd reset(std::mt19937_64& rng) override;
  EnvStep step(const Eigen::VectorXd& action) override;
  double episode_cost_of_transport() const override;
  std::optional<MirrorSpec> mirror() const override { return cfg_.mirror; }

 private:
  EnvConfig cfg_;
  EnvAssets assets_;
  PlanarSim sim_;
  SimState state_;
  EpisodeTrace trace_;
  bool done_ = true;
};

}  // namespace slipbound
