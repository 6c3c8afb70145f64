#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <random>
#include <string>

#include "slipbound/symmetry.hpp"

namespace slipbound {

/// Result of one control tick as seen by a learner.
struct EnvStep {
  Eigen::VectorXd obs;
  double reward = 0.0;
  bool done = false;
  // Episode ended by the horizon rather than by failure; learners should
  // keep bootstrapping through such transitions.
  bool truncated = false;
  std::string error;
};

/// Learner-facing environment interface: spaces, reset and step.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;
  /// Maximum number of control ticks in one episode.
  virtual int horizon() const = 0;
  virtual Eigen::VectorXd reset(std::mt19937_64& rng) = 0;
  /// Actions are clamped to [-1, 1].
  virtual EnvStep step(const Eigen::VectorXd& action) = 0;
  /// Cost of transport of the current episode, NaN when not defined.
  virtual double episode_cost_of_transport() const { return std::nan(""); }
  virtual std::optional<MirrorSpec> mirror() const { return std::nullopt; }
};

}  // namespace slipbound
