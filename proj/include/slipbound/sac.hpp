#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "slipbound/mlp.hpp"
#include "slipbound/symmetry.hpp"

namespace slipbound {

class LearnerFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SacConfig {
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<int> hidden{256, 256};
  double gamma = 0.995;
  double lr = 3e-4;
  int batch_size = 256;
  std::size_t replay_capacity = 1'000'000;
  double tau = 0.005;
  // NaN selects -act_dim.
  double target_entropy = std::numeric_limits<double>::quiet_NaN();
  bool auto_alpha = true;
  double init_alpha = 1.0;
  double lambda_sym = 0.1;
  // Mirror-augment sampled batches (requires a mirror spec).
  bool augment = true;
  int warmup_steps = 1000;
  double policy_output_scale = 0.01;
  std::uint64_t seed = 0;

  double resolved_target_entropy() const;
  void validate() const;
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// tanh-squashed diagonal Gaussian policy. The network emits the
/// pre-squash mean followed by the log standard deviation.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(int obs_dim, int act_dim, const std::vector<int>& hidden, std::mt19937_64& rng,
                 double output_scale);

  int act_dim() const { return act_dim_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  struct Heads {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd var;
  };
  /// Pre-squash mean and variance, one column per state.
  Heads heads(const Eigen::MatrixXd& states) const;

  struct Sample {
    Eigen::MatrixXd action;
    Eigen::VectorXd log_prob;
  };
  /// a = tanh(mean + std * noise), with the tanh change-of-variables
  /// correction in the log-probability.
  Sample sample(const Eigen::MatrixXd& states, const Eigen::MatrixXd& noise) const;
  Sample sample(const Eigen::MatrixXd& states, std::mt19937_64& rng) const;
  Eigen::MatrixXd deterministic(const Eigen::MatrixXd& states) const;

 private:
  int act_dim_ = 0;
  Mlp net_;
};

/// log(1 - tanh(u)^2), evaluated stably.
double log1m_tanh_sq(double u);

struct LossReport {
  double critic = 0.0;
  double policy = 0.0;
  double temperature = 0.0;
  double symmetry = 0.0;
  double alpha = 0.0;
  double entropy = 0.0;  // batch estimate of -log pi
  int critic_batch = 0;
};

class SacAgent {
 public:
  SacAgent(SacConfig cfg, std::optional<MirrorSpec> mirror);

  const SacConfig& config() const { return cfg_; }
  const std::optional<MirrorSpec>& mirror_spec() const { return mirror_; }
  GaussianPolicy& policy() { return policy_; }
  const GaussianPolicy& policy() const { return policy_; }
  Mlp& q1() { return q1_; }
  Mlp& q2() { return q2_; }
  const Mlp& q1() const { return q1_; }
  const Mlp& q2() const { return q2_; }
  const Mlp& q1_target() const { return q1_target_; }
  const Mlp& q2_target() const { return q2_target_; }
  double alpha() const;
  double log_alpha() const { return log_alpha_; }
  void set_log_alpha(double v) { log_alpha_ = v; }

  Eigen::VectorXd act(const Eigen::VectorXd& obs, std::mt19937_64& rng, bool deterministic) const;

  /// One gradient step each on the twin critics, the policy and the
  /// temperature, then Polyak averaging of the target critics.
  LossReport update(const Batch& batch, std::mt19937_64& rng);

  /// Batch the update actually trains on (mirror-augmented when enabled).
  Batch training_batch(const Batch& batch) const;

  // Loss evaluations with explicit noise; used by update() and gradient checks.
  struct CriticLoss {
    double value = 0.0;
    MlpGrads g1;
    MlpGrads g2;
  };
  CriticLoss critic_loss(const Batch& batch, const Eigen::MatrixXd& next_noise) const;

  struct PolicyLoss {
    double value = 0.0;
    double symmetry = 0.0;
    Eigen::VectorXd log_prob;
    MlpGrads grads;
  };
  PolicyLoss policy_loss(const Eigen::MatrixXd& states, const Eigen::MatrixXd& noise) const;

  struct SymmetryLoss {
    double value = 0.0;
    MlpGrads grads;
  };
  SymmetryLoss symmetry_loss(const Eigen::MatrixXd& states) const;

  struct TemperatureLoss {
    double value = 0.0;
    double grad_log_alpha = 0.0;
  };
  TemperatureLoss temperature_loss(const Eigen::VectorXd& log_prob) const;

  void save(const std::filesystem::path& path) const;
  static SacAgent load(const std::filesystem::path& path);

 private:
  Eigen::MatrixXd q_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act) const;

  SacConfig cfg_;
  std::optional<MirrorSpec> mirror_;
  GaussianPolicy policy_;
  Mlp q1_;
  Mlp q2_;
  Mlp q1_target_;
  Mlp q2_target_;
  double log_alpha_ = 0.0;
  Adam policy_opt_;
  Adam q1_opt_;
  Adam q2_opt_;
  ScalarAdam alpha_opt_;
};

/// Uniform replay with a fixed capacity; the oldest entries are overwritten.
class ReplayBuffer {
 public:
  ReplayBuffer(int obs_dim, int act_dim, std::size_t capacity);

  void add(const Eigen::VectorXd& obs, const Eigen::VectorXd& act, double rew,
           const Eigen::VectorXd& next_obs, bool done);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_added() const { return total_; }

  /// Uniform sample of distinct entries.
  Batch sample(int n, std::mt19937_64& rng) const;
  /// Entries in insertion order, oldest first.
  Batch contents() const;

 private:
  Batch gather(const std::vector<std::size_t>& idx) const;

  int obs_dim_;
  int act_dim_;
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  std::size_t total_ = 0;
  int stride_;
  std::vector<double> data_;  // obs | act | rew | next_obs | done
};

}  // namespace slipbound
