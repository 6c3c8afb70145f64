#pragma once

#include "slipbound/environment.hpp"
#include "slipbound/gait.hpp"

namespace slipbound {

struct ToyEnvConfig {
  double m = 1.3;
  double r0 = 0.35;
  double k_rel = 10.7;
  int n_stance_legs = 1;
  double vx_des = 1.05;
  // Touchdown angle = alpha* + action * alpha_range.
  double alpha_range = 0.6;
  int horizon = 50;
  // Initial apex height drawn uniformly within +-init_noise * r0 of the
  // fixed point, at the fixed point's energy.
  double init_noise = 0.02;
  // Width of the speed-tracking reward, as a fraction of vx_des.
  double reward_width = 0.1;
};

/// Apex-to-apex SLIP control: each step picks the next touchdown angle.
/// Observation: apex height and forward speed centered on the periodic gait,
/// and the speed error vx_des - vx; all three scaled up by 10. Reward is
/// survival times a Gaussian in the apex forward-speed error relative to
/// the periodic gait.
class SlipApexToyEnv : public Environment {
 public:
  explicit SlipApexToyEnv(ToyEnvConfig cfg = {});

  const PeriodicGait& gait() const { return gait_; }
  const ToyEnvConfig& config() const { return cfg_; }
  double touchdown_angle(double action) const;

  int obs_dim() const override { return 3; }
  int act_dim() const override { return 1; }
  int horizon() const override { return cfg_.horizon; }
  Eigen::VectorXd reset(std::mt19937_64& rng) override;
  EnvStep step(const Eigen::VectorXd& action) override;

 private:
  Eigen::VectorXd observe() const;

  ToyEnvConfig cfg_;
  PeriodicGait gait_;
  double energy_ = 0.0;
  ApexState apex_;
  int tick_ = 0;
  bool done_ = true;
};

}  // namespace slipbound
