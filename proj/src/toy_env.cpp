#include "slipbound/toy_env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace slipbound {

SlipApexToyEnv::SlipApexToyEnv(ToyEnvConfig cfg) : cfg_(cfg) {
  if (cfg_.horizon < 1 || !(cfg_.alpha_range > 0.0) || !(cfg_.reward_width > 0.0)) {
    throw ParameterError("invalid toy environment configuration");
  }
  const SlipParams p = slip_params_from_robot(cfg_.m, cfg_.r0, cfg_.k_rel, cfg_.n_stance_legs);
  gait_ = find_periodic_gait(p, cfg_.vx_des);
  energy_ = 0.5 * gait_.apex.vx * gait_.apex.vx + p.g * gait_.apex.z;
}

double SlipApexToyEnv::touchdown_angle(double action) const {
  const double a = std::isfinite(action) ? std::clamp(action, -1.0, 1.0) : 0.0;
  return std::clamp(gait_.alpha_star + a * cfg_.alpha_range, 1e-3, std::numbers::pi / 2 - 1e-3);
}

Eigen::VectorXd SlipApexToyEnv::observe() const {
  Eigen::VectorXd o(3);
  // Centered and scaled so the deviations that matter are O(1).
  o << 10.0 * (apex_.z - gait_.apex.z) / cfg_.r0, 10.0 * (apex_.vx - gait_.apex.vx) / cfg_.vx_des,
      10.0 * (cfg_.vx_des - apex_.vx) / cfg_.vx_des;
  return o;
}

Eigen::VectorXd SlipApexToyEnv::reset(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-cfg_.init_noise, cfg_.init_noise);
  apex_.z = gait_.apex.z + u(rng) * cfg_.r0;
  // Same total energy as the periodic gait.
  apex_.vx = std::sqrt(std::max(0.0, 2.0 * (energy_ - gait_.params.g * apex_.z)));
  tick_ = 0;
  done_ = false;
  return observe();
}

EnvStep SlipApexToyEnv::step(const Eigen::VectorXd& action) {
  if (done_) throw std::logic_error("step called on a finished episode; reset first");
  EnvStep out;
  ++tick_;
  const auto next = try_apex_return_map(apex_.z, apex_.vx, touchdown_angle(action[0]),
                                        gait_.params, gait_.integration_dt);
  if (!next) {
    out.obs = observe();
    out.reward = 0.0;
    out.done = true;
    done_ = true;
    return out;
  }
  apex_ = *next;
  const double e = (apex_.vx - gait_.apex.vx) / (cfg_.reward_width * cfg_.vx_des);
  out.reward = std::exp(-e * e);
  out.obs = observe();
  out.truncated = tick_ >= cfg_.horizon;
  out.done = out.truncated;
  done_ = out.done;
  return out;
}

}  // namespace slipbound
