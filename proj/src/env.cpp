#include "slipbound/env.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <tuple>

namespace slipbound {

namespace {

constexpr double kFallHeightRatio = 0.4;

using GaitKey = std::tuple<double, double, double, int, double, double, double, double, int>;

std::shared_ptr<const ReferenceTrajectory> cached_reference(const SlipParams& p, double vx_des,
                                                            const GaitSearchConfig& search,
                                                            int n_cycles, double dt) {
  static std::mutex mutex;
  static std::map<std::tuple<GaitKey, int, double>, std::shared_ptr<const ReferenceTrajectory>>
      cache;
  const GaitKey gk{p.m, p.r0, p.k, p.n_stance_legs, p.g, vx_des, search.apex_height_ratio,
                   search.integration_dt, search.alpha_grid};
  const auto key = std::make_tuple(gk, n_cycles, dt);
  {
    std::lock_guard<std::mutex> lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const PeriodicGait gait = find_periodic_gait(p, vx_des, search);
  auto ref = std::make_shared<const ReferenceTrajectory>(reference_trajectory(gait, n_cycles, dt));
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(key, ref);
  return ref;
}

JointVec to_joint_vec(const std::array<double, 4>& a) { return JointVec(a[0], a[1], a[2], a[3]); }

}  // namespace

MirrorSpec planar_biped_mirror() {
  MirrorSpec m;
  m.state = SignedPermutation::swaps(
      kObsDim, {{obs_index::kJoints, obs_index::kJoints + 2},
                {obs_index::kJoints + 1, obs_index::kJoints + 3},
                {obs_index::kContacts, obs_index::kContacts + 1}});
  m.action = SignedPermutation::swaps(kActDim, {{0, 2}, {1, 3}});
  return m;
}

void EnvConfig::validate() const {
  robot.validate();
  contact.validate();
  mirror.validate();
  if (!(vx_des > 0.0)) throw ParameterError("vx_des must be positive");
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
  if (!(control_hz > 0.0) || physics_substeps < 1) throw ParameterError("invalid control timing");
  if (max_cycles < 1) throw ParameterError("max_cycles must be >= 1");
  if (!(init_noise >= 0.0)) throw ParameterError("init_noise must be non-negative");
  if (mirror.state.size() != kObsDim || mirror.action.size() != kActDim) {
    throw ParameterError("mirror spec dimensions do not match the environment");
  }
}

double default_epsilon(BoundKind kind) { return kind == BoundKind::Slip ? 0.75 : 2.0; }

double default_vx_des(const std::string& preset) {
  if (preset == "bolt") return 1.05;
  if (preset == "solo") return 0.60;
  throw ParameterError("unknown robot preset '" + preset + "'");
}

EnvConfig make_env_config(const std::string& preset, std::optional<double> vx_des,
                          BoundKind kind, std::optional<double> epsilon) {
  EnvConfig cfg;
  cfg.robot_preset = preset;
  cfg.robot = robot_preset(preset);
  cfg.vx_des = vx_des.value_or(default_vx_des(preset));
  cfg.bound_kind = kind;
  cfg.epsilon = epsilon.value_or(default_epsilon(kind));
  return cfg;
}

double energy_reward(const JointVec& tau_in, const JointVec& qd_in, const JointVec& tau_max,
                     const JointVec& qd_max) {
  const JointVec tau = tau_in.cwiseMax(-tau_max).cwiseMin(tau_max);
  const JointVec qd = qd_in.cwiseMax(-qd_max).cwiseMin(qd_max);
  const double power = tau.cwiseProduct(qd).norm() / tau_max.cwiseProduct(qd_max).norm();
  const double effort = tau.norm() / tau_max.norm();
  return (1.0 - power) * (1.0 - effort);
}

double cost_of_transport(const EpisodeTrace& trace, double mass, double g) {
  if (trace.rows.empty()) return std::numeric_limits<double>::infinity();
  const double dx = trace.rows.back().com.x - trace.start_x;
  if (!(dx > 0.0)) return std::numeric_limits<double>::infinity();
  double work = 0.0;
  for (const TraceRow& r : trace.rows) {
    for (int j = 0; j < kNumJoints; ++j) work += std::abs(r.tau[j] * r.qd[j]) * trace.dt;
  }
  return work / (mass * g * dx);
}

void write_trace_csv(const EpisodeTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  out << "t,x,y,z,vx,vy,vz,reward,r_s,r_p";
  for (const char* group : {"tau", "q", "qd"}) {
    for (int j = 0; j < kNumJoints; ++j) out << ',' << group << j;
  }
  out << ",contact_left,contact_right\n";
  for (const TraceRow& r : trace.rows) {
    out << r.t << ',' << r.com.x << ',' << r.com.y << ',' << r.com.z << ',' << r.com.vx << ','
        << r.com.vy << ',' << r.com.vz << ',' << r.reward << ',' << r.r_s << ',' << r.r_p;
    for (const JointVec* v : {&r.tau, &r.q, &r.qd}) {
      for (int j = 0; j < kNumJoints; ++j) out << ',' << (*v)[j];
    }
    out << ',' << r.contacts[0] << ',' << r.contacts[1] << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

EnvAssets build_env_assets(const EnvConfig& cfg) {
  cfg.validate();
  const SlipParams p = slip_params_from_robot(cfg.robot.total_mass, cfg.robot.hip_height,
                                              cfg.k_rel, cfg.robot.n_stance_legs);
  EnvAssets assets;
  assets.reference =
      cached_reference(p, cfg.vx_des, cfg.gait_search, cfg.max_cycles, cfg.control_dt());
  if (cfg.bound_kind == BoundKind::Slip) {
    assets.bound = make_slip_bound(assets.reference, cfg.epsilon, cfg.robot.hip_height);
  } else {
    assets.bound = make_const_bound(cfg.vx_des, cfg.epsilon, cfg.robot.hip_height,
                                    assets.reference->vx_span);
  }
  return assets;
}

LocomotionEnv::LocomotionEnv(EnvConfig cfg) : LocomotionEnv(cfg, build_env_assets(cfg)) {}

LocomotionEnv::LocomotionEnv(EnvConfig cfg, EnvAssets assets)
    : cfg_(std::move(cfg)), assets_(std::move(assets)), sim_(cfg_.robot, cfg_.contact) {
  cfg_.validate();
}

int LocomotionEnv::horizon() const {
  return static_cast<int>(std::floor(reference().duration() / cfg_.control_dt() + 1e-9));
}

Observation LocomotionEnv::observe(const SimState& s) const {
  Observation o{};
  const CentroidalMomentum h = sim_.centroidal_momentum(s);
  const double th = s.q[2];
  const double c = std::cos(th);
  const double sn = std::sin(th);
  // World -> base frame: rotate by -pitch.
  o[obs_index::kMomentum + 0] = c * h.linear.x() + sn * h.linear.y();
  o[obs_index::kMomentum + 1] = -sn * h.linear.x() + c * h.linear.y();
  o[obs_index::kMomentum + 2] = h.angular;
  o[obs_index::kBaseHeight] = s.q[1];
  o[obs_index::kPitchCos] = c;
  o[obs_index::kPitchSin] = sn;
  for (int j = 0; j < kNumJoints; ++j) o[obs_index::kJoints + j] = s.q[3 + j];
  const double t = std::min(s.t, reference().duration());
  const auto [pc, ps] = phase_at(reference(), t);
  o[obs_index::kPhaseCos] = pc;
  o[obs_index::kPhaseSin] = ps;
  o[obs_index::kVelocityError] = cfg_.vx_des - sim_.com_state(s).vx;
  const auto flags = sim_.contact_flags(s);
  o[obs_index::kContacts + 0] = flags[0] ? 1.0 : 0.0;
  o[obs_index::kContacts + 1] = flags[1] ? 1.0 : 0.0;
  return o;
}

Observation LocomotionEnv::reset_to(const SimState& s) {
  state_ = s;
  trace_ = EpisodeTrace{};
  trace_.start_x = sim_.com_state(s).x;
  trace_.dt = cfg_.control_dt();
  done_ = false;
  return observe(state_);
}

Observation LocomotionEnv::reset_episode(std::mt19937_64& rng) {
  const SlipState apex = reference().samples.front().state;
  return reset_to(sim_.initial_pose(apex, rng, cfg_.init_noise));
}

Observation LocomotionEnv::reset_episode(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return reset_episode(rng);
}

StepResult LocomotionEnv::step_episode(const Action& action) {
  if (done_) throw std::logic_error("step called on a finished episode; reset first");
  const JointVec tau_max = to_joint_vec(cfg_.robot.torque_limits());
  JointVec tau;
  for (int j = 0; j < kActDim; ++j) {
    const double a = std::isfinite(action[j]) ? std::clamp(action[j], -1.0, 1.0) : 0.0;
    tau[j] = a * tau_max[j];
  }

  StepResult res;
  const long tick = std::lround(state_.t / cfg_.control_dt()) + 1;
  const double t_next = tick * cfg_.control_dt();
  try {
    SimState s = state_;
    for (int i = 0; i < cfg_.physics_substeps; ++i) s = sim_.step(s, tau, cfg_.physics_dt());
    s.t = t_next;
    state_ = s;
  } catch (const SimulationError& e) {
    res.done = true;
    res.reward = 0.0;
    res.info.r_s = 0;
    res.info.error = e.what();
    res.obs = observe(state_);
    done_ = true;
    return res;
  }

  StepInfo& info = res.info;
  info.com = sim_.com_state(state_);
  const double t_check = std::min(t_next, reference().duration());
  const BoundCheck bc = check_bound(bound(), info.com, t_check);
  info.r_s = bc.inside ? 1 : 0;
  info.violated = bc.violated;
  info.deviation = bc.deviation;
  info.bound_violation = !bc.inside;
  info.r_p = energy_reward(tau, state_.joint_velocities(), tau_max,
                           to_joint_vec(cfg_.robot.velocity_limits()));
  info.fell = state_.q[1] < kFallHeightRatio * cfg_.robot.hip_height ||
              std::abs(state_.q[2]) > std::numbers::pi / 2.0;
  info.exhausted = tick >= horizon();
  res.reward = info.r_s * info.r_p;
  res.done = info.bound_violation || info.fell || info.exhausted;
  res.obs = observe(state_);
  done_ = res.done;

  TraceRow row;
  row.t = t_next;
  row.com = info.com;
  row.reward = res.reward;
  row.r_s = info.r_s;
  row.r_p = info.r_p;
  row.tau = tau;
  row.q = state_.joint_positions();
  row.qd = state_.joint_velocities();
  row.contacts = state_.foot_contacts;
  trace_.rows.push_back(row);
  return res;
}

Eigen::VectorXd LocomotionEnv::reset(std::mt19937_64& rng) {
  const Observation o = reset_episode(rng);
  return Eigen::Map<const Eigen::VectorXd>(o.data(), kObsDim);
}

EnvStep LocomotionEnv::step(const Eigen::VectorXd& action) {
  Action a{};
  for (int j = 0; j < kActDim; ++j) a[j] = action[j];
  const StepResult r = step_episode(a);
  EnvStep out;
  out.obs = Eigen::Map<const Eigen::VectorXd>(r.obs.data(), kObsDim);
  out.reward = r.reward;
  out.done = r.done;
  out.truncated = r.info.exhausted && !r.info.bound_violation && !r.info.fell;
  out.error = r.info.error;
  return out;
}

double LocomotionEnv::episode_cost_of_transport() const {
  return cost_of_transport(trace_, cfg_.robot.total_mass);
}

}  // namespace slipbound
