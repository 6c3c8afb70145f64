#include "slipbound/config_io.hpp"

#include <fstream>

namespace slipbound {

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed ") + what + ": " + e.what());
  }
}

json state_to_json(const SlipState& s) {
  return {{"x", s.x},   {"z", s.z},
          {"vx", s.vx}, {"vz", s.vz},
          {"phase", s.phase == SlipPhase::Stance ? "stance" : "flight"},
          {"foot_x", s.foot_x}};
}

SlipPhase phase_from_string(const std::string& s) {
  if (s == "stance") return SlipPhase::Stance;
  if (s == "flight") return SlipPhase::Flight;
  throw ConfigError("unknown SLIP phase '" + s + "'");
}

SlipState state_from_json(const json& j) {
  SlipState s;
  s.x = j.at("x").get<double>();
  s.z = j.at("z").get<double>();
  s.vx = j.at("vx").get<double>();
  s.vz = j.at("vz").get<double>();
  s.phase = phase_from_string(j.at("phase").get<std::string>());
  read_if(j, "foot_x", s.foot_x);
  return s;
}

json perm_to_json(const SignedPermutation& p) { return {{"index", p.index}, {"sign", p.sign}}; }

SignedPermutation perm_from_json(const json& j) {
  SignedPermutation p;
  p.index = j.at("index").get<std::vector<int>>();
  p.sign = j.at("sign").get<std::vector<double>>();
  return p;
}

}  // namespace

json to_json(const SlipParams& p) {
  return {{"m", p.m},         {"r0", p.r0},
          {"k", p.k},         {"k_rel", p.k_rel},
          {"n_stance_legs", p.n_stance_legs},
          {"g", p.g}};
}

SlipParams slip_params_from_json(const json& j) {
  return guarded("SLIP parameters", [&] {
    SlipParams p;
    p.m = j.at("m").get<double>();
    p.r0 = j.at("r0").get<double>();
    p.k = j.at("k").get<double>();
    read_if(j, "k_rel", p.k_rel);
    read_if(j, "n_stance_legs", p.n_stance_legs);
    read_if(j, "g", p.g);
    return p;
  });
}

json to_json(const PeriodicGait& g) {
  return {{"params", to_json(g.params)},
          {"alpha_star", g.alpha_star},
          {"apex", state_to_json(g.apex)},
          {"period_T", g.period_T},
          {"stride_length", g.stride_length},
          {"mean_vx", g.mean_vx},
          {"t_flight", g.t_flight},
          {"t_stance", g.t_stance},
          {"t_touchdown", g.t_touchdown},
          {"t_liftoff", g.t_liftoff},
          {"residual", g.residual},
          {"integration_dt", g.integration_dt}};
}

PeriodicGait gait_from_json(const json& j) {
  return guarded("gait", [&] {
    PeriodicGait g;
    g.params = slip_params_from_json(j.at("params"));
    g.alpha_star = j.at("alpha_star").get<double>();
    g.apex = state_from_json(j.at("apex"));
    g.period_T = j.at("period_T").get<double>();
    g.stride_length = j.at("stride_length").get<double>();
    g.mean_vx = j.at("mean_vx").get<double>();
    g.t_flight = j.at("t_flight").get<double>();
    g.t_stance = j.at("t_stance").get<double>();
    g.t_touchdown = j.at("t_touchdown").get<double>();
    g.t_liftoff = j.at("t_liftoff").get<double>();
    read_if(j, "residual", g.residual);
    read_if(j, "integration_dt", g.integration_dt);
    return g;
  });
}

json to_json(const ReferenceTrajectory& ref) {
  const std::size_t n = ref.samples.size();
  std::vector<double> t(n), x(n), z(n), vx(n), vz(n), foot(n), phi(n);
  std::vector<int> stance(n), cycle(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TrajectorySample& s = ref.samples[i];
    t[i] = s.t;
    x[i] = s.state.x;
    z[i] = s.state.z;
    vx[i] = s.state.vx;
    vz[i] = s.state.vz;
    foot[i] = s.state.foot_x;
    stance[i] = s.state.phase == SlipPhase::Stance ? 1 : 0;
    phi[i] = s.phi;
    cycle[i] = s.cycle;
  }
  return {{"format", "slipbound-reference"},
          {"version", 1},
          {"gait", to_json(ref.gait)},
          {"n_cycles", ref.n_cycles},
          {"dt", ref.dt},
          {"vx_span", ref.vx_span},
          {"vz_span", ref.vz_span},
          {"samples",
           {{"t", t},
            {"x", x},
            {"z", z},
            {"vx", vx},
            {"vz", vz},
            {"foot_x", foot},
            {"stance", stance},
            {"phi", phi},
            {"cycle", cycle}}}};
}

ReferenceTrajectory reference_from_json(const json& j) {
  return guarded("reference trajectory", [&] {
    if (j.at("format").get<std::string>() != "slipbound-reference") {
      throw ConfigError("not a reference trajectory document");
    }
    ReferenceTrajectory ref;
    ref.gait = gait_from_json(j.at("gait"));
    ref.n_cycles = j.at("n_cycles").get<int>();
    ref.dt = j.at("dt").get<double>();
    ref.vx_span = j.at("vx_span").get<double>();
    ref.vz_span = j.at("vz_span").get<double>();
    const json& s = j.at("samples");
    const auto t = s.at("t").get<std::vector<double>>();
    const auto x = s.at("x").get<std::vector<double>>();
    const auto z = s.at("z").get<std::vector<double>>();
    const auto vx = s.at("vx").get<std::vector<double>>();
    const auto vz = s.at("vz").get<std::vector<double>>();
    const auto foot = s.at("foot_x").get<std::vector<double>>();
    const auto stance = s.at("stance").get<std::vector<int>>();
    const auto phi = s.at("phi").get<std::vector<double>>();
    const auto cycle = s.at("cycle").get<std::vector<int>>();
    const std::size_t n = t.size();
    for (std::size_t len : {x.size(), z.size(), vx.size(), vz.size(), foot.size(), stance.size(),
                            phi.size(), cycle.size()}) {
      if (len != n) throw ConfigError("reference sample columns differ in length");
    }
    ref.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      TrajectorySample& o = ref.samples[i];
      o.t = t[i];
      o.state.x = x[i];
      o.state.z = z[i];
      o.state.vx = vx[i];
      o.state.vz = vz[i];
      o.state.foot_x = foot[i];
      o.state.phase = stance[i] ? SlipPhase::Stance : SlipPhase::Flight;
      o.phi = phi[i];
      o.cycle = cycle[i];
    }
    return ref;
  });
}

json to_json(const GaitSearchConfig& c) {
  return {{"apex_height_ratio", c.apex_height_ratio},
          {"alpha_min", c.alpha_min},
          {"alpha_max", c.alpha_max},
          {"alpha_grid", c.alpha_grid},
          {"vx_lo_ratio", c.vx_lo_ratio},
          {"vx_hi_ratio", c.vx_hi_ratio},
          {"energy_grid", c.energy_grid},
          {"velocity_tol", c.velocity_tol},
          {"integration_dt", c.integration_dt}};
}

GaitSearchConfig gait_search_from_json(const json& j, GaitSearchConfig c) {
  return guarded("gait search config", [&] {
    read_if(j, "apex_height_ratio", c.apex_height_ratio);
    read_if(j, "alpha_min", c.alpha_min);
    read_if(j, "alpha_max", c.alpha_max);
    read_if(j, "alpha_grid", c.alpha_grid);
    read_if(j, "vx_lo_ratio", c.vx_lo_ratio);
    read_if(j, "vx_hi_ratio", c.vx_hi_ratio);
    read_if(j, "energy_grid", c.energy_grid);
    read_if(j, "velocity_tol", c.velocity_tol);
    read_if(j, "integration_dt", c.integration_dt);
    return c;
  });
}

json to_json(const RobotModel& r) {
  json links = json::array();
  for (const Link& l : r.links) {
    links.push_back({{"name", l.name},
                     {"mass", l.mass},
                     {"inertia", l.inertia},
                     {"length", l.length},
                     {"com_offset", l.com_offset}});
  }
  json joints = json::array();
  for (const Joint& jt : r.joints) {
    joints.push_back({{"name", jt.name},
                      {"parent_link", jt.parent_link},
                      {"pos_min", jt.pos_min},
                      {"pos_max", jt.pos_max},
                      {"vel_limit", jt.vel_limit},
                      {"torque_limit", jt.torque_limit}});
  }
  return {{"name", r.name},
          {"links", links},
          {"joints", joints},
          {"total_mass", r.total_mass},
          {"hip_height", r.hip_height},
          {"n_stance_legs", r.n_stance_legs}};
}

RobotModel robot_from_json(const json& j) {
  return guarded("robot model", [&] {
    RobotModel r;
    r.name = j.at("name").get<std::string>();
    const json& links = j.at("links");
    const json& joints = j.at("joints");
    if (links.size() != r.links.size() || joints.size() != r.joints.size()) {
      throw ConfigError("robot model needs 5 links and 4 joints");
    }
    for (std::size_t i = 0; i < r.links.size(); ++i) {
      Link& l = r.links[i];
      l.name = links[i].at("name").get<std::string>();
      l.mass = links[i].at("mass").get<double>();
      l.inertia = links[i].at("inertia").get<double>();
      l.length = links[i].at("length").get<double>();
      l.com_offset = links[i].at("com_offset").get<double>();
    }
    for (std::size_t i = 0; i < r.joints.size(); ++i) {
      Joint& jt = r.joints[i];
      jt.name = joints[i].at("name").get<std::string>();
      jt.parent_link = joints[i].at("parent_link").get<int>();
      jt.pos_min = joints[i].at("pos_min").get<double>();
      jt.pos_max = joints[i].at("pos_max").get<double>();
      jt.vel_limit = joints[i].at("vel_limit").get<double>();
      jt.torque_limit = joints[i].at("torque_limit").get<double>();
    }
    r.total_mass = j.at("total_mass").get<double>();
    r.hip_height = j.at("hip_height").get<double>();
    read_if(j, "n_stance_legs", r.n_stance_legs);
    return r;
  });
}

json to_json(const ContactParams& c) {
  return {{"k_n", c.k_n}, {"d_n", c.d_n}, {"mu", c.mu}, {"v_slip", c.v_slip}};
}

ContactParams contact_from_json(const json& j, ContactParams c) {
  return guarded("contact parameters", [&] {
    read_if(j, "k_n", c.k_n);
    read_if(j, "d_n", c.d_n);
    read_if(j, "mu", c.mu);
    read_if(j, "v_slip", c.v_slip);
    return c;
  });
}

json to_json(const MirrorSpec& m) {
  return {{"state", perm_to_json(m.state)}, {"action", perm_to_json(m.action)}};
}

MirrorSpec mirror_from_json(const json& j) {
  return guarded("mirror spec", [&] {
    MirrorSpec m;
    m.state = perm_from_json(j.at("state"));
    m.action = perm_from_json(j.at("action"));
    m.validate();
    return m;
  });
}

json to_json(const EnvConfig& c) {
  return {{"robot_preset", c.robot_preset},
          {"robot", to_json(c.robot)},
          {"contact", to_json(c.contact)},
          {"k_rel", c.k_rel},
          {"vx_des", c.vx_des},
          {"kind", to_string(c.bound_kind)},
          {"epsilon", c.epsilon},
          {"control_hz", c.control_hz},
          {"physics_substeps", c.physics_substeps},
          {"max_cycles", c.max_cycles},
          {"init_noise", c.init_noise},
          {"seed", c.seed},
          {"gait_search", to_json(c.gait_search)},
          {"mirror", to_json(c.mirror)}};
}

EnvConfig env_config_from_json(const json& j, EnvConfig c) {
  return guarded("environment config", [&] {
    if (auto it = j.find("robot_preset"); it != j.end()) {
      c.robot_preset = it->get<std::string>();
      c.robot = robot_preset(c.robot_preset);
    }
    if (auto it = j.find("robot"); it != j.end()) c.robot = robot_from_json(*it);
    if (auto it = j.find("contact"); it != j.end()) c.contact = contact_from_json(*it, c.contact);
    read_if(j, "k_rel", c.k_rel);
    read_if(j, "vx_des", c.vx_des);
    if (auto it = j.find("kind"); it != j.end()) {
      c.bound_kind = bound_kind_from_string(it->get<std::string>());
    }
    read_if(j, "epsilon", c.epsilon);
    read_if(j, "control_hz", c.control_hz);
    read_if(j, "physics_substeps", c.physics_substeps);
    read_if(j, "max_cycles", c.max_cycles);
    read_if(j, "init_noise", c.init_noise);
    read_if(j, "seed", c.seed);
    if (auto it = j.find("gait_search"); it != j.end()) {
      c.gait_search = gait_search_from_json(*it, c.gait_search);
    }
    if (auto it = j.find("mirror"); it != j.end()) c.mirror = mirror_from_json(*it);
    return c;
  });
}

json to_json(const SacConfig& c) {
  json te = std::isnan(c.target_entropy) ? json(nullptr) : json(c.target_entropy);
  return {{"obs_dim", c.obs_dim},
          {"act_dim", c.act_dim},
          {"hidden", c.hidden},
          {"gamma", c.gamma},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"replay_capacity", c.replay_capacity},
          {"tau", c.tau},
          {"target_entropy", te},
          {"auto_alpha", c.auto_alpha},
          {"init_alpha", c.init_alpha},
          {"lambda_sym", c.lambda_sym},
          {"augment", c.augment},
          {"warmup_steps", c.warmup_steps},
          {"policy_output_scale", c.policy_output_scale},
          {"seed", c.seed}};
}

SacConfig sac_config_from_json(const json& j, SacConfig c) {
  return guarded("learner config", [&] {
    read_if(j, "obs_dim", c.obs_dim);
    read_if(j, "act_dim", c.act_dim);
    read_if(j, "hidden", c.hidden);
    read_if(j, "gamma", c.gamma);
    read_if(j, "lr", c.lr);
    read_if(j, "batch_size", c.batch_size);
    read_if(j, "replay_capacity", c.replay_capacity);
    read_if(j, "tau", c.tau);
    if (auto it = j.find("target_entropy"); it != j.end()) {
      c.target_entropy =
          it->is_null() ? std::numeric_limits<double>::quiet_NaN() : it->get<double>();
    }
    read_if(j, "auto_alpha", c.auto_alpha);
    read_if(j, "init_alpha", c.init_alpha);
    read_if(j, "lambda_sym", c.lambda_sym);
    read_if(j, "augment", c.augment);
    read_if(j, "warmup_steps", c.warmup_steps);
    read_if(j, "policy_output_scale", c.policy_output_scale);
    read_if(j, "seed", c.seed);
    return c;
  });
}

json to_json(const Mlp& net) {
  json layers = json::array();
  for (int l = 0; l < net.num_layers(); ++l) {
    const Eigen::MatrixXd& w = net.weights()[l];
    const Eigen::VectorXd& b = net.biases()[l];
    layers.push_back({{"rows", w.rows()},
                      {"cols", w.cols()},
                      {"w", std::vector<double>(w.data(), w.data() + w.size())},
                      {"b", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return {{"layers", layers}};
}

Mlp mlp_from_json(const json& j) {
  return guarded("network", [&] {
    const json& layers = j.at("layers");
    if (layers.empty()) throw ConfigError("network has no layers");
    std::vector<int> sizes{layers[0].at("cols").get<int>()};
    for (const json& l : layers) sizes.push_back(l.at("rows").get<int>());
    std::mt19937_64 rng(0);
    Mlp net(sizes, rng);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto w = layers[l].at("w").get<std::vector<double>>();
      const auto b = layers[l].at("b").get<std::vector<double>>();
      Eigen::MatrixXd& W = net.weights()[l];
      Eigen::VectorXd& B = net.biases()[l];
      if (layers[l].at("cols").get<int>() != W.cols() || static_cast<long>(w.size()) != W.size() ||
          static_cast<long>(b.size()) != B.size()) {
        throw ConfigError("network layer shapes are inconsistent");
      }
      W = Eigen::Map<const Eigen::MatrixXd>(w.data(), W.rows(), W.cols());
      B = Eigen::Map<const Eigen::VectorXd>(b.data(), B.size());
    }
    return net;
  });
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace slipbound
