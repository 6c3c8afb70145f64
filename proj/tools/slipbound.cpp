// slipbound: gait synthesis, bound inspection, training, evaluation and
// trace export from the command line.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "slipbound/config_io.hpp"
#include "slipbound/env.hpp"
#include "slipbound/gait.hpp"
#include "slipbound/sac.hpp"
#include "slipbound/toy_env.hpp"
#include "slipbound/trainer.hpp"

namespace fs = std::filesystem;
using namespace slipbound;

namespace {

constexpr const char* kOutEnv = "SLIPBOUND_OUT_DIR";

// Raised for bad inputs discovered after parsing (missing checkpoint, ...).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string preset;
  std::optional<double> vx;
  std::optional<double> eps;
  std::optional<std::string> bound;
  std::uint64_t seed = 0;
  std::string out;
  long budget = 100000;
  int cycles = 2;
  std::string task = "locomotion";
  std::string env_config;
  std::string sac_config;
  std::optional<double> lambda_sym;
  long eval_interval = 10000;
  int eval_episodes = 3;
  std::string checkpoint;
  bool zero_policy = false;
  int episodes = 10;
};

fs::path out_dir(const Options& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return "out";
}

EnvConfig env_config(const Options& o) {
  if (o.preset.empty() && o.env_config.empty()) throw UsageError("--preset is required");
  EnvConfig cfg = o.preset.empty() ? EnvConfig{} : make_env_config(o.preset);
  if (!o.env_config.empty()) cfg = env_config_from_json(read_json_file(o.env_config), cfg);
  if (o.bound) {
    cfg.bound_kind = bound_kind_from_string(*o.bound);
    if (!o.eps) cfg.epsilon = default_epsilon(cfg.bound_kind);
  }
  if (o.eps) cfg.epsilon = *o.eps;
  if (o.vx) cfg.vx_des = *o.vx;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

void write_envelope_csv(const SpaceTimeBound& b, const ReferenceTrajectory& ref,
                        const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << std::setprecision(12);
  out << "t,x,z,vx,vz,phase_tag,rho_y,rho_z,rho_vx,rho_vz,"
         "z_lo,z_hi,vx_lo,vx_hi,vz_lo,vz_hi\n";
  for (const TrajectorySample& s : ref.samples) {
    const ComState c = b.center(s.t);
    out << s.t << ',' << s.state.x << ',' << s.state.z << ',' << s.state.vx << ',' << s.state.vz
        << ',' << (s.state.phase == SlipPhase::Stance ? "stance" : "flight") << ',' << b.rho[1]
        << ',' << b.rho[2] << ',' << b.rho[3] << ',' << b.rho[5] << ',' << c.z - b.rho[2] << ','
        << c.z + b.rho[2] << ',' << c.vx - b.rho[3] << ',' << c.vx + b.rho[3] << ','
        << c.vz - b.rho[5] << ',' << c.vz + b.rho[5] << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void print_rho(const SpaceTimeBound& b) {
  static const char* names[6] = {"x", "y", "z", "vx", "vy", "vz"};
  std::cout << "bound " << to_string(b.kind) << ", epsilon " << b.epsilon << "\n";
  for (int k = 0; k < 6; ++k) {
    std::cout << "  rho_" << std::left << std::setw(3) << names[k] << std::right << ' '
              << b.rho[k] << '\n';
  }
}

int cmd_gait(const Options& o) {
  EnvConfig cfg = env_config(o);
  cfg.max_cycles = o.cycles;
  const EnvAssets assets = build_env_assets(cfg);
  const ReferenceTrajectory& ref = *assets.reference;
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  write_json_file(to_json(ref.gait), dir / "gait.json");
  export_trajectory(ref, dir / "trajectory.csv", TrajectoryFormat::Csv);
  write_envelope_csv(assets.bound, ref, dir / "envelope.csv");

  const PeriodicGait& g = ref.gait;
  std::cout << std::setprecision(8) << "preset " << cfg.robot_preset << ", k " << g.params.k
            << " N/m, alpha* " << g.alpha_star << " rad\n"
            << "apex z " << g.apex.z << " m, apex vx " << g.apex.vx << " m/s\n"
            << "period " << g.period_T << " s (flight " << g.t_flight << ", stance "
            << g.t_stance << "), stride " << g.stride_length << " m, mean vx " << g.mean_vx
            << " m/s\n"
            << "wrote " << (dir / "gait.json").string() << ", trajectory.csv, envelope.csv\n";
  return 0;
}

int cmd_bound(const Options& o) {
  EnvConfig cfg = env_config(o);
  cfg.max_cycles = o.cycles;
  const EnvAssets assets = build_env_assets(cfg);
  print_rho(assets.bound);
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  json j;
  j["kind"] = to_string(assets.bound.kind);
  j["epsilon"] = assets.bound.epsilon;
  json rho = json::array();
  for (double r : assets.bound.rho) rho.push_back(std::isinf(r) ? json(nullptr) : json(r));
  j["rho"] = rho;
  j["vx_des"] = cfg.vx_des;
  write_json_file(j, dir / "bound.json");
  write_envelope_csv(assets.bound, *assets.reference, dir / "envelope.csv");
  std::cout << "wrote " << (dir / "bound.json").string() << ", envelope.csv\n";
  return 0;
}

SacConfig sac_config(const Options& o, int obs_dim, int act_dim) {
  SacConfig c;
  if (!o.sac_config.empty()) c = sac_config_from_json(read_json_file(o.sac_config), c);
  c.obs_dim = obs_dim;
  c.act_dim = act_dim;
  c.seed = o.seed;
  if (o.lambda_sym) c.lambda_sym = *o.lambda_sym;
  return c;
}

int cmd_train(const Options& o) {
  const fs::path dir = out_dir(o);
  EnvFactory make;
  std::optional<MirrorSpec> mirror;
  SacConfig sc;
  json env_json;
  if (o.task == "toy") {
    make = [] { return std::make_unique<SlipApexToyEnv>(); };
    sc = sac_config(o, 3, 1);
    env_json = json{{"task", "toy"}};
  } else {
    const EnvConfig cfg = env_config(o);
    const EnvAssets assets = build_env_assets(cfg);
    make = [cfg, assets] { return std::make_unique<LocomotionEnv>(cfg, assets); };
    mirror = cfg.mirror;
    sc = sac_config(o, kObsDim, kActDim);
    env_json = to_json(cfg);
  }
  fs::create_directories(dir);
  write_json_file(env_json, dir / "env.json");
  write_json_file(to_json(sc), dir / "sac.json");

  SacAgent agent(sc, mirror);
  TrainConfig tc;
  tc.budget_steps = o.budget;
  tc.eval_interval = o.eval_interval;
  tc.eval_episodes = o.eval_episodes;
  tc.checkpoint_interval = o.eval_interval;
  tc.out_dir = dir;
  tc.seed = o.seed;
  tc.on_eval = [](const EvalResult& r) {
    std::cout << "step " << std::setw(8) << r.steps << "  return " << std::setw(9)
              << std::setprecision(5) << r.mean_return << "  survival " << std::setw(7)
              << r.mean_ticks << " ticks  reached " << r.survival_rate << "  CoT " << r.mean_cot
              << std::endl;
  };
  const TrainResult res = train(make, agent, tc);
  std::cout << "trained " << res.steps << " steps, " << res.updates << " updates, "
            << res.curve.size() << " episodes; wrote " << (dir / "policy.json").string()
            << ", curve.csv, eval.csv\n";
  if (!res.fault.empty()) {
    std::cerr << "training halted: " << res.fault << '\n';
    return 1;
  }
  return 0;
}

struct Loaded {
  std::unique_ptr<Environment> env;
  std::optional<SacAgent> agent;
  std::optional<MirrorSpec> mirror;
};

// Environment from the checkpoint directory's env.json when present,
// otherwise from the command-line flags.
Loaded load_for_eval(const Options& o) {
  Loaded l;
  json env_json;
  if (!o.zero_policy) {
    if (o.checkpoint.empty()) throw UsageError("--checkpoint or --zero-policy is required");
    if (!fs::exists(o.checkpoint)) throw UsageError("checkpoint not found: " + o.checkpoint);
    l.agent = SacAgent::load(o.checkpoint);
    const fs::path side = fs::path(o.checkpoint).parent_path() / "env.json";
    if (o.preset.empty() && o.env_config.empty() && fs::exists(side)) env_json = read_json_file(side);
  }
  if (env_json.is_object() && env_json.value("task", "") == "toy") {
    l.env = std::make_unique<SlipApexToyEnv>();
  } else {
    EnvConfig cfg = env_json.is_object() ? env_config_from_json(env_json) : env_config(o);
    l.mirror = cfg.mirror;
    l.env = std::make_unique<LocomotionEnv>(cfg);
  }
  if (l.agent && (l.agent->config().obs_dim != l.env->obs_dim() ||
                  l.agent->config().act_dim != l.env->act_dim())) {
    throw UsageError("checkpoint does not match the environment dimensions");
  }
  return l;
}

int cmd_eval(const Options& o) {
  Loaded l = load_for_eval(o);
  PolicyFn policy;
  std::mt19937_64 unused(0);
  // Mirror deviation of the mean action, averaged over visited states.
  double sym_dev = 0.0;
  long sym_n = 0;
  const std::optional<MirrorSpec> mirror = l.agent ? l.agent->mirror_spec() : std::nullopt;
  if (l.agent) {
    policy = [&](const Eigen::VectorXd& obs) {
      const Eigen::VectorXd a = l.agent->act(obs, unused, true);
      if (mirror) {
        const Eigen::VectorXd am =
            mirror_action(*mirror, l.agent->act(mirror_state(*mirror, obs), unused, true));
        sym_dev += (a - am).norm();
        ++sym_n;
      }
      return a;
    };
  } else {
    policy = [&](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(l.env->act_dim()); };
  }
  const EvalResult r = evaluate(*l.env, policy, o.episodes, o.seed);
  const double dev = sym_n > 0 ? sym_dev / sym_n : 0.0;

  std::cout << std::setprecision(6) << "episodes          " << o.episodes << '\n'
            << "mean survival     " << r.mean_ticks << " ticks (horizon " << l.env->horizon()
            << ")\n"
            << "survival rate     " << r.survival_rate << '\n'
            << "mean return       " << r.mean_return << '\n'
            << "mean CoT          " << r.mean_cot << '\n'
            << "mirror deviation  " << dev << '\n';

  json j;
  j["episodes"] = o.episodes;
  j["seed"] = o.seed;
  j["horizon"] = l.env->horizon();
  j["mean_survival_ticks"] = r.mean_ticks;
  j["survival_rate"] = r.survival_rate;
  j["mean_return"] = r.mean_return;
  j["mean_cot"] = std::isfinite(r.mean_cot) ? json(r.mean_cot) : json(nullptr);
  j["mirror_deviation"] = dev;
  json eps = json::array();
  for (const EpisodeStats& e : r.episodes) {
    eps.push_back({{"return", e.ret},
                   {"ticks", e.ticks},
                   {"truncated", e.truncated},
                   {"cot", std::isfinite(e.cot) ? json(e.cot) : json(nullptr)}});
  }
  j["per_episode"] = eps;
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  write_json_file(j, dir / "eval.json");
  std::cout << "wrote " << (dir / "eval.json").string() << '\n';
  return 0;
}

int cmd_export(const Options& o) {
  Loaded l = load_for_eval(o);
  auto* env = dynamic_cast<LocomotionEnv*>(l.env.get());
  if (!env) throw UsageError("export needs a locomotion checkpoint");
  std::mt19937_64 unused(0);
  env->reset_episode(o.seed);
  for (bool done = false; !done;) {
    Action a{};
    if (l.agent) {
      const Observation ob = env->observe(env->state());
      const Eigen::VectorXd act =
          l.agent->act(Eigen::Map<const Eigen::VectorXd>(ob.data(), kObsDim), unused, true);
      for (int j = 0; j < kActDim; ++j) a[j] = act[j];
    }
    done = env->step_episode(a).done;
  }
  const fs::path dir = out_dir(o);
  fs::create_directories(dir);
  write_trace_csv(env->trace(), dir / "trace.csv");
  std::cout << "episode lasted " << env->trace().rows.size() << " ticks; wrote "
            << (dir / "trace.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SLIP-guided legged locomotion: reference gaits, space-time bounds, training"};
  app.require_subcommand(1);
  Options o;

  auto robot_flags = [&](CLI::App* c, bool preset_required) {
    auto* p = c->add_option("--preset", o.preset, "robot preset")
                  ->check(CLI::IsMember({"bolt", "solo"}));
    if (preset_required) p->required();
    c->add_option("--vx", o.vx, "target forward velocity [m/s]");
    c->add_option("--eps", o.eps, "bound tolerance epsilon");
    c->add_option("--bound", o.bound, "bound kind")->check(CLI::IsMember({"slip", "const"}));
    c->add_option("--env-config", o.env_config, "environment config JSON")
        ->check(CLI::ExistingFile);
  };
  auto common = [&](CLI::App* c) {
    c->add_option("--seed", o.seed, "random seed");
    c->add_option("--out", o.out, std::string("output directory (default $") + kOutEnv + " or ./out)");
  };

  auto* gait = app.add_subcommand("gait", "synthesize the reference gait and its bound envelope");
  robot_flags(gait, true);
  common(gait);
  gait->add_option("--cycles", o.cycles, "reference cycles to write")->check(CLI::PositiveNumber);

  auto* bound = app.add_subcommand("bound", "print the bound half-widths and envelope");
  robot_flags(bound, true);
  common(bound);
  bound->add_option("--cycles", o.cycles, "reference cycles to write")->check(CLI::PositiveNumber);

  auto* tr = app.add_subcommand("train", "train a policy");
  robot_flags(tr, false);
  common(tr);
  tr->add_option("--budget", o.budget, "environment steps")->check(CLI::PositiveNumber);
  tr->add_option("--task", o.task, "training task")->check(CLI::IsMember({"locomotion", "toy"}));
  tr->add_option("--sac-config", o.sac_config, "learner config JSON")->check(CLI::ExistingFile);
  tr->add_option("--lambda-sym", o.lambda_sym, "symmetry loss weight");
  tr->add_option("--eval-interval", o.eval_interval, "steps between evaluations (0: none)");
  tr->add_option("--eval-episodes", o.eval_episodes, "episodes per evaluation");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  robot_flags(ev, false);
  common(ev);
  ev->add_option("--checkpoint", o.checkpoint, "policy checkpoint (policy.json)");
  ev->add_flag("--zero-policy", o.zero_policy, "evaluate the zero-torque policy instead");
  ev->add_option("--episodes", o.episodes, "evaluation episodes")->check(CLI::PositiveNumber);

  auto* ex = app.add_subcommand("export", "run one episode and write its trace CSV");
  robot_flags(ex, false);
  common(ex);
  ex->add_option("--checkpoint", o.checkpoint, "policy checkpoint (policy.json)");
  ex->add_flag("--zero-policy", o.zero_policy, "use the zero-torque policy instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gait) return cmd_gait(o);
    if (*bound) return cmd_bound(o);
    if (*tr) {
      if (o.task == "locomotion" && o.preset.empty() && o.env_config.empty()) {
        throw UsageError("--preset is required");
      }
      return cmd_train(o);
    }
    if (*ev) return cmd_eval(o);
    if (*ex) return cmd_export(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
