#include "slipbound/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

namespace slipbound {

EpisodeStats run_episode(Environment& env, const PolicyFn& policy, std::mt19937_64& rng) {
  EpisodeStats st;
  Eigen::VectorXd obs = env.reset(rng);
  for (int t = 0; t < env.horizon(); ++t) {
    const EnvStep s = env.step(policy(obs));
    st.ret += s.reward;
    ++st.ticks;
    obs = s.obs;
    if (s.done) {
      st.truncated = s.truncated;
      st.error = s.error;
      break;
    }
  }
  st.cot = env.episode_cost_of_transport();
  return st;
}

EvalResult evaluate(Environment& env, const PolicyFn& policy, int episodes, std::uint64_t seed) {
  EvalResult r;
  double cot_sum = 0.0;
  int cot_n = 0;
  for (int e = 0; e < episodes; ++e) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(e));
    EpisodeStats st = run_episode(env, policy, rng);
    r.mean_return += st.ret / episodes;
    r.mean_ticks += static_cast<double>(st.ticks) / episodes;
    r.survival_rate += (st.truncated ? 1.0 : 0.0) / episodes;
    if (std::isfinite(st.cot)) {
      cot_sum += st.cot;
      ++cot_n;
    }
    r.episodes.push_back(std::move(st));
  }
  if (cot_n > 0) r.mean_cot = cot_sum / cot_n;
  return r;
}

double fraction_reaching(const EvalResult& r, int horizon, double fraction) {
  if (r.episodes.empty()) return 0.0;
  int n = 0;
  for (const EpisodeStats& e : r.episodes) {
    if (e.ticks >= fraction * horizon) ++n;
  }
  return static_cast<double>(n) / r.episodes.size();
}

EvalResult evaluate(Environment& env, const SacAgent& agent, int episodes, std::uint64_t seed) {
  std::mt19937_64 unused(0);
  return evaluate(
      env, [&](const Eigen::VectorXd& o) { return agent.act(o, unused, true); }, episodes, seed);
}

TrainResult train(const EnvFactory& make_env, SacAgent& agent, const TrainConfig& cfg) {
  const SacConfig& ac = agent.config();
  std::unique_ptr<Environment> env = make_env();
  std::unique_ptr<Environment> eval_env;
  if (env->obs_dim() != ac.obs_dim || env->act_dim() != ac.act_dim) {
    throw DimensionError("agent and environment dimensions differ");
  }
  if (cfg.out_dir) std::filesystem::create_directories(*cfg.out_dir);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  ReplayBuffer buffer(ac.obs_dim, ac.act_dim,
                      std::min<std::size_t>(ac.replay_capacity,
                                            static_cast<std::size_t>(std::max(1L, cfg.budget_steps))));
  TrainResult res;

  auto run_eval = [&]() {
    if (!eval_env) eval_env = make_env();
    EvalResult ev = evaluate(*eval_env, agent, cfg.eval_episodes, cfg.seed + 1'000'003);
    ev.steps = res.steps;
    if (cfg.on_eval) cfg.on_eval(ev);
    res.evals.push_back(std::move(ev));
  };

  try {
    Eigen::VectorXd obs = env->reset(rng);
    CurveRow row;
    Eigen::VectorXd a(ac.act_dim);
    while (res.steps < cfg.budget_steps) {
      if (res.steps < ac.warmup_steps) {
        for (int i = 0; i < ac.act_dim; ++i) a[i] = uniform(rng);
      } else {
        a = agent.act(obs, rng, false);
      }
      const EnvStep s = env->step(a);
      ++res.steps;
      buffer.add(obs, a, s.reward, s.obs, s.done && !s.truncated);
      row.ret += s.reward;
      ++row.ticks;
      obs = s.obs;

      if (res.steps > ac.warmup_steps && buffer.size() >= static_cast<std::size_t>(ac.batch_size)) {
        agent.update(buffer.sample(ac.batch_size, rng), rng);
        ++res.updates;
      }

      if (s.done) {
        row.episode = static_cast<int>(res.curve.size());
        row.steps = res.steps;
        row.cot = env->episode_cost_of_transport();
        if (cfg.on_episode) cfg.on_episode(row);
        res.curve.push_back(row);
        row = CurveRow{};
        obs = env->reset(rng);
      }

      if (cfg.checkpoint_interval > 0 && cfg.out_dir && res.steps % cfg.checkpoint_interval == 0) {
        agent.save(*cfg.out_dir / "checkpoint.json");
      }
      if (cfg.eval_interval > 0 && res.steps % cfg.eval_interval == 0) {
        run_eval();
        if (cfg.early_stop && cfg.early_stop(res.evals.back())) {
          res.stopped_early = true;
          break;
        }
      }
    }
  } catch (const std::exception& e) {
    // Keep what was learned so far; the caller decides how to report it.
    res.fault = e.what();
  }

  if (cfg.out_dir) {
    agent.save(*cfg.out_dir / "policy.json");
    write_curve_csv(res.curve, *cfg.out_dir / "curve.csv");
    write_eval_csv(res.evals, *cfg.out_dir / "eval.csv");
  }
  return res;
}

void write_curve_csv(const std::vector<CurveRow>& curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << std::setprecision(10) << "episode,steps,return,survival_ticks,cot\n";
  for (const CurveRow& r : curve) {
    out << r.episode << ',' << r.steps << ',' << r.ret << ',' << r.ticks << ',' << r.cot << '\n';
  }
}

void write_eval_csv(const std::vector<EvalResult>& evals, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << std::setprecision(10) << "steps,mean_return,mean_ticks,survival_rate,mean_cot\n";
  for (const EvalResult& r : evals) {
    out << r.steps << ',' << r.mean_return << ',' << r.mean_ticks << ',' << r.survival_rate << ','
        << r.mean_cot << '\n';
  }
}

}  // namespace slipbound
