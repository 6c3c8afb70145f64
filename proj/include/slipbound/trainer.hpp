#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "slipbound/environment.hpp"
#include "slipbound/sac.hpp"

namespace slipbound {

struct EpisodeStats {
  double ret = 0.0;
  int ticks = 0;
  double cot = std::nan("");
  bool truncated = false;  // reached the horizon
  std::string error;
};

using PolicyFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

EpisodeStats run_episode(Environment& env, const PolicyFn& policy, std::mt19937_64& rng);

struct EvalResult {
  long steps = 0;
  double mean_return = 0.0;
  double mean_ticks = 0.0;
  double mean_cot = std::nan("");  // over episodes with a finite value
  double survival_rate = 0.0;      // fraction reaching the horizon
  std::vector<EpisodeStats> episodes;
};

/// Fraction of episodes lasting at least `fraction` of the horizon.
double fraction_reaching(const EvalResult& r, int horizon, double fraction);

/// Deterministic-policy rollouts with seeds seed, seed + 1, ...
EvalResult evaluate(Environment& env, const SacAgent& agent, int episodes, std::uint64_t seed);
EvalResult evaluate(Environment& env, const PolicyFn& policy, int episodes, std::uint64_t seed);

struct CurveRow {
  int episode = 0;
  long steps = 0;
  double ret = 0.0;
  int ticks = 0;
  double cot = std::nan("");
};

struct TrainConfig {
  long budget_steps = 100'000;
  long eval_interval = 10'000;  // 0 disables periodic evaluation
  int eval_episodes = 3;
  long checkpoint_interval = 0;  // 0 disables periodic checkpoints
  std::optional<std::filesystem::path> out_dir;
  // Stop once a periodic evaluation satisfies this predicate.
  std::function<bool(const EvalResult&)> early_stop;
  std::uint64_t seed = 0;
  std::function<void(const CurveRow&)> on_episode;
  std::function<void(const EvalResult&)> on_eval;
};

struct TrainResult {
  std::vector<CurveRow> curve;
  std::vector<EvalResult> evals;
  long steps = 0;
  long updates = 0;
  bool stopped_early = false;
  std::string fault;  // non-empty when training aborted; results are partial
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

/// Off-policy training loop: uniform random actions during warmup, then one
/// gradient update per environment step. Transitions that end by the horizon
/// are stored as non-terminal so the critic keeps bootstrapping.
TrainResult train(const EnvFactory& make_env, SacAgent& agent, const TrainConfig& cfg);

void write_curve_csv(const std::vector<CurveRow>& curve, const std::filesystem::path& path);
void write_eval_csv(const std::vector<EvalResult>& evals, const std::filesystem::path& path);

}  // namespace slipbound
