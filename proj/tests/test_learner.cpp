#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>

#include "slipbound/sac.hpp"
#include "slipbound/toy_env.hpp"
#include "slipbound/trainer.hpp"

using namespace slipbound;

namespace {

Eigen::MatrixXd normal_mat(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (int j = 0; j < c; ++j) {
    for (int i = 0; i < r; ++i) m(i, j) = g(rng);
  }
  return m;
}

// Small agent with a left/right mirror: obs (l, r, shared, shared), act (l, r).
SacAgent small_agent(std::uint64_t seed, double lambda_sym = 0.5) {
  SacConfig c;
  c.obs_dim = 4;
  c.act_dim = 2;
  c.hidden = {16, 16};
  c.lambda_sym = lambda_sym;
  c.init_alpha = 0.3;
  c.policy_output_scale = 1.0;
  c.seed = seed;
  MirrorSpec m{SignedPermutation::swaps(4, {{0, 1}}), SignedPermutation::swaps(2, {{0, 1}})};
  return SacAgent(c, m);
}

Batch random_batch(int n, std::mt19937_64& rng) {
  Batch b;
  b.obs = normal_mat(4, n, rng);
  b.act = normal_mat(2, n, rng).array().tanh().matrix();
  b.rew = normal_mat(n, 1, rng);
  b.next_obs = normal_mat(4, n, rng);
  b.done = Eigen::VectorXd::Zero(n);
  b.done[1] = 1.0;
  return b;
}

bool close(double analytic, double fd) {
  return std::abs(analytic - fd) <= 1e-4 * std::max(std::abs(analytic), std::abs(fd)) + 1e-8;
}

template <typename Loss>
void check_param_gradients(Mlp& net, const MlpGrads& grads, Loss loss, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, net.num_params() - 1);
  const double h = 1e-6;
  for (int k = 0; k < 10; ++k) {
    const int i = pick(rng);
    const double x = net.param(i);
    net.set_param(i, x + h);
    const double fp = loss();
    net.set_param(i, x - h);
    const double fm = loss();
    net.set_param(i, x);
    const double fd = (fp - fm) / (2 * h);
    const double an = Mlp::grad_at(grads, i);
    CAPTURE(i);
    CAPTURE(an);
    CAPTURE(fd);
    CHECK(close(an, fd));
  }
}

double gaussian_entropy(double sigma) {
  return 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * sigma * sigma);
}

// E[log(1 - tanh(u)^2)] for u ~ N(mu, sigma^2) by composite Simpson.
double mean_tanh_correction(double mu, double sigma) {
  const int n = 20000;
  const double lo = mu - 12 * sigma;
  const double hi = mu + 12 * sigma;
  const double h = (hi - lo) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = lo + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double pdf =
        std::exp(-0.5 * std::pow((u - mu) / sigma, 2)) / (sigma * std::sqrt(2 * std::numbers::pi));
    const double t = std::tanh(u);
    s += w * pdf * std::log(1.0 - t * t);
  }
  return s * h / 3.0;
}

// Policy with constant heads: zero output weights, biases set to (mean, log std).
void set_constant_heads(GaussianPolicy& p, const std::vector<double>& mean,
                        const std::vector<double>& log_std) {
  Mlp& net = p.net();
  net.weights().back().setZero();
  const int d = p.act_dim();
  for (int i = 0; i < d; ++i) {
    net.biases().back()[i] = mean[i];
    net.biases().back()[d + i] = log_std[i];
  }
}

}  // namespace

TEST_CASE("stable log(1 - tanh^2)") {
  for (double u : {-3.0, -0.5, 0.0, 0.1, 1.0, 4.0}) {
    const double t = std::tanh(u);
    CHECK(log1m_tanh_sq(u) == doctest::Approx(std::log(1 - t * t)).epsilon(1e-12));
  }
  // Far in the tail the naive form underflows; the asymptote is 2 ln 2 - 2|u|.
  CHECK(log1m_tanh_sq(400.0) == doctest::Approx(2 * std::numbers::ln2 - 800.0));
  CHECK(log1m_tanh_sq(-400.0) == doctest::Approx(2 * std::numbers::ln2 - 800.0));
}

TEST_CASE("squashed Gaussian sampling") {
  std::mt19937_64 rng(1);
  GaussianPolicy p(3, 2, {16}, rng, 1.0);
  const Eigen::MatrixXd s = normal_mat(3, 500, rng);
  const auto smp = p.sample(s, rng);
  CHECK((smp.action.array().abs() < 1.0).all());
  CHECK(smp.log_prob.allFinite());

  // Vanishing spread: the sample is the squashed mean.
  set_constant_heads(p, {0.4, -1.3}, {-20.0, -20.0});
  const auto det = p.sample(s.leftCols(5), rng);
  for (int j = 0; j < 5; ++j) {
    CHECK(det.action(0, j) == doctest::Approx(std::tanh(0.4)).epsilon(1e-8));
    CHECK(det.action(1, j) == doctest::Approx(std::tanh(-1.3)).epsilon(1e-8));
  }
  CHECK(p.deterministic(s.leftCols(1))(0, 0) == doctest::Approx(std::tanh(0.4)));

  // The log-std head is clamped to [-20, 2].
  set_constant_heads(p, {0.0, 0.0}, {50.0, -50.0});
  const auto h = p.heads(s.leftCols(1));
  CHECK(h.var(0, 0) == doctest::Approx(std::exp(2 * kLogStdMax)));
  CHECK(h.var(1, 0) == doctest::Approx(std::exp(2 * kLogStdMin)));
}

TEST_CASE("Monte-Carlo entropy matches the closed form") {
  std::mt19937_64 rng(2);
  GaussianPolicy p(1, 2, {8}, rng, 1.0);
  const double mu[2] = {0.3, -0.8};
  const double ls[2] = {-0.4, 0.2};
  set_constant_heads(p, {mu[0], mu[1]}, {ls[0], ls[1]});
  const auto smp = p.sample(Eigen::MatrixXd::Zero(1, 100000), rng);
  const double mc = -smp.log_prob.mean();
  double exact = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double sigma = std::exp(ls[i]);
    exact += gaussian_entropy(sigma) + mean_tanh_correction(mu[i], sigma);
  }
  CHECK(std::abs(mc - exact) <= 0.01 * std::abs(exact));
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(3);
  SacAgent agent = small_agent(5);
  const Batch b = random_batch(12, rng);
  const Eigen::MatrixXd noise = normal_mat(2, 12, rng);

  SUBCASE("critic") {
    const auto cl = agent.critic_loss(b, noise);
    check_param_gradients(agent.q1(), cl.g1, [&] { return agent.critic_loss(b, noise).value; }, rng);
    check_param_gradients(agent.q2(), cl.g2, [&] { return agent.critic_loss(b, noise).value; }, rng);
  }
  SUBCASE("policy, including the symmetry term") {
    const auto pl = agent.policy_loss(b.obs, noise);
    CHECK(pl.symmetry > 0.0);
    check_param_gradients(agent.policy().net(), pl.grads,
                          [&] { return agent.policy_loss(b.obs, noise).value; }, rng);
  }
  SUBCASE("symmetry") {
    const auto sl = agent.symmetry_loss(b.obs);
    check_param_gradients(agent.policy().net(), sl.grads,
                          [&] { return agent.symmetry_loss(b.obs).value; }, rng);
    // Same value as the generic head-based evaluation.
    CHECK(sl.value ==
          doctest::Approx(slipbound::symmetry_loss(agent.policy(), b.obs, *agent.mirror_spec())));
  }
  SUBCASE("temperature") {
    const Eigen::VectorXd lp = normal_mat(12, 1, rng);
    const auto tl = agent.temperature_loss(lp);
    const double la = agent.log_alpha();
    const double h = 1e-6;
    agent.set_log_alpha(la + h);
    const double fp = agent.temperature_loss(lp).value;
    agent.set_log_alpha(la - h);
    const double fm = agent.temperature_loss(lp).value;
    agent.set_log_alpha(la);
    CHECK(close(tl.grad_log_alpha, (fp - fm) / (2 * h)));
  }
}

TEST_CASE("update") {
  std::mt19937_64 rng(4);
  SacAgent agent = small_agent(6);
  const Batch b = random_batch(8, rng);
  const LossReport r = agent.update(b, rng);
  CHECK(r.critic_batch == 16);  // mirrored copy appended
  CHECK(std::isfinite(r.critic));
  CHECK(std::isfinite(r.policy));
  CHECK(r.alpha != 0.3);
  CHECK(agent.q1_target().param(0) != agent.q1().param(0));

  SacConfig plain = agent.config();
  plain.augment = false;
  SacAgent no_aug(plain, agent.mirror_spec());
  CHECK(no_aug.update(b, rng).critic_batch == 8);

  Batch bad = b;
  bad.rew[0] = std::nan("");
  CHECK_THROWS_AS(agent.update(bad, rng), LearnerFault);

  SacConfig wrong = plain;
  wrong.gamma = 1.5;
  CHECK_THROWS(SacAgent(wrong, std::nullopt));
}

TEST_CASE("replay buffer") {
  ReplayBuffer buf(2, 1, 5);
  for (int i = 0; i < 12; ++i) {
    buf.add(Eigen::Vector2d(i, -i), Eigen::VectorXd::Constant(1, 0.1 * i), i, Eigen::Vector2d(i + 1, 0),
            i % 3 == 0);
  }
  CHECK(buf.size() == 5);
  CHECK(buf.total_added() == 12);
  const Batch c = buf.contents();
  for (int k = 0; k < 5; ++k) {
    CHECK(c.obs(0, k) == 7 + k);
    CHECK(c.rew[k] == 7 + k);
    CHECK(c.done[k] == ((7 + k) % 3 == 0 ? 1.0 : 0.0));
  }
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const Batch s = buf.sample(4, rng);
    std::set<double> seen(s.rew.data(), s.rew.data() + 4);
    CHECK(seen.size() == 4);
    for (double r : seen) {
      CHECK(r >= 7);
      CHECK(r <= 11);
    }
  }
  CHECK_THROWS(buf.sample(6, rng));
  CHECK_THROWS_AS(buf.add(Eigen::Vector3d::Zero(), Eigen::VectorXd::Zero(1), 0, Eigen::Vector2d::Zero(), false),
                  DimensionError);
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(6);
  SacAgent agent = small_agent(7);
  agent.update(random_batch(8, rng), rng);
  const auto path = std::filesystem::temp_directory_path() / "slipbound_agent.json";
  agent.save(path);
  const SacAgent back = SacAgent::load(path);
  CHECK(back.log_alpha() == agent.log_alpha());
  CHECK(back.config().hidden == agent.config().hidden);
  for (int i = 0; i < agent.policy().net().num_params(); ++i) {
    CHECK(back.policy().net().param(i) == agent.policy().net().param(i));
  }
  for (int i = 0; i < agent.q1_target().num_params(); i += 7) {
    CHECK(back.q1_target().param(i) == agent.q1_target().param(i));
    CHECK(back.q2().param(i) == agent.q2().param(i));
  }
  const Eigen::Vector4d o(0.1, -0.2, 0.3, 0.4);
  CHECK(back.act(o, rng, true) == agent.act(o, rng, true));
  CHECK(back.mirror_spec().has_value());
  CHECK_THROWS(SacAgent::load(std::filesystem::temp_directory_path() / "no_such_agent.json"));
}

TEST_CASE("toy environment") {
  SlipApexToyEnv env;
  const PeriodicGait& g = env.gait();
  CHECK(env.touchdown_angle(0.0) == g.alpha_star);
  CHECK(env.touchdown_angle(5.0) == env.touchdown_angle(1.0));

  ToyEnvConfig exact_cfg;
  exact_cfg.init_noise = 0.0;
  exact_cfg.horizon = 200;
  SlipApexToyEnv exact(exact_cfg);
  std::mt19937_64 rng(0);

  SUBCASE("the periodic gait survives open loop until rounding takes over") {
    // The fixed point is unstable in apex height, so open loop it only
    // lasts while round-off stays small.
    const EpisodeStats st =
        run_episode(exact, [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1); }, rng);
    CHECK(st.ticks >= 20);
  }
  SUBCASE("linear apex-height feedback survives to the horizon") {
    const PolicyFn deadbeat = [](const Eigen::VectorXd& o) {
      return Eigen::VectorXd::Constant(1, -0.2245 * o[0]);
    };
    for (std::uint64_t s = 0; s < 5; ++s) {
      std::mt19937_64 r(s);
      const EpisodeStats st = run_episode(env, deadbeat, r);
      CHECK(st.truncated);
      CHECK(st.ticks == env.horizon());
      CHECK(st.ret > 0.9 * env.horizon());
    }
  }
  SUBCASE("steep touchdown angles fail within one cycle") {
    env.reset(rng);
    const EnvStep s = env.step(Eigen::VectorXd::Constant(1, 1.0));
    CHECK(s.done);
    CHECK_FALSE(s.truncated);
    CHECK(s.reward == 0.0);
    CHECK_THROWS_AS(env.step(Eigen::VectorXd::Zero(1)), std::logic_error);
  }
  SUBCASE("deterministic given state and action") {
    SlipApexToyEnv a, b;
    std::mt19937_64 r1(3), r2(3);
    CHECK(a.reset(r1) == b.reset(r2));
    for (double act : {0.05, -0.02, 0.0}) {
      const EnvStep sa = a.step(Eigen::VectorXd::Constant(1, act));
      const EnvStep sb = b.step(Eigen::VectorXd::Constant(1, act));
      CHECK(sa.obs == sb.obs);
      CHECK(sa.reward == sb.reward);
    }
  }
  SUBCASE("observation") {
    const Eigen::VectorXd o = exact.reset(rng);
    CHECK(o[0] == 0.0);
    CHECK(o[1] == 0.0);
    CHECK(o[2] == doctest::Approx(10.0 * (1.05 - g.apex.vx) / 1.05).epsilon(1e-12));
  }
}

TEST_CASE("training loop") {
  auto make = [] { return std::make_unique<SlipApexToyEnv>(); };
  SacConfig c;
  c.obs_dim = 3;
  c.act_dim = 1;
  c.hidden = {16, 16};
  c.batch_size = 32;
  c.warmup_steps = 200;
  c.seed = 11;
  TrainConfig tc;
  tc.budget_steps = 800;
  tc.eval_interval = 400;
  tc.eval_episodes = 2;
  tc.seed = 11;

  SacAgent a(c, std::nullopt);
  SacAgent b(c, std::nullopt);
  const TrainResult ra = train(make, a, tc);
  const TrainResult rb = train(make, b, tc);
  CHECK(ra.fault.empty());
  CHECK(ra.steps == 800);
  CHECK(ra.updates == 600);
  CHECK(ra.evals.size() == 2);
  REQUIRE(ra.curve.size() == rb.curve.size());
  for (std::size_t i = 0; i < ra.curve.size(); ++i) {
    CHECK(ra.curve[i].ret == rb.curve[i].ret);
    CHECK(ra.curve[i].ticks == rb.curve[i].ticks);
    CHECK(ra.curve[i].ret <= ra.curve[i].ticks);
  }
  CHECK(a.policy().net().param(3) == b.policy().net().param(3));

  const auto dir = std::filesystem::temp_directory_path() / "slipbound_train";
  std::filesystem::remove_all(dir);
  tc.out_dir = dir;
  tc.budget_steps = 300;
  SacAgent d(c, std::nullopt);
  train(make, d, tc);
  CHECK(std::filesystem::exists(dir / "policy.json"));
  CHECK(std::filesystem::exists(dir / "curve.csv"));
  CHECK(std::filesystem::exists(dir / "eval.csv"));

  SacConfig wrong = c;
  wrong.obs_dim = 4;
  SacAgent w(wrong, std::nullopt);
  CHECK_THROWS_AS(train(make, w, tc), DimensionError);
}

namespace {

// Emits a non-finite reward after a while to exercise the divergence guard.
struct PoisonEnv : Environment {
  int t = 0;
  int obs_dim() const override { return 1; }
  int act_dim() const override { return 1; }
  int horizon() const override { return 10; }
  Eigen::VectorXd reset(std::mt19937_64&) override { return Eigen::VectorXd::Zero(1); }
  EnvStep step(const Eigen::VectorXd&) override {
    EnvStep s;
    s.obs = Eigen::VectorXd::Zero(1);
    s.reward = ++t > 50 ? std::nan("") : 1.0;
    s.done = t % 10 == 0;
    s.truncated = s.done;
    return s;
  }
};

}  // namespace

TEST_CASE("learner faults halt training with partial results") {
  SacConfig c;
  c.obs_dim = 1;
  c.act_dim = 1;
  c.hidden = {8};
  c.batch_size = 8;
  c.warmup_steps = 0;
  TrainConfig tc;
  tc.budget_steps = 200;
  tc.eval_interval = 0;
  SacAgent a(c, std::nullopt);
  const TrainResult r = train([] { return std::make_unique<PoisonEnv>(); }, a, tc);
  CHECK_FALSE(r.fault.empty());
  CHECK(r.steps < 200);
  CHECK(r.curve.size() >= 5);
}
