#include "slipbound/sac.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "slipbound/config_io.hpp"

namespace slipbound {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

Eigen::MatrixXd standard_normal(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = n(rng);
  }
  return m;
}

Eigen::MatrixXd clamp_log_std(const Eigen::MatrixXd& raw) {
  return raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

// Derivative mask of the log-std clamp.
Eigen::MatrixXd clamp_mask(const Eigen::MatrixXd& raw) {
  return ((raw.array() >= kLogStdMin) && (raw.array() <= kLogStdMax)).cast<double>().matrix();
}

bool all_finite(const MlpGrads& g) {
  for (const auto& w : g.weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : g.biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

}  // namespace

double SacConfig::resolved_target_entropy() const {
  return std::isnan(target_entropy) ? -static_cast<double>(act_dim) : target_entropy;
}

void SacConfig::validate() const {
  if (obs_dim < 1 || act_dim < 1) throw std::invalid_argument("SAC needs positive dimensions");
  if (hidden.empty()) throw std::invalid_argument("SAC needs at least one hidden layer");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("hidden layer sizes must be positive");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0, 1]");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (replay_capacity < static_cast<std::size_t>(batch_size)) {
    throw std::invalid_argument("replay capacity must hold at least one batch");
  }
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in (0, 1]");
  if (!(init_alpha > 0.0)) throw std::invalid_argument("initial temperature must be positive");
  if (!(lambda_sym >= 0.0)) throw std::invalid_argument("lambda_sym must be non-negative");
  if (warmup_steps < 0) throw std::invalid_argument("warmup steps must be non-negative");
}

double log1m_tanh_sq(double u) {
  // log(1 - tanh(u)^2) = 2 (log 2 - u - softplus(-2u))
  const double x = -2.0 * u;
  const double softplus = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return 2.0 * (std::numbers::ln2 - u - softplus);
}

GaussianPolicy::GaussianPolicy(int obs_dim, int act_dim, const std::vector<int>& hidden,
                               std::mt19937_64& rng, double output_scale)
    : act_dim_(act_dim) {
  std::vector<int> sizes{obs_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(2 * act_dim);
  net_ = Mlp(sizes, rng, output_scale);
}

GaussianPolicy::Heads GaussianPolicy::heads(const Eigen::MatrixXd& states) const {
  const Eigen::MatrixXd out = net_.forward(states);
  Heads h;
  h.mean = out.topRows(act_dim_);
  h.var = (2.0 * clamp_log_std(out.bottomRows(act_dim_))).array().exp().matrix();
  return h;
}

GaussianPolicy::Sample GaussianPolicy::sample(const Eigen::MatrixXd& states,
                                              const Eigen::MatrixXd& noise) const {
  const Eigen::MatrixXd out = net_.forward(states);
  const Eigen::MatrixXd mean = out.topRows(act_dim_);
  const Eigen::MatrixXd ls = clamp_log_std(out.bottomRows(act_dim_));
  const Eigen::MatrixXd u = mean + ls.array().exp().matrix().cwiseProduct(noise);
  Sample s;
  s.action = u.array().tanh().matrix();
  s.log_prob.resize(states.cols());
  for (int b = 0; b < states.cols(); ++b) {
    double lp = 0.0;
    for (int i = 0; i < act_dim_; ++i) {
      lp += -0.5 * noise(i, b) * noise(i, b) - ls(i, b) - kHalfLog2Pi - log1m_tanh_sq(u(i, b));
    }
    s.log_prob[b] = lp;
  }
  return s;
}

GaussianPolicy::Sample GaussianPolicy::sample(const Eigen::MatrixXd& states,
                                              std::mt19937_64& rng) const {
  return sample(states, standard_normal(act_dim_, static_cast<int>(states.cols()), rng));
}

Eigen::MatrixXd GaussianPolicy::deterministic(const Eigen::MatrixXd& states) const {
  return net_.forward(states).topRows(act_dim_).array().tanh().matrix();
}

SacAgent::SacAgent(SacConfig cfg, std::optional<MirrorSpec> mirror)
    : cfg_(std::move(cfg)), mirror_(std::move(mirror)) {
  cfg_.validate();
  if (mirror_) {
    mirror_->validate();
    if (mirror_->state.size() != cfg_.obs_dim || mirror_->action.size() != cfg_.act_dim) {
      throw DimensionError("mirror spec does not match the agent dimensions");
    }
  }
  std::mt19937_64 rng(cfg_.seed);
  policy_ = GaussianPolicy(cfg_.obs_dim, cfg_.act_dim, cfg_.hidden, rng, cfg_.policy_output_scale);
  std::vector<int> qsizes{cfg_.obs_dim + cfg_.act_dim};
  qsizes.insert(qsizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
  qsizes.push_back(1);
  q1_ = Mlp(qsizes, rng);
  q2_ = Mlp(qsizes, rng);
  q1_target_ = q1_;
  q2_target_ = q2_;
  log_alpha_ = std::log(cfg_.init_alpha);
  policy_opt_ = Adam(policy_.net(), cfg_.lr);
  q1_opt_ = Adam(q1_, cfg_.lr);
  q2_opt_ = Adam(q2_, cfg_.lr);
  alpha_opt_ = ScalarAdam(cfg_.lr);
}

double SacAgent::alpha() const { return std::exp(log_alpha_); }

Eigen::MatrixXd SacAgent::q_input(const Eigen::MatrixXd& obs, const Eigen::MatrixXd& act) const {
  Eigen::MatrixXd x(obs.rows() + act.rows(), obs.cols());
  x << obs, act;
  return x;
}

Eigen::VectorXd SacAgent::act(const Eigen::VectorXd& obs, std::mt19937_64& rng,
                              bool deterministic) const {
  if (obs.size() != cfg_.obs_dim) throw DimensionError("observation dimension mismatch");
  const Eigen::MatrixXd x = obs;
  if (deterministic) return policy_.deterministic(x).col(0);
  return policy_.sample(x, rng).action.col(0);
}

Batch SacAgent::training_batch(const Batch& batch) const {
  if (mirror_ && cfg_.augment) return augment_batch(batch, *mirror_);
  return batch;
}

SacAgent::CriticLoss SacAgent::critic_loss(const Batch& batch,
                                           const Eigen::MatrixXd& next_noise) const {
  const int n = batch.size();
  const auto next = policy_.sample(batch.next_obs, next_noise);
  const Eigen::MatrixXd next_in = q_input(batch.next_obs, next.action);
  const Eigen::RowVectorXd tq =
      q1_target_.forward(next_in).row(0).cwiseMin(q2_target_.forward(next_in).row(0));
  Eigen::RowVectorXd y(n);
  for (int b = 0; b < n; ++b) {
    y[b] = batch.rew[b] +
           cfg_.gamma * (1.0 - batch.done[b]) * (tq[b] - alpha() * next.log_prob[b]);
  }

  const Eigen::MatrixXd in = q_input(batch.obs, batch.act);
  Mlp::Cache c1;
  Mlp::Cache c2;
  const Eigen::RowVectorXd e1 = q1_.forward(in, &c1).row(0) - y;
  const Eigen::RowVectorXd e2 = q2_.forward(in, &c2).row(0) - y;
  CriticLoss out;
  out.value = (e1.squaredNorm() + e2.squaredNorm()) / n;
  out.g1 = q1_.zero_grads();
  out.g2 = q2_.zero_grads();
  q1_.backward(c1, (2.0 / n) * e1, out.g1);
  q2_.backward(c2, (2.0 / n) * e2, out.g2);
  return out;
}

SacAgent::PolicyLoss SacAgent::policy_loss(const Eigen::MatrixXd& states,
                                           const Eigen::MatrixXd& noise) const {
  const int n = static_cast<int>(states.cols());
  const int d = cfg_.act_dim;
  const double alpha = this->alpha();
  Mlp::Cache cache;
  const Eigen::MatrixXd out = policy_.net().forward(states, &cache);
  const Eigen::MatrixXd mean = out.topRows(d);
  const Eigen::MatrixXd raw_ls = out.bottomRows(d);
  const Eigen::MatrixXd ls = clamp_log_std(raw_ls);
  const Eigen::MatrixXd sigma = ls.array().exp().matrix();
  const Eigen::MatrixXd u = mean + sigma.cwiseProduct(noise);
  const Eigen::MatrixXd a = u.array().tanh().matrix();

  PolicyLoss res;
  res.log_prob.resize(n);
  for (int b = 0; b < n; ++b) {
    double lp = 0.0;
    for (int i = 0; i < d; ++i) {
      lp += -0.5 * noise(i, b) * noise(i, b) - ls(i, b) - kHalfLog2Pi - log1m_tanh_sq(u(i, b));
    }
    res.log_prob[b] = lp;
  }

  const Eigen::MatrixXd in = q_input(states, a);
  Mlp::Cache c1;
  Mlp::Cache c2;
  const Eigen::RowVectorXd v1 = q1_.forward(in, &c1).row(0);
  const Eigen::RowVectorXd v2 = q2_.forward(in, &c2).row(0);
  Eigen::RowVectorXd g1 = Eigen::RowVectorXd::Zero(n);
  Eigen::RowVectorXd g2 = Eigen::RowVectorXd::Zero(n);
  double value = 0.0;
  for (int b = 0; b < n; ++b) {
    const bool first = v1[b] <= v2[b];
    value += (alpha * res.log_prob[b] - (first ? v1[b] : v2[b])) / n;
    (first ? g1 : g2)[b] = -1.0 / n;
  }
  // Only the action rows of the critic input gradients matter.
  MlpGrads scratch1 = q1_.zero_grads();
  MlpGrads scratch2 = q2_.zero_grads();
  const Eigen::MatrixXd d_in =
      q1_.backward(c1, g1, scratch1) + q2_.backward(c2, g2, scratch2);
  const Eigen::MatrixXd d_a = d_in.bottomRows(d);

  const Eigen::MatrixXd one_m_a2 = (1.0 - a.array().square()).matrix();
  const Eigen::MatrixXd g_u = (2.0 * alpha / n) * a + d_a.cwiseProduct(one_m_a2);
  Eigen::MatrixXd g_out(2 * d, n);
  g_out.topRows(d) = g_u;
  g_out.bottomRows(d) = (g_u.cwiseProduct(sigma).cwiseProduct(noise).array() - alpha / n)
                            .matrix()
                            .cwiseProduct(clamp_mask(raw_ls));
  res.grads = policy_.net().zero_grads();
  policy_.net().backward(cache, g_out, res.grads);

  if (mirror_ && cfg_.lambda_sym > 0.0) {
    SymmetryLoss sym = symmetry_loss(states);
    res.symmetry = sym.value;
    value += cfg_.lambda_sym * sym.value;
    for (std::size_t l = 0; l < res.grads.weights.size(); ++l) {
      res.grads.weights[l] += cfg_.lambda_sym * sym.grads.weights[l];
      res.grads.biases[l] += cfg_.lambda_sym * sym.grads.biases[l];
    }
  }
  res.value = value;
  return res;
}

SacAgent::SymmetryLoss SacAgent::symmetry_loss(const Eigen::MatrixXd& states) const {
  if (!mirror_) throw std::logic_error("symmetry loss needs a mirror spec");
  const int d = cfg_.act_dim;
  const Mlp& net = policy_.net();
  Mlp::Cache c;
  Mlp::Cache cm;
  const Eigen::MatrixXd out = net.forward(states, &c);
  const Eigen::MatrixXd out_m = net.forward(mirror_->state.apply_columns(states), &cm);
  const Eigen::MatrixXd raw = out.bottomRows(d);
  const Eigen::MatrixXd raw_m = out_m.bottomRows(d);
  const Eigen::MatrixXd var = (2.0 * clamp_log_std(raw)).array().exp().matrix();
  const Eigen::MatrixXd var_m = (2.0 * clamp_log_std(raw_m)).array().exp().matrix();
  const SymmetryLossTerms t =
      symmetry_loss_terms(*mirror_, out.topRows(d), var, out_m.topRows(d), var_m);

  SymmetryLoss res;
  res.value = t.value;
  res.grads = net.zero_grads();
  Eigen::MatrixXd g(2 * d, states.cols());
  g.topRows(d) = t.d_mean;
  g.bottomRows(d) = (2.0 * t.d_var.cwiseProduct(var)).cwiseProduct(clamp_mask(raw));
  net.backward(c, g, res.grads);
  g.topRows(d) = t.d_mean_m;
  g.bottomRows(d) = (2.0 * t.d_var_m.cwiseProduct(var_m)).cwiseProduct(clamp_mask(raw_m));
  net.backward(cm, g, res.grads);
  return res;
}

SacAgent::TemperatureLoss SacAgent::temperature_loss(const Eigen::VectorXd& log_prob) const {
  const double h = cfg_.resolved_target_entropy();
  TemperatureLoss res;
  res.value = log_prob.size() == 0 ? 0.0 : -alpha() * ((log_prob.array() + h).mean());
  // d/dlog_alpha of -exp(log_alpha) * c is the loss itself.
  res.grad_log_alpha = res.value;
  return res;
}

LossReport SacAgent::update(const Batch& batch, std::mt19937_64& rng) {
  const Batch tb = training_batch(batch);
  const int n = tb.size();
  LossReport report;
  report.critic_batch = n;

  const CriticLoss cl = critic_loss(tb, standard_normal(cfg_.act_dim, n, rng));
  if (!std::isfinite(cl.value) || !all_finite(cl.g1) || !all_finite(cl.g2)) {
    throw LearnerFault("non-finite critic loss");
  }
  q1_opt_.step(q1_, cl.g1);
  q2_opt_.step(q2_, cl.g2);

  const PolicyLoss pl = policy_loss(tb.obs, standard_normal(cfg_.act_dim, n, rng));
  if (!std::isfinite(pl.value) || !all_finite(pl.grads)) {
    throw LearnerFault("non-finite policy loss");
  }
  policy_opt_.step(policy_.net(), pl.grads);

  const TemperatureLoss tl = temperature_loss(pl.log_prob);
  if (cfg_.auto_alpha) {
    if (!std::isfinite(tl.value)) throw LearnerFault("non-finite temperature loss");
    alpha_opt_.step(log_alpha_, tl.grad_log_alpha);
  }

  q1_target_.soft_update(q1_, cfg_.tau);
  q2_target_.soft_update(q2_, cfg_.tau);

  report.critic = cl.value;
  report.policy = pl.value;
  report.symmetry = pl.symmetry;
  report.temperature = tl.value;
  report.alpha = alpha();
  report.entropy = -pl.log_prob.mean();
  return report;
}

void SacAgent::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = "slipbound-sac";
  j["version"] = 1;
  j["config"] = to_json(cfg_);
  j["mirror"] = mirror_ ? to_json(*mirror_) : nlohmann::json(nullptr);
  j["policy"] = to_json(policy_.net());
  j["q1"] = to_json(q1_);
  j["q2"] = to_json(q2_);
  j["q1_target"] = to_json(q1_target_);
  j["q2_target"] = to_json(q2_target_);
  j["log_alpha"] = log_alpha_;
  write_json_file(j, path);
}

SacAgent SacAgent::load(const std::filesystem::path& path) {
  const nlohmann::json j = read_json_file(path);
  try {
    if (j.at("format").get<std::string>() != "slipbound-sac") {
      throw ConfigError("not a policy checkpoint: " + path.string());
    }
    std::optional<MirrorSpec> mirror;
    if (!j.at("mirror").is_null()) mirror = mirror_from_json(j.at("mirror"));
    SacAgent agent(sac_config_from_json(j.at("config")), mirror);
    auto load_net = [&](const char* key, Mlp& net) {
      Mlp loaded = mlp_from_json(j.at(key));
      if (loaded.sizes() != net.sizes()) {
        throw ConfigError(std::string("checkpoint network '") + key + "' has the wrong shape");
      }
      net = std::move(loaded);
    };
    load_net("policy", agent.policy_.net());
    load_net("q1", agent.q1_);
    load_net("q2", agent.q2_);
    load_net("q1_target", agent.q1_target_);
    load_net("q2_target", agent.q2_target_);
    agent.log_alpha_ = j.at("log_alpha").get<double>();
    return agent;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

ReplayBuffer::ReplayBuffer(int obs_dim, int act_dim, std::size_t capacity)
    : obs_dim_(obs_dim), act_dim_(act_dim), capacity_(capacity),
      stride_(2 * obs_dim + act_dim + 2) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayBuffer::add(const Eigen::VectorXd& obs, const Eigen::VectorXd& act, double rew,
                       const Eigen::VectorXd& next_obs, bool done) {
  if (obs.size() != obs_dim_ || next_obs.size() != obs_dim_ || act.size() != act_dim_) {
    throw DimensionError("transition does not match the replay buffer dimensions");
  }
  if (size_ < capacity_) data_.resize((size_ + 1) * stride_);
  double* row = data_.data() + next_ * stride_;
  std::copy(obs.data(), obs.data() + obs_dim_, row);
  row += obs_dim_;
  std::copy(act.data(), act.data() + act_dim_, row);
  row += act_dim_;
  *row++ = rew;
  std::copy(next_obs.data(), next_obs.data() + obs_dim_, row);
  row += obs_dim_;
  *row = done ? 1.0 : 0.0;
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++total_;
}

Batch ReplayBuffer::gather(const std::vector<std::size_t>& idx) const {
  const int n = static_cast<int>(idx.size());
  Batch b;
  b.obs.resize(obs_dim_, n);
  b.act.resize(act_dim_, n);
  b.rew.resize(n);
  b.next_obs.resize(obs_dim_, n);
  b.done.resize(n);
  for (int c = 0; c < n; ++c) {
    const double* row = data_.data() + idx[c] * stride_;
    b.obs.col(c) = Eigen::Map<const Eigen::VectorXd>(row, obs_dim_);
    row += obs_dim_;
    b.act.col(c) = Eigen::Map<const Eigen::VectorXd>(row, act_dim_);
    row += act_dim_;
    b.rew[c] = *row++;
    b.next_obs.col(c) = Eigen::Map<const Eigen::VectorXd>(row, obs_dim_);
    row += obs_dim_;
    b.done[c] = *row;
  }
  return b;
}

Batch ReplayBuffer::sample(int n, std::mt19937_64& rng) const {
  if (n < 0 || static_cast<std::size_t>(n) > size_) {
    throw std::out_of_range("not enough transitions in the replay buffer");
  }
  // Floyd's algorithm: n distinct indices out of size_.
  std::vector<std::size_t> idx;
  idx.reserve(n);
  for (std::size_t j = size_ - n; j < size_; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (std::find(idx.begin(), idx.end(), t) == idx.end()) {
      idx.push_back(t);
    } else {
      idx.push_back(j);
    }
  }
  return gather(idx);
}

Batch ReplayBuffer::contents() const {
  std::vector<std::size_t> idx(size_);
  const std::size_t start = size_ < capacity_ ? 0 : next_;
  for (std::size_t i = 0; i < size_; ++i) idx[i] = (start + i) % capacity_;
  return gather(idx);
}

}  // namespace slipbound
