#include "slipbound/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace slipbound {

void MlpGrads::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& other) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] += other.weights[i];
    biases[i] += other.biases[i];
  }
  return *this;
}

Mlp::Mlp(const std::vector<int>& sizes, std::mt19937_64& rng, double output_scale) {
  if (sizes.size() < 2) throw std::invalid_argument("an MLP needs at least two layer sizes");
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l];
    const int fan_out = sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Eigen::MatrixXd w(fan_out, fan_in);
    Eigen::VectorXd b(fan_out);
    for (int i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    for (int i = 0; i < b.size(); ++i) b[i] = u(rng);
    if (l + 2 == sizes.size()) {
      w *= output_scale;
      b *= output_scale;
    }
    weights_.push_back(std::move(w));
    biases_.push_back(std::move(b));
  }
}

std::vector<int> Mlp::sizes() const {
  std::vector<int> s{input_dim()};
  for (const auto& w : weights_) s.push_back(static_cast<int>(w.rows()));
  return s;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != input_dim()) throw std::invalid_argument("MLP input dimension mismatch");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Eigen::MatrixXd h = x;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = weights_[l] * h;
    z.colwise() += biases_[l];
    if (cache) {
      cache->inputs.push_back(h);
      cache->pre.push_back(z);
    }
    h = (l + 1 < num_layers()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_out,
                              MlpGrads& grads) const {
  Eigen::MatrixXd g = grad_out;
  for (int l = num_layers() - 1; l >= 0; --l) {
    if (l + 1 < num_layers()) {
      g = g.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
    }
    grads.weights[l].noalias() += g * cache.inputs[l].transpose();
    grads.biases[l] += g.rowwise().sum();
    g = weights_[l].transpose() * g;
  }
  return g;
}

MlpGrads Mlp::zero_grads() const {
  MlpGrads g;
  for (const auto& w : weights_) g.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : biases_) g.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return g;
}

void Mlp::soft_update(const Mlp& source, double tau) {
  for (int l = 0; l < num_layers(); ++l) {
    weights_[l] = (1.0 - tau) * weights_[l] + tau * source.weights_[l];
    biases_[l] = (1.0 - tau) * biases_[l] + tau * source.biases_[l];
  }
}

int Mlp::num_params() const {
  int n = 0;
  for (int l = 0; l < num_layers(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

double& Mlp::param_ref(int i) {
  for (int l = 0; l < num_layers(); ++l) {
    if (i < weights_[l].size()) return weights_[l].data()[i];
    i -= weights_[l].size();
    if (i < biases_[l].size()) return biases_[l][i];
    i -= biases_[l].size();
  }
  throw std::out_of_range("parameter index out of range");
}

double Mlp::param(int i) const { return const_cast<Mlp*>(this)->param_ref(i); }

void Mlp::set_param(int i, double v) { param_ref(i) = v; }

double Mlp::grad_at(const MlpGrads& g, int i) {
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    if (i < g.weights[l].size()) return g.weights[l].data()[i];
    i -= g.weights[l].size();
    if (i < g.biases[l].size()) return g.biases[l][i];
    i -= g.biases[l].size();
  }
  throw std::out_of_range("gradient index out of range");
}

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(net.zero_grads()), v_(net.zero_grads()) {}

void Adam::step(Mlp& net, const MlpGrads& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  };
  for (int l = 0; l < net.num_layers(); ++l) {
    update(net.weights()[l], grads.weights[l], m_.weights[l], v_.weights[l]);
    update(net.biases()[l], grads.biases[l], m_.biases[l], v_.biases[l]);
  }
}

void ScalarAdam::step(double& value, double grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad * grad;
  const double mhat = m_ / (1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const double vhat = v_ / (1.0 - std::pow(beta2_, static_cast<double>(t_)));
  value -= lr_ * mhat / (std::sqrt(vhat) + eps_);
}

}  // namespace slipbound
