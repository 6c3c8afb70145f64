#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace slipbound {

/// Gradient buffers shaped like an Mlp's parameters.
struct MlpGrads {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  void set_zero();
  MlpGrads& operator+=(const MlpGrads& other);
};

/// Fully connected network with ReLU hidden layers and a linear output.
/// Inputs and outputs are column-per-sample matrices.
class Mlp {
 public:
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  };

  Mlp() = default;
  /// Uniform fan-in initialization; the output layer is scaled by
  /// output_scale.
  Mlp(const std::vector<int>& sizes, std::mt19937_64& rng, double output_scale = 1.0);

  int input_dim() const { return static_cast<int>(weights_.front().cols()); }
  int output_dim() const { return static_cast<int>(weights_.back().rows()); }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  std::vector<int> sizes() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

  /// Accumulates parameter gradients into `grads` and returns the gradient
  /// with respect to the input.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& grad_out,
                           MlpGrads& grads) const;

  MlpGrads zero_grads() const;

  /// Polyak update: this = (1 - tau) * this + tau * source.
  void soft_update(const Mlp& source, double tau);

  // Flat parameter view, used by gradient checks and serialization.
  int num_params() const;
  double param(int i) const;
  void set_param(int i, double v);
  static double grad_at(const MlpGrads& g, int i);

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

 private:
  double& param_ref(int i);

  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

/// Adaptive moment estimation over an Mlp's parameters.
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Mlp& net, const MlpGrads& grads);

 private:
  double lr_ = 3e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  MlpGrads m_;
  MlpGrads v_;
};

/// Adam for a single scalar parameter.
class ScalarAdam {
 public:
  explicit ScalarAdam(double lr = 3e-4, double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(double& value, double grad);

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  double m_ = 0.0;
  double v_ = 0.0;
};

}  // namespace slipbound
