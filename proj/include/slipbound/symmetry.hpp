#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace slipbound {

/// Signed permutation: out[i] = sign[i] * in[index[i]].
struct SignedPermutation {
  std::vector<int> index;
  std::vector<double> sign;

  int size() const { return static_cast<int>(index.size()); }
  bool is_involution() const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  /// Applies to every column.
  Eigen::MatrixXd apply_columns(const Eigen::MatrixXd& m) const;
  /// Transpose map, used to pull gradients back through apply.
  Eigen::MatrixXd apply_transpose_columns(const Eigen::MatrixXd& m) const;

  static SignedPermutation identity(int n);
  /// Identity with the listed index pairs swapped, all signs +1.
  static SignedPermutation swaps(int n, const std::vector<std::pair<int, int>>& pairs);
};

/// Mirror operators over observations and actions.
struct MirrorSpec {
  SignedPermutation state;
  SignedPermutation action;

  void validate() const;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

Eigen::VectorXd mirror_state(const MirrorSpec& spec, const Eigen::VectorXd& obs);
Eigen::VectorXd mirror_action(const MirrorSpec& spec, const Eigen::VectorXd& a);

/// Symmetry loss evaluated from policy head outputs. Columns are batch
/// entries; `mean_m` / `var_m` are the heads evaluated on the mirrored
/// states. Per entry:
///   |mean - Psi_a(mean_m)| + |var - abs(Psi_a(var_m))|
/// averaged over the batch. Gradients are with respect to the four inputs.
struct SymmetryLossTerms {
  double value = 0.0;
  Eigen::MatrixXd d_mean;
  Eigen::MatrixXd d_var;
  Eigen::MatrixXd d_mean_m;
  Eigen::MatrixXd d_var_m;
};

SymmetryLossTerms symmetry_loss_terms(const MirrorSpec& spec, const Eigen::MatrixXd& mean,
                                      const Eigen::MatrixXd& var, const Eigen::MatrixXd& mean_m,
                                      const Eigen::MatrixXd& var_m);

/// Loss of any policy exposing `heads(states) -> {mean, var}` (pre-squash
/// Gaussian heads, states as columns).
template <typename Policy>
double symmetry_loss(const Policy& policy, const Eigen::MatrixXd& states, const MirrorSpec& spec) {
  const auto [mean, var] = policy.heads(states);
  const auto [mean_m, var_m] = policy.heads(spec.state.apply_columns(states));
  return symmetry_loss_terms(spec, mean, var, mean_m, var_m).value;
}

/// Batch of transitions, one column per entry.
struct Batch {
  Eigen::MatrixXd obs;
  Eigen::MatrixXd act;
  Eigen::VectorXd rew;
  Eigen::MatrixXd next_obs;
  Eigen::VectorXd done;

  int size() const { return static_cast<int>(rew.size()); }
};

/// Original batch followed by its mirrored copy; rewards and done flags are
/// carried over unchanged.
Batch augment_batch(const Batch& batch, const MirrorSpec& spec);

}  // namespace slipbound
