#include "slipbound/symmetry.hpp"

#include <cmath>
#include <sstream>

namespace slipbound {

bool SignedPermutation::is_involution() const {
  const int n = size();
  if (static_cast<int>(sign.size()) != n) return false;
  for (int i = 0; i < n; ++i) {
    const int j = index[i];
    if (j < 0 || j >= n) return false;
    if (index[j] != i) return false;
    if (sign[i] * sign[j] != 1.0) return false;
    if (sign[i] != 1.0 && sign[i] != -1.0) return false;
  }
  return true;
}

Eigen::VectorXd SignedPermutation::apply(const Eigen::VectorXd& v) const {
  if (v.size() != size()) {
    std::ostringstream os;
    os << "mirror expects dimension " << size() << ", got " << v.size();
    throw DimensionError(os.str());
  }
  Eigen::VectorXd out(v.size());
  for (int i = 0; i < size(); ++i) out[i] = sign[i] * v[index[i]];
  return out;
}

Eigen::MatrixXd SignedPermutation::apply_columns(const Eigen::MatrixXd& m) const {
  if (m.rows() != size()) {
    std::ostringstream os;
    os << "mirror expects " << size() << " rows, got " << m.rows();
    throw DimensionError(os.str());
  }
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (int i = 0; i < size(); ++i) out.row(i) = sign[i] * m.row(index[i]);
  return out;
}

Eigen::MatrixXd SignedPermutation::apply_transpose_columns(const Eigen::MatrixXd& m) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (int i = 0; i < size(); ++i) out.row(index[i]) += sign[i] * m.row(i);
  return out;
}

SignedPermutation SignedPermutation::identity(int n) {
  SignedPermutation p;
  p.index.resize(n);
  p.sign.assign(n, 1.0);
  for (int i = 0; i < n; ++i) p.index[i] = i;
  return p;
}

SignedPermutation SignedPermutation::swaps(int n, const std::vector<std::pair<int, int>>& pairs) {
  SignedPermutation p = identity(n);
  for (const auto& [a, b] : pairs) {
    p.index[a] = b;
    p.index[b] = a;
  }
  return p;
}

void MirrorSpec::validate() const {
  if (!state.is_involution()) throw DimensionError("state mirror is not a signed involution");
  if (!action.is_involution()) throw DimensionError("action mirror is not a signed involution");
}

Eigen::VectorXd mirror_state(const MirrorSpec& spec, const Eigen::VectorXd& obs) {
  return spec.state.apply(obs);
}

Eigen::VectorXd mirror_action(const MirrorSpec& spec, const Eigen::VectorXd& a) {
  return spec.action.apply(a);
}

SymmetryLossTerms symmetry_loss_terms(const MirrorSpec& spec, const Eigen::MatrixXd& mean,
                                      const Eigen::MatrixXd& var, const Eigen::MatrixXd& mean_m,
                                      const Eigen::MatrixXd& var_m) {
  const int batch = static_cast<int>(mean.cols());
  SymmetryLossTerms out;
  out.d_mean = Eigen::MatrixXd::Zero(mean.rows(), batch);
  out.d_var = Eigen::MatrixXd::Zero(var.rows(), batch);
  Eigen::MatrixXd d_pm = Eigen::MatrixXd::Zero(mean.rows(), batch);
  Eigen::MatrixXd d_pv = Eigen::MatrixXd::Zero(var.rows(), batch);
  if (batch == 0) {
    out.d_mean_m = d_pm;
    out.d_var_m = d_pv;
    return out;
  }

  const Eigen::MatrixXd pm = spec.action.apply_columns(mean_m);
  const Eigen::MatrixXd pv = spec.action.apply_columns(var_m);
  const double scale = 1.0 / batch;
  for (int b = 0; b < batch; ++b) {
    const Eigen::VectorXd e1 = mean.col(b) - pm.col(b);
    const Eigen::VectorXd e2 = var.col(b) - pv.col(b).cwiseAbs();
    const double n1 = e1.norm();
    const double n2 = e2.norm();
    out.value += scale * (n1 + n2);
    // Subgradient zero at the kink.
    if (n1 > 0.0) {
      out.d_mean.col(b) = scale * e1 / n1;
      d_pm.col(b) = -out.d_mean.col(b);
    }
    if (n2 > 0.0) {
      out.d_var.col(b) = scale * e2 / n2;
      const Eigen::VectorXd sgn = pv.col(b).unaryExpr([](double x) {
        return static_cast<double>((x > 0.0) - (x < 0.0));
      });
      d_pv.col(b) = -out.d_var.col(b).cwiseProduct(sgn);
    }
  }
  out.d_mean_m = spec.action.apply_transpose_columns(d_pm);
  out.d_var_m = spec.action.apply_transpose_columns(d_pv);
  return out;
}

Batch augment_batch(const Batch& batch, const MirrorSpec& spec) {
  const int n = batch.size();
  Batch out;
  out.obs.resize(batch.obs.rows(), 2 * n);
  out.act.resize(batch.act.rows(), 2 * n);
  out.next_obs.resize(batch.next_obs.rows(), 2 * n);
  out.rew.resize(2 * n);
  out.done.resize(2 * n);
  out.obs << batch.obs, spec.state.apply_columns(batch.obs);
  out.act << batch.act, spec.action.apply_columns(batch.act);
  out.next_obs << batch.next_obs, spec.state.apply_columns(batch.next_obs);
  out.rew << batch.rew, batch.rew;
  out.done << batch.done, batch.done;
  return out;
}

}  // namespace slipbound
