#include "slipbound/bound.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace slipbound {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

ComState com_state_of(const SlipState& s) { return {s.x, 0.0, s.z, s.vx, 0.0, s.vz}; }

const char* to_string(BoundKind k) { return k == BoundKind::Slip ? "slip" : "const"; }

BoundKind bound_kind_from_string(const std::string& s) {
  if (s == "slip") return BoundKind::Slip;
  if (s == "const") return BoundKind::Const;
  throw ParameterError("unknown bound kind '" + s + "' (expected slip or const)");
}

SpaceTimeBound make_slip_bound(std::shared_ptr<const ReferenceTrajectory> ref, double epsilon,
                               double r0) {
  if (!(epsilon > 0.0)) throw ParameterError("bound epsilon must be positive");
  if (!ref) throw ParameterError("slip bound needs a reference trajectory");
  SpaceTimeBound b;
  b.kind = BoundKind::Slip;
  b.epsilon = epsilon;
  b.rho = {kInf,
           epsilon * r0 / 2.0,
           epsilon * r0 / 4.0,
           epsilon * ref->vx_span,
           epsilon * ref->vz_span / 2.0,
           epsilon * ref->vz_span / 2.0};
  b.reference = std::move(ref);
  return b;
}

SpaceTimeBound make_const_bound(double vx_des, double epsilon, double r0, double vx_span) {
  if (!(vx_des > 0.0)) throw ParameterError("const bound needs a positive target velocity");
  if (!(epsilon > 0.0)) throw ParameterError("bound epsilon must be positive");
  SpaceTimeBound b;
  b.kind = BoundKind::Const;
  b.epsilon = epsilon;
  b.vx_des = vx_des;
  b.rho = {kInf, epsilon * r0 / 2.0, kInf, epsilon * vx_span, kInf, kInf};
  return b;
}

ComState SpaceTimeBound::center(double t) const {
  if (kind == BoundKind::Const) return {0.0, 0.0, 0.0, vx_des, 0.0, 0.0};
  if (t < 0.0 || t > reference->duration() + 1e-9) {
    std::ostringstream os;
    os << "time " << t << " s past the reference end " << reference->duration() << " s";
    throw ReferenceExhausted(os.str());
  }
  return com_state_of(reference->state_at(t));
}

BoundCheck check_bound(const SpaceTimeBound& bound, const ComState& s, double t) {
  const auto c = bound.center(t).as_array();
  const auto v = s.as_array();
  BoundCheck out;
  for (int i = 0; i < 6; ++i) {
    out.deviation[i] = v[i] - c[i];
    // Infinite entries never bind, including for infinite deviations.
    if (std::isinf(bound.rho[i])) continue;
    if (!(std::abs(out.deviation[i]) < bound.rho[i]) && out.inside) {
      out.inside = false;
      out.violated = i;
    }
  }
  return out;
}

bool contains(const SpaceTimeBound& bound, const ComState& s, double t) {
  return check_bound(bound, s, t).inside;
}

int survival_reward(const SpaceTimeBound& bound, const ComState& s, double t) {
  return contains(bound, s, t) ? 1 : 0;
}

}  // namespace slipbound
