#pragma once

#include <array>
#include <memory>
#include <optional>
#include <stdexcept>

#include "slipbound/gait.hpp"

namespace slipbound {

/// CoM position and velocity. The planar simulator keeps y = vy = 0.
struct ComState {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double vz = 0.0;

  std::array<double, 6> as_array() const { return {x, y, z, vx, vy, vz}; }
};

ComState com_state_of(const SlipState& s);

enum class BoundKind { Slip, Const };

const char* to_string(BoundKind k);
BoundKind bound_kind_from_string(const std::string& s);

/// Signals a query past the end of the reference; distinct from a violation.
class ReferenceExhausted : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Space-time box around a reference. A state is inside when every
/// coordinate deviation is strictly smaller than the matching rho entry.
struct SpaceTimeBound {
  BoundKind kind = BoundKind::Slip;
  double epsilon = 0.0;
  std::array<double, 6> rho{};
  std::shared_ptr<const ReferenceTrajectory> reference;  // Slip only
  double vx_des = 0.0;                                   // Const only

  /// Centre of the box at time t.
  ComState center(double t) const;
};

SpaceTimeBound make_slip_bound(std::shared_ptr<const ReferenceTrajectory> ref, double epsilon,
                               double r0);

SpaceTimeBound make_const_bound(double vx_des, double epsilon, double r0, double vx_span);

struct BoundCheck {
  bool inside = true;
  std::optional<int> violated;  // first violating coordinate
  std::array<double, 6> deviation{};
};

/// Full containment report. Throws ReferenceExhausted past the reference end
/// for slip bounds.
BoundCheck check_bound(const SpaceTimeBound& bound, const ComState& s, double t);

bool contains(const SpaceTimeBound& bound, const ComState& s, double t);

int survival_reward(const SpaceTimeBound& bound, const ComState& s, double t);

}  // namespace slipbound
