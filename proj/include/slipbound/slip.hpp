#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace slipbound {

/// Raised when a model parameter lies outside its domain (non-positive mass,
/// unsupported leg count, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a SLIP state is used in a phase it is not valid for, e.g. a
/// stance derivative requested for an extended leg.
class PhaseError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Spring-loaded inverted pendulum parameters.
///
/// The leg stiffness follows k = k_rel * m * g / r0. When more than one leg
/// is expected in contact at once, the stance phase uses a single equivalent
/// leg of stiffness n_stance_legs * k.
struct SlipParams {
  double m = 1.0;
  double r0 = 1.0;
  double k = 1.0;
  double k_rel = 1.0;
  int n_stance_legs = 1;
  double g = 9.81;

  double effective_stiffness() const { return n_stance_legs * k; }
};

SlipParams slip_params_from_robot(double m, double r0, double k_rel,
                                  int n_stance_legs, double g = 9.81);

/// Inverse of the stiffness relation: k_rel = k * r0 / (m * g).
double relative_stiffness(double k, double m, double r0, double g);

enum class SlipPhase { Flight, Stance };

struct SlipState {
  double x = 0.0;
  double z = 0.0;
  double vx = 0.0;
  double vz = 0.0;
  SlipPhase phase = SlipPhase::Flight;
  double foot_x = 0.0;  // meaningful only in Stance

  double leg_length() const;
};

struct SlipDerivative {
  double dx = 0.0;
  double dz = 0.0;
  double dvx = 0.0;
  double dvz = 0.0;
};

enum class SlipEventKind { Touchdown, Liftoff, Apex, Fall };

struct SlipEvent {
  SlipEventKind kind = SlipEventKind::Apex;
  double time = 0.0;
  SlipState state;
};

struct ForceVec {
  double x = 0.0;
  double z = 0.0;
};

/// Closed-form ballistic flight.
SlipState flight_step(const SlipState& s, double dt, double g);

SlipDerivative stance_derivative(const SlipState& s, const SlipParams& p);

/// Advances a stance state by h with one classical RK4 step. No event
/// handling; callers keep h small and inside the stance interval.
SlipState stance_advance(const SlipState& s, double h, const SlipParams& p);

/// Spring force acting on the CoM during stance; zero in flight.
ForceVec grf(const SlipState& s, const SlipParams& p);

/// Kinetic + gravitational + spring potential energy.
double slip_energy(const SlipState& s, const SlipParams& p);

enum class CycleFailure {
  None,
  Fall,        // z <= 0 or vx <= 0 during stance
  Stiffness,   // leg compressed below 0.2 r0 without lifting off
  NoApex,      // liftoff with non-positive vertical velocity
  NoTouchdown  // apex too low for the requested touchdown angle
};

const char* to_string(CycleFailure f);

struct TimedState {
  double t = 0.0;
  SlipState state;
};

struct CycleResult {
  std::vector<TimedState> trajectory;
  std::vector<SlipEvent> events;
  CycleFailure failure = CycleFailure::None;

  bool ok() const { return failure == CycleFailure::None; }
};

/// Event localization tolerance on time, seconds.
inline constexpr double kEventTimeTol = 1e-12;

/// Integrates one apex-to-apex cycle. Flight uses the closed form, stance
/// classical RK4 at step dt aligned to the sampling grid, with the liftoff
/// event localized by bisection. The touchdown angle alpha is measured from
/// the vertical, foot placed ahead of the CoM.
CycleResult integrate_cycle(const SlipState& apex, double alpha,
                            const SlipParams& p, double dt);

struct ApexState {
  double z = 0.0;
  double vx = 0.0;
};

class CycleError : public std::runtime_error {
 public:
  CycleError(CycleFailure failure, const std::string& what)
      : std::runtime_error(what), failure_(failure) {}
  CycleFailure failure() const { return failure_; }

 private:
  CycleFailure failure_;
};

/// Apex-to-apex map. Throws CycleError on cycle failure and ParameterError on
/// an invalid touchdown angle or apex.
ApexState apex_return_map(double apex_z, double apex_vx, double alpha,
                          const SlipParams& p, double dt = 1e-4);

/// Non-throwing variant used by searches.
std::optional<ApexState> try_apex_return_map(double apex_z, double apex_vx,
                                             double alpha, const SlipParams& p,
                                             double dt = 1e-4);

}  // namespace slipbound
