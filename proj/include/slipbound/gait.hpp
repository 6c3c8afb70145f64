#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slipbound/slip.hpp"

namespace slipbound {

class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for time queries outside a reference trajectory.
class QueryError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// An apex-to-apex fixed point of the SLIP return map. Times are measured
/// from the apex that starts the cycle.
struct PeriodicGait {
  SlipParams params;
  double alpha_star = 0.0;
  SlipState apex;
  double period_T = 0.0;
  double stride_length = 0.0;
  double mean_vx = 0.0;
  double t_flight = 0.0;
  double t_stance = 0.0;
  double t_touchdown = 0.0;  // apex -> touchdown
  double t_liftoff = 0.0;    // apex -> liftoff
  double residual = 0.0;     // max |return map - apex| over (z, vx)
  double integration_dt = 1e-4;
};

struct GaitSearchConfig {
  // Apex height of the searched gaits, as a multiple of r0.
  double apex_height_ratio = 1.05;
  double alpha_min = 0.02;
  double alpha_max = 1.5;
  int alpha_grid = 150;
  // Apex forward speed bracket, as multiples of the target mean velocity.
  double vx_lo_ratio = 0.9;
  double vx_hi_ratio = 2.0;
  int energy_grid = 24;
  double velocity_tol = 1e-7;
  double integration_dt = 1e-4;
};

/// Two-level bisection: the inner level brackets the touchdown angle on a
/// grid and bisects for an apex-height fixed point at fixed total energy; the
/// outer level bisects total energy until the mean forward velocity matches.
PeriodicGait find_periodic_gait(const SlipParams& p, double vx_des,
                                const GaitSearchConfig& cfg = {});

/// Inner level only: the fixed-point touchdown angle at a given apex.
/// Returns nullopt when no sign change of the height residual is found.
std::optional<PeriodicGait> periodic_gait_at_apex(const SlipParams& p, double apex_z,
                                                  double apex_vx,
                                                  const GaitSearchConfig& cfg = {});

struct TrajectorySample {
  double t = 0.0;
  SlipState state;
  double phi = 0.0;
  int cycle = 0;
};

/// Periodic reference CoM trajectory. Each cycle starts at apex and is
/// sampled on its own grid t = cycle * T + j * dt, with the touchdown and
/// liftoff states inserted exactly. A closing apex sample ends the last cycle.
struct ReferenceTrajectory {
  PeriodicGait gait;
  int n_cycles = 0;
  double dt = 0.0;
  std::vector<TrajectorySample> samples;
  double vx_span = 0.0;
  double vz_span = 0.0;

  double duration() const { return samples.empty() ? 0.0 : samples.back().t; }

  /// Reference state at time t: snaps to the nearest sample within dt/2,
  /// otherwise interpolates linearly between neighbours.
  SlipState state_at(double t) const;
};

ReferenceTrajectory reference_trajectory(const PeriodicGait& gait, int n_cycles,
                                         double dt = 1.0 / 200.0);

/// Gait phase in [0, 2pi): 0 -> pi across flight (liftoff to touchdown),
/// pi -> 2pi across stance.
double phase_angle_at(const ReferenceTrajectory& ref, double t);

/// (cos phi, sin phi) embedding of the gait phase.
std::pair<double, double> phase_at(const ReferenceTrajectory& ref, double t);

enum class TrajectoryFormat { Csv, Json };

void export_trajectory(const ReferenceTrajectory& ref, const std::filesystem::path& path,
                       TrajectoryFormat format);

ReferenceTrajectory import_trajectory_json(const std::filesystem::path& path);

}  // namespace slipbound
