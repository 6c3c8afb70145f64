#include "slipbound/gait.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "slipbound/config_io.hpp"

namespace slipbound {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kAlphaTol = 1e-14;

std::optional<double> height_residual(const SlipParams& p, double z, double vx, double alpha,
                                      double dt) {
  const auto next = try_apex_return_map(z, vx, alpha, p, dt);
  if (!next) return std::nullopt;
  return next->z - z;
}

PeriodicGait describe_gait(const SlipParams& p, double z, double vx, double alpha, double dt) {
  const SlipState apex{0.0, z, vx, 0.0, SlipPhase::Flight, 0.0};
  const CycleResult c = integrate_cycle(apex, alpha, p, dt);
  if (!c.ok()) throw SynthesisError("fixed-point cycle failed on re-integration");
  PeriodicGait g;
  g.params = p;
  g.alpha_star = alpha;
  g.apex = apex;
  g.integration_dt = dt;
  for (const SlipEvent& e : c.events) {
    if (e.kind == SlipEventKind::Touchdown) g.t_touchdown = e.time;
    if (e.kind == SlipEventKind::Liftoff) g.t_liftoff = e.time;
  }
  const SlipEvent& next = c.events.back();
  g.period_T = next.time;
  g.stride_length = next.state.x - apex.x;
  g.mean_vx = g.stride_length / g.period_T;
  g.t_stance = g.t_liftoff - g.t_touchdown;
  g.t_flight = g.period_T - g.t_stance;
  g.residual = std::max(std::abs(next.state.z - z), std::abs(next.state.vx - vx));
  return g;
}

}  // namespace

std::optional<PeriodicGait> periodic_gait_at_apex(const SlipParams& p, double apex_z,
                                                  double apex_vx, const GaitSearchConfig& cfg) {
  const double a_max = std::min(cfg.alpha_max, std::numbers::pi / 2.0 - 1e-6);
  const double step = (a_max - cfg.alpha_min) / cfg.alpha_grid;
  std::optional<double> prev = height_residual(p, apex_z, apex_vx, cfg.alpha_min,
                                               cfg.integration_dt);
  double prev_alpha = cfg.alpha_min;
  for (int i = 1; i <= cfg.alpha_grid; ++i) {
    const double alpha = cfg.alpha_min + i * step;
    const std::optional<double> cur = height_residual(p, apex_z, apex_vx, alpha,
                                                      cfg.integration_dt);
    if (prev && cur && (*prev == 0.0 || (*prev < 0.0) != (*cur < 0.0))) {
      double lo = prev_alpha;
      double hi = alpha;
      double f_lo = *prev;
      double f_hi = *cur;
      for (int it = 0; it < 200 && hi - lo > kAlphaTol && f_lo != 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto f_mid = height_residual(p, apex_z, apex_vx, mid, cfg.integration_dt);
        if (!f_mid) break;
        if ((*f_mid < 0.0) == (f_lo < 0.0)) {
          lo = mid;
          f_lo = *f_mid;
        } else {
          hi = mid;
          f_hi = *f_mid;
        }
      }
      const double alpha_star = std::abs(f_lo) <= std::abs(f_hi) ? lo : hi;
      return describe_gait(p, apex_z, apex_vx, alpha_star, cfg.integration_dt);
    }
    prev = cur;
    prev_alpha = alpha;
  }
  return std::nullopt;
}

PeriodicGait find_periodic_gait(const SlipParams& p, double vx_des, const GaitSearchConfig& cfg) {
  if (!(vx_des > 0.0)) throw ParameterError("target velocity must be positive");
  const double z = cfg.apex_height_ratio * p.r0;
  auto energy_of = [&](double vx) { return p.m * p.g * z + 0.5 * p.m * vx * vx; };
  auto vx_of = [&](double e) { return std::sqrt(2.0 * (e / p.m - p.g * z)); };

  const double e_lo = energy_of(cfg.vx_lo_ratio * vx_des);
  const double e_hi = energy_of(cfg.vx_hi_ratio * vx_des);
  auto fail = [&](const std::string& why) {
    std::ostringstream os;
    os << "no periodic gait for vx_des=" << vx_des << ": " << why << " (energy range [" << e_lo
       << ", " << e_hi << "] J, alpha range [" << cfg.alpha_min << ", " << cfg.alpha_max
       << "] rad, apex height " << z << " m)";
    return SynthesisError(os.str());
  };

  // Scan the energy bracket for a sign change of mean_vx - vx_des.
  std::optional<PeriodicGait> prev;
  double prev_e = e_lo;
  for (int i = 0; i <= cfg.energy_grid; ++i) {
    const double e = e_lo + (e_hi - e_lo) * i / cfg.energy_grid;
    std::optional<PeriodicGait> cur = periodic_gait_at_apex(p, z, vx_of(e), cfg);
    if (cur && std::abs(cur->mean_vx - vx_des) <= cfg.velocity_tol) return *cur;
    if (prev && cur && (prev->mean_vx < vx_des) != (cur->mean_vx < vx_des)) {
      double lo = prev_e;
      double hi = e;
      PeriodicGait g_lo = *prev;
      PeriodicGait g_hi = *cur;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const auto g_mid = periodic_gait_at_apex(p, z, vx_of(mid), cfg);
        if (!g_mid) throw fail("inner search lost the fixed point inside the energy bracket");
        if (std::abs(g_mid->mean_vx - vx_des) <= cfg.velocity_tol) return *g_mid;
        if ((g_mid->mean_vx < vx_des) == (g_lo.mean_vx < vx_des)) {
          lo = mid;
          g_lo = *g_mid;
        } else {
          hi = mid;
          g_hi = *g_mid;
        }
        if (hi - lo <= 1e-15 * hi) break;
      }
      return std::abs(g_lo.mean_vx - vx_des) <= std::abs(g_hi.mean_vx - vx_des) ? g_lo : g_hi;
    }
    prev = std::move(cur);
    prev_e = e;
  }
  throw fail("mean velocity not bracketed");
}

double phase_angle_at(const ReferenceTrajectory& ref, double t) {
  if (t < 0.0 || t > ref.duration() + 1e-9) {
    std::ostringstream os;
    os << "time " << t << " s outside reference [0, " << ref.duration() << "]";
    throw QueryError(os.str());
  }
  const PeriodicGait& g = ref.gait;
  const double c = std::min(std::floor(t / g.period_T), static_cast<double>(ref.n_cycles - 1));
  const double tau = t - c * g.period_T;
  const double t_rise = g.period_T - g.t_liftoff;
  double phi = 0.0;
  if (tau < g.t_touchdown) {
    phi = std::numbers::pi * (t_rise + tau) / g.t_flight;
  } else if (tau < g.t_liftoff) {
    phi = std::numbers::pi + std::numbers::pi * (tau - g.t_touchdown) / g.t_stance;
  } else {
    phi = std::numbers::pi * (tau - g.t_liftoff) / g.t_flight;
  }
  if (phi >= kTwoPi) phi -= kTwoPi;
  return phi;
}

std::pair<double, double> phase_at(const ReferenceTrajectory& ref, double t) {
  const double phi = phase_angle_at(ref, t);
  return {std::cos(phi), std::sin(phi)};
}

ReferenceTrajectory reference_trajectory(const PeriodicGait& gait, int n_cycles, double dt) {
  if (n_cycles < 1) throw ParameterError("n_cycles must be >= 1");
  if (!(dt > 0.0)) throw ParameterError("sample step must be positive");

  const SlipParams& p = gait.params;
  const CycleResult dense = integrate_cycle(gait.apex, gait.alpha_star, p, gait.integration_dt);
  if (!dense.ok()) throw SynthesisError("gait cycle failed on re-integration");
  SlipState td_state;
  SlipState lo_state;
  for (const SlipEvent& e : dense.events) {
    if (e.kind == SlipEventKind::Touchdown) td_state = e.state;
    if (e.kind == SlipEventKind::Liftoff) lo_state = e.state;
  }

  // Local sample times of one cycle.
  std::vector<double> local;
  for (int j = 0; j * dt < gait.period_T - kEventTimeTol; ++j) local.push_back(j * dt);
  local.push_back(gait.t_touchdown);
  local.push_back(gait.t_liftoff);
  std::sort(local.begin(), local.end());
  local.erase(std::unique(local.begin(), local.end(),
                          [](double a, double b) { return std::abs(a - b) <= kEventTimeTol; }),
              local.end());

  auto state_local = [&](double tau) -> SlipState {
    if (tau == gait.t_touchdown) return td_state;
    if (tau == gait.t_liftoff) return lo_state;
    if (tau < gait.t_touchdown) return flight_step(gait.apex, tau, p.g);
    if (tau > gait.t_liftoff) return flight_step(lo_state, tau - gait.t_liftoff, p.g);
    // Stance: continue from the last dense stance sample at or before tau.
    const auto it = std::upper_bound(dense.trajectory.begin(), dense.trajectory.end(), tau,
                                     [](double v, const TimedState& s) { return v < s.t; });
    const TimedState& base = *std::prev(it);
    if (base.state.phase != SlipPhase::Stance) return td_state;
    const double h = tau - base.t;
    return h > 0.0 ? stance_advance(base.state, h, p) : base.state;
  };

  ReferenceTrajectory ref;
  ref.gait = gait;
  ref.n_cycles = n_cycles;
  ref.dt = dt;

  std::vector<TrajectorySample> cycle0;
  cycle0.reserve(local.size());
  for (double tau : local) {
    TrajectorySample s;
    s.t = tau;
    s.state = state_local(tau);
    s.cycle = 0;
    cycle0.push_back(s);
  }

  ref.samples.reserve(cycle0.size() * n_cycles + 1);
  for (int c = 0; c < n_cycles; ++c) {
    for (const TrajectorySample& s0 : cycle0) {
      TrajectorySample s = s0;
      s.t = c * gait.period_T + s0.t;
      s.state.x += c * gait.stride_length;
      s.state.foot_x += c * gait.stride_length;
      s.cycle = c;
      ref.samples.push_back(s);
    }
  }
  TrajectorySample closing;
  closing.t = n_cycles * gait.period_T;
  closing.state = gait.apex;
  closing.state.x += n_cycles * gait.stride_length;
  closing.cycle = n_cycles - 1;
  ref.samples.push_back(closing);

  for (TrajectorySample& s : ref.samples) s.phi = phase_angle_at(ref, s.t);

  double vx_min = cycle0.front().state.vx;
  double vx_max = vx_min;
  double vz_min = cycle0.front().state.vz;
  double vz_max = vz_min;
  for (const TrajectorySample& s : cycle0) {
    vx_min = std::min(vx_min, s.state.vx);
    vx_max = std::max(vx_max, s.state.vx);
    vz_min = std::min(vz_min, s.state.vz);
    vz_max = std::max(vz_max, s.state.vz);
  }
  ref.vx_span = vx_max - vx_min;
  ref.vz_span = vz_max - vz_min;
  return ref;
}

SlipState ReferenceTrajectory::state_at(double t) const {
  if (samples.empty() || t < 0.0 || t > duration() + 1e-9) {
    std::ostringstream os;
    os << "time " << t << " s outside reference [0, " << duration() << "]";
    throw QueryError(os.str());
  }
  const auto it = std::lower_bound(samples.begin(), samples.end(), t,
                                   [](const TrajectorySample& s, double v) { return s.t < v; });
  if (it == samples.end()) return samples.back().state;
  if (it == samples.begin()) return it->state;
  const TrajectorySample& right = *it;
  const TrajectorySample& left = *std::prev(it);
  const TrajectorySample& nearest = (t - left.t <= right.t - t) ? left : right;
  if (std::abs(nearest.t - t) <= 0.5 * dt) return nearest.state;
  const double w = (t - left.t) / (right.t - left.t);
  SlipState s = left.state;
  s.x += w * (right.state.x - left.state.x);
  s.z += w * (right.state.z - left.state.z);
  s.vx += w * (right.state.vx - left.state.vx);
  s.vz += w * (right.state.vz - left.state.vz);
  return s;
}

void export_trajectory(const ReferenceTrajectory& ref, const std::filesystem::path& path,
                       TrajectoryFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  if (format == TrajectoryFormat::Csv) {
    out << std::setprecision(17);
    out << "t,x,z,vx,vz,phase_tag,phi\n";
    for (const TrajectorySample& s : ref.samples) {
      out << s.t << ',' << s.state.x << ',' << s.state.z << ',' << s.state.vx << ','
          << s.state.vz << ',' << (s.state.phase == SlipPhase::Stance ? "stance" : "flight")
          << ',' << s.phi << '\n';
    }
  } else {
    out << to_json(ref).dump(1) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ReferenceTrajectory import_trajectory_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed trajectory JSON in " + path.string() + ": " + e.what());
  }
  return reference_from_json(j);
}

}  // namespace slipbound
