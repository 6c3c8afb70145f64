#include "slipbound/slip.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace slipbound {

namespace {

using Vec4 = std::array<double, 4>;  // x, z, vx, vz

constexpr double kMinCompressionRatio = 0.2;
constexpr double kMaxStanceDuration = 10.0;

Vec4 stance_rhs(const Vec4& y, double foot_x, const SlipParams& p) {
  const double dx = y[0] - foot_x;
  const double dz = y[1];
  const double r = std::hypot(dx, dz);
  // Smooth extension beyond r0 so that RK4 stages and the liftoff bisection
  // can probe slightly past the event.
  const double f = p.effective_stiffness() * (p.r0 - r) / p.m;
  return {y[2], y[3], f * dx / r, f * dz / r - p.g};
}

Vec4 rk4_step(const Vec4& y, double h, double foot_x, const SlipParams& p) {
  auto axpy = [](const Vec4& a, double s, const Vec4& b) {
    return Vec4{a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]};
  };
  const Vec4 k1 = stance_rhs(y, foot_x, p);
  const Vec4 k2 = stance_rhs(axpy(y, 0.5 * h, k1), foot_x, p);
  const Vec4 k3 = stance_rhs(axpy(y, 0.5 * h, k2), foot_x, p);
  const Vec4 k4 = stance_rhs(axpy(y, h, k3), foot_x, p);
  Vec4 out;
  for (int i = 0; i < 4; ++i) {
    out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

double leg_length_of(const Vec4& y, double foot_x) { return std::hypot(y[0] - foot_x, y[1]); }

SlipState stance_state(const Vec4& y, double foot_x) {
  return SlipState{y[0], y[1], y[2], y[3], SlipPhase::Stance, foot_x};
}

void check_params(const SlipParams& p) {
  if (!(p.m > 0.0) || !(p.r0 > 0.0) || !(p.k > 0.0) || !(p.g > 0.0)) {
    throw ParameterError("SLIP parameters must be positive");
  }
  if (p.n_stance_legs != 1 && p.n_stance_legs != 2) {
    throw ParameterError("n_stance_legs must be 1 or 2");
  }
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0) || !(alpha < std::numbers::pi / 2.0)) {
    std::ostringstream os;
    os << "touchdown angle " << alpha << " rad outside (0, pi/2)";
    throw ParameterError(os.str());
  }
}

// Grid time strictly after t (by more than the event tolerance).
double next_grid_time(double t, double dt) {
  double n = std::ceil(t / dt);
  if (n * dt <= t + kEventTimeTol) n += 1.0;
  return n * dt;
}

CycleResult run_cycle(const SlipState& apex, double alpha, const SlipParams& p, double dt,
                      bool record) {
  check_params(p);
  check_alpha(alpha);
  if (!(dt > 0.0)) throw ParameterError("integration step must be positive");
  if (apex.phase != SlipPhase::Flight) throw PhaseError("cycle must start in flight");

  CycleResult out;
  auto push = [&](double t, const SlipState& s) {
    if (record) out.trajectory.push_back({t, s});
  };

  const double z_td = p.r0 * std::cos(alpha);
  if (!(apex.z > 0.0) || apex.z < z_td) {
    out.failure = CycleFailure::NoTouchdown;
    return out;
  }

  // Flight down to touchdown, closed form.
  const double disc = apex.vz * apex.vz + 2.0 * p.g * (apex.z - z_td);
  const double t_td = (apex.vz + std::sqrt(disc)) / p.g;
  if (record) {
    for (double t = 0.0; t < t_td - kEventTimeTol; t = next_grid_time(t, dt)) {
      push(t, flight_step(apex, t, p.g));
    }
  }
  SlipState td = flight_step(apex, t_td, p.g);
  td.z = z_td;
  td.phase = SlipPhase::Stance;
  td.foot_x = td.x + p.r0 * std::sin(alpha);
  out.events.push_back({SlipEventKind::Touchdown, t_td, td});
  push(t_td, td);

  // Stance, RK4 aligned to the sampling grid.
  const double foot_x = td.foot_x;
  Vec4 y{td.x, td.z, td.vx, td.vz};
  double t = t_td;
  double t_lo = 0.0;
  Vec4 y_lo{};
  bool lifted = false;
  while (!lifted) {
    const double h = next_grid_time(t, dt) - t;
    const Vec4 y_next = rk4_step(y, h, foot_x, p);
    const double r_next = leg_length_of(y_next, foot_x);
    if (r_next >= p.r0) {
      double lo = 0.0;
      double hi = h;
      Vec4 y_hi = y_next;
      while (hi - lo > kEventTimeTol) {
        const double mid = 0.5 * (lo + hi);
        const Vec4 y_mid = rk4_step(y, mid, foot_x, p);
        if (leg_length_of(y_mid, foot_x) >= p.r0) {
          hi = mid;
          y_hi = y_mid;
        } else {
          lo = mid;
        }
      }
      t_lo = t + hi;
      y_lo = y_hi;
      lifted = true;
      break;
    }
    t += h;
    y = y_next;
    if (y[1] <= 0.0 || y[2] <= 0.0) {
      out.events.push_back({SlipEventKind::Fall, t, stance_state(y, foot_x)});
      push(t, stance_state(y, foot_x));
      out.failure = CycleFailure::Fall;
      return out;
    }
    if (r_next <= kMinCompressionRatio * p.r0 || t - t_td > kMaxStanceDuration) {
      push(t, stance_state(y, foot_x));
      out.failure = CycleFailure::Stiffness;
      return out;
    }
    push(t, stance_state(y, foot_x));
  }

  SlipState lo_state{y_lo[0], y_lo[1], y_lo[2], y_lo[3], SlipPhase::Flight, foot_x};
  out.events.push_back({SlipEventKind::Liftoff, t_lo, lo_state});
  push(t_lo, lo_state);
  if (lo_state.vz <= 0.0) {
    out.failure = CycleFailure::NoApex;
    return out;
  }

  const double t_rise = lo_state.vz / p.g;
  const double t_apex = t_lo + t_rise;
  if (record) {
    for (double tg = next_grid_time(t_lo, dt); tg < t_apex - kEventTimeTol;
         tg = next_grid_time(tg, dt)) {
      push(tg, flight_step(lo_state, tg - t_lo, p.g));
    }
  }
  SlipState next_apex = flight_step(lo_state, t_rise, p.g);
  next_apex.vz = 0.0;
  out.events.push_back({SlipEventKind::Apex, t_apex, next_apex});
  push(t_apex, next_apex);
  return out;
}

}  // namespace

SlipParams slip_params_from_robot(double m, double r0, double k_rel, int n_stance_legs,
                                  double g) {
  if (!(m > 0.0) || !(r0 > 0.0) || !(k_rel > 0.0) || !(g > 0.0)) {
    throw ParameterError("mass, hip height, k_rel and gravity must be positive");
  }
  if (n_stance_legs != 1 && n_stance_legs != 2) {
    throw ParameterError("n_stance_legs must be 1 or 2");
  }
  SlipParams p;
  p.m = m;
  p.r0 = r0;
  p.k_rel = k_rel;
  p.k = k_rel * m * g / r0;
  p.n_stance_legs = n_stance_legs;
  p.g = g;
  return p;
}

double relative_stiffness(double k, double m, double r0, double g) { return k * r0 / (m * g); }

double SlipState::leg_length() const { return std::hypot(x - foot_x, z); }

SlipState flight_step(const SlipState& s, double dt, double g) {
  SlipState out = s;
  out.x = s.x + s.vx * dt;
  out.z = s.z + s.vz * dt - 0.5 * g * dt * dt;
  out.vz = s.vz - g * dt;
  return out;
}

SlipDerivative stance_derivative(const SlipState& s, const SlipParams& p) {
  if (s.phase != SlipPhase::Stance) throw PhaseError("stance derivative requested in flight");
  const double r = s.leg_length();
  if (r > p.r0 * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "leg length " << r << " exceeds rest length " << p.r0;
    throw PhaseError(os.str());
  }
  const Vec4 d = stance_rhs({s.x, s.z, s.vx, s.vz}, s.foot_x, p);
  return {d[0], d[1], d[2], d[3]};
}

SlipState stance_advance(const SlipState& s, double h, const SlipParams& p) {
  return stance_state(rk4_step({s.x, s.z, s.vx, s.vz}, h, s.foot_x, p), s.foot_x);
}

ForceVec grf(const SlipState& s, const SlipParams& p) {
  if (s.phase != SlipPhase::Stance) return {};
  const double dx = s.x - s.foot_x;
  const double r = std::hypot(dx, s.z);
  const double f = p.effective_stiffness() * (p.r0 - r);
  return {f * dx / r, f * s.z / r};
}

double slip_energy(const SlipState& s, const SlipParams& p) {
  double e = 0.5 * p.m * (s.vx * s.vx + s.vz * s.vz) + p.m * p.g * s.z;
  if (s.phase == SlipPhase::Stance) {
    const double c = p.r0 - s.leg_length();
    e += 0.5 * p.effective_stiffness() * c * c;
  }
  return e;
}

const char* to_string(CycleFailure f) {
  switch (f) {
    case CycleFailure::None: return "none";
    case CycleFailure::Fall: return "fall";
    case CycleFailure::Stiffness: return "stiffness";
    case CycleFailure::NoApex: return "no-apex";
    case CycleFailure::NoTouchdown: return "no-touchdown";
  }
  return "unknown";
}

CycleResult integrate_cycle(const SlipState& apex, double alpha, const SlipParams& p,
                            double dt) {
  return run_cycle(apex, alpha, p, dt, true);
}

std::optional<ApexState> try_apex_return_map(double apex_z, double apex_vx, double alpha,
                                             const SlipParams& p, double dt) {
  const SlipState apex{0.0, apex_z, apex_vx, 0.0, SlipPhase::Flight, 0.0};
  const CycleResult c = run_cycle(apex, alpha, p, dt, false);
  if (!c.ok()) return std::nullopt;
  const SlipState& next = c.events.back().state;
  return ApexState{next.z, next.vx};
}

ApexState apex_return_map(double apex_z, double apex_vx, double alpha, const SlipParams& p,
                          double dt) {
  const SlipState apex{0.0, apex_z, apex_vx, 0.0, SlipPhase::Flight, 0.0};
  const CycleResult c = run_cycle(apex, alpha, p, dt, false);
  if (!c.ok()) {
    std::ostringstream os;
    os << "SLIP cycle failed (" << to_string(c.failure) << ") from apex z=" << apex_z
       << " vx=" << apex_vx << " alpha=" << alpha;
    throw CycleError(c.failure, os.str());
  }
  const SlipState& next = c.events.back().state;
  return {next.z, next.vx};
}

}  // namespace slipbound
