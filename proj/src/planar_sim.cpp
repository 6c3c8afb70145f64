#include "slipbound/planar_sim.hpp"

#include <cmath>
#include <sstream>

namespace slipbound {

namespace {

constexpr int kNumLinks = 5;
constexpr double kFootClearance = 0.02;

// Dofs driving each link's absolute angle.
constexpr std::array<std::array<int, 3>, kNumLinks> kAngleDofs{{
    {2, -1, -1},  // torso
    {2, 3, -1},   // left thigh
    {2, 3, 4},    // left shank
    {2, 5, -1},   // right thigh
    {2, 5, 6},    // right shank
}};

// A point is base + sum of length * dir(link angle). Torso terms point up,
// leg terms down the leg.
struct Term {
  int link;
  double length;
};

struct PointTerms {
  std::array<Term, 2> terms;
  int n;
};

Eigen::Vector2d dir(int link, double phi) {
  if (link == 0) return {-std::sin(phi), std::cos(phi)};
  return {std::sin(phi), -std::cos(phi)};
}

Eigen::Vector2d dir_prime(int link, double phi) {
  if (link == 0) return {-std::cos(phi), -std::sin(phi)};
  return {std::cos(phi), std::sin(phi)};
}

std::array<double, kNumLinks> link_angles(const Dof& q) {
  return {q[2], q[2] + q[3], q[2] + q[3] + q[4], q[2] + q[5], q[2] + q[5] + q[6]};
}

std::array<double, kNumLinks> link_rates(const Dof& qd) {
  return {qd[2], qd[2] + qd[3], qd[2] + qd[3] + qd[4], qd[2] + qd[5], qd[2] + qd[5] + qd[6]};
}

Eigen::Matrix<double, 1, kNumDof> angular_jacobian(int link) {
  Eigen::Matrix<double, 1, kNumDof> j = Eigen::Matrix<double, 1, kNumDof>::Zero();
  for (int d : kAngleDofs[link]) {
    if (d >= 0) j[d] = 1.0;
  }
  return j;
}

PointTerms com_terms(const RobotModel& m, int link) {
  const auto& L = m.links;
  switch (link) {
    case 0: return {{Term{0, L[0].com_offset}, Term{0, 0.0}}, 1};
    case 1: return {{Term{1, L[1].com_offset}, Term{0, 0.0}}, 1};
    case 2: return {{Term{1, L[1].length}, Term{2, L[2].com_offset}}, 2};
    case 3: return {{Term{3, L[3].com_offset}, Term{0, 0.0}}, 1};
    default: return {{Term{3, L[3].length}, Term{4, L[4].com_offset}}, 2};
  }
}

PointTerms foot_terms(const RobotModel& m, int leg) {
  const int thigh = leg == 0 ? 1 : 3;
  return {{Term{thigh, m.links[thigh].length}, Term{thigh + 1, m.links[thigh + 1].length}}, 2};
}

Eigen::Vector2d point_position(const PointTerms& pt, const Dof& q) {
  const auto phi = link_angles(q);
  Eigen::Vector2d p(q[0], q[1]);
  for (int i = 0; i < pt.n; ++i) p += pt.terms[i].length * dir(pt.terms[i].link, phi[pt.terms[i].link]);
  return p;
}

PointJacobian point_jacobian(const PointTerms& pt, const Dof& q) {
  const auto phi = link_angles(q);
  PointJacobian J = PointJacobian::Zero();
  J(0, 0) = 1.0;
  J(1, 1) = 1.0;
  for (int i = 0; i < pt.n; ++i) {
    const Term& term = pt.terms[i];
    const Eigen::Vector2d col = term.length * dir_prime(term.link, phi[term.link]);
    for (int d : kAngleDofs[term.link]) {
      if (d >= 0) J.col(d) += col;
    }
  }
  return J;
}

// Acceleration of the point at zero generalized acceleration.
Eigen::Vector2d point_bias_acceleration(const PointTerms& pt, const Dof& q, const Dof& qd) {
  const auto phi = link_angles(q);
  const auto w = link_rates(qd);
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  for (int i = 0; i < pt.n; ++i) {
    const Term& term = pt.terms[i];
    a -= term.length * w[term.link] * w[term.link] * dir(term.link, phi[term.link]);
  }
  return a;
}

bool all_finite(const Dof& v) { return v.allFinite(); }

}  // namespace

PlanarSim::PlanarSim(RobotModel model, ContactParams contact, SimOptions options)
    : model_(std::move(model)), contact_(contact), options_(options) {
  model_.validate();
  contact_.validate();
}

MassMatrix PlanarSim::mass_matrix(const Dof& q) const {
  MassMatrix M = MassMatrix::Zero();
  for (int l = 0; l < kNumLinks; ++l) {
    const PointJacobian J = point_jacobian(com_terms(model_, l), q);
    const auto Jw = angular_jacobian(l);
    M.noalias() += model_.links[l].mass * J.transpose() * J;
    M.noalias() += model_.links[l].inertia * Jw.transpose() * Jw;
  }
  return M;
}

Dof PlanarSim::bias_forces(const Dof& q, const Dof& qd) const {
  Dof h = Dof::Zero();
  const Eigen::Vector2d g(0.0, options_.gravity);
  for (int l = 0; l < kNumLinks; ++l) {
    const PointTerms pt = com_terms(model_, l);
    const PointJacobian J = point_jacobian(pt, q);
    h.noalias() += model_.links[l].mass * J.transpose() * (point_bias_acceleration(pt, q, qd) + g);
  }
  return h;
}

Eigen::Vector2d PlanarSim::contact_force(const Eigen::Vector2d& p, const Eigen::Vector2d& v) const {
  if (p.y() > 0.0) return Eigen::Vector2d::Zero();
  const double n = std::max(0.0, -contact_.k_n * p.y() - contact_.d_n * v.y());
  const double ft = -contact_.mu * n * std::tanh(v.x() / contact_.v_slip);
  return {ft, n};
}

Dof PlanarSim::generalized_forces(const Dof& q, const Dof& qd, const JointVec& tau,
                                  bool with_contact) const {
  Dof f = -bias_forces(q, qd);
  f.tail<kNumJoints>() += tau;
  if (with_contact) {
    for (int leg = 0; leg < 2; ++leg) {
      const PointJacobian J = foot_jacobian(q, leg);
      const Eigen::Vector2d fc = contact_force(point_position(foot_terms(model_, leg), q), J * qd);
      f.noalias() += J.transpose() * fc;
    }
  }
  return f;
}

Dof PlanarSim::accelerations(const Dof& q, const Dof& qd, const JointVec& tau) const {
  const MassMatrix M = mass_matrix(q);
  const Dof f = generalized_forces(q, qd, tau, false);
  Dof qdd = Dof::Zero();
  if (options_.fixed_base) {
    qdd.tail<kNumJoints>() = M.bottomRightCorner<kNumJoints, kNumJoints>().ldlt().solve(
        f.tail<kNumJoints>());
  } else {
    qdd = M.ldlt().solve(f);
  }
  return qdd;
}

SimState PlanarSim::step(const SimState& state, const JointVec& tau_in, double dt) const {
  if (!(dt > 0.0)) throw ParameterError("physics step must be positive");
  JointVec tau = tau_in;
  const auto limits = model_.torque_limits();
  for (int j = 0; j < kNumJoints; ++j) tau[j] = std::clamp(tau[j], -limits[j], limits[j]);

  const Dof& q = state.q;
  const Dof& qd = state.qd;
  const bool touching = foot_position(q, 0).y() <= 0.0 || foot_position(q, 1).y() <= 0.0;
  const int first = options_.fixed_base ? 3 : 0;
  const int n = kNumDof - first;

  Dof q_next;
  Dof qd_next;
  if (!touching) {
    // RK4 on the smooth dynamics; contact forces included in case a foot
    // crosses the ground inside the step.
    auto rhs = [&](const Dof& qq, const Dof& vv) {
      const MassMatrix M = mass_matrix(qq);
      const Dof f = generalized_forces(qq, vv, tau, true);
      Dof a = Dof::Zero();
      a.tail(n) = M.bottomRightCorner(n, n).ldlt().solve(f.tail(n));
      return a;
    };
    const Dof k1v = rhs(q, qd);
    const Dof k1q = qd;
    const Dof k2q = qd + 0.5 * dt * k1v;
    const Dof k2v = rhs(q + 0.5 * dt * k1q, k2q);
    const Dof k3q = qd + 0.5 * dt * k2v;
    const Dof k3v = rhs(q + 0.5 * dt * k2q, k3q);
    const Dof k4q = qd + dt * k3v;
    const Dof k4v = rhs(q + dt * k3q, k4q);
    q_next = q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
    qd_next = qd + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  } else {
    // Semi-implicit Euler with the contact force linearized in foot
    // velocity (D) and position (K):
    //   (M - dt J^T D J - dt^2 J^T K J) dv = dt (f + dt J^T K J qd)
    const MassMatrix M = mass_matrix(q);
    MassMatrix A = M;
    Dof rhs = generalized_forces(q, qd, tau, false);
    for (int leg = 0; leg < 2; ++leg) {
      const PointJacobian J = foot_jacobian(q, leg);
      const Eigen::Vector2d p = point_position(foot_terms(model_, leg), q);
      const Eigen::Vector2d v = J * qd;
      const Eigen::Vector2d fc = contact_force(p, v);
      rhs.noalias() += J.transpose() * fc;
      if (fc.y() <= 0.0) continue;
      const double th = std::tanh(v.x() / contact_.v_slip);
      const double sech2 = 1.0 - th * th;
      Eigen::Matrix2d D;  // d f / d v
      D << -contact_.mu * fc.y() * sech2 / contact_.v_slip, contact_.mu * th * contact_.d_n,
          0.0, -contact_.d_n;
      Eigen::Matrix2d K;  // d f / d p
      K << 0.0, contact_.mu * th * contact_.k_n, 0.0, -contact_.k_n;
      A.noalias() -= dt * J.transpose() * D * J + dt * dt * J.transpose() * K * J;
      rhs.noalias() += dt * J.transpose() * (K * (J * qd));
    }
    Dof dv = Dof::Zero();
    dv.tail(n) = dt * A.bottomRightCorner(n, n).partialPivLu().solve(rhs.tail(n));
    qd_next = qd + dv;
    q_next = q + dt * qd_next;
  }
  if (options_.fixed_base) {
    q_next.head<3>() = q.head<3>();
    qd_next.head<3>().setZero();
  }

  if (!all_finite(q_next) || !all_finite(qd_next)) {
    std::ostringstream os;
    os << "simulation blow-up at t=" << state.t << " s: q=[" << q.transpose() << "] qd=["
       << qd.transpose() << "] tau=[" << tau.transpose() << "]";
    throw SimulationError(os.str());
  }

  for (int j = 0; j < kNumJoints; ++j) {
    const Joint& joint = model_.joints[j];
    double& pos = q_next[3 + j];
    if (pos < joint.pos_min || pos > joint.pos_max) {
      pos = std::clamp(pos, joint.pos_min, joint.pos_max);
      qd_next[3 + j] = 0.0;
    }
  }
  return finalize(q_next, qd_next, state.t + dt);
}

SimState PlanarSim::finalize(Dof q, Dof qd, double t) const {
  SimState s;
  s.q = q;
  s.qd = qd;
  s.t = t;
  for (int leg = 0; leg < 2; ++leg) {
    s.foot_forces[leg] = contact_force(foot_position(q, leg), foot_velocity(q, qd, leg));
    s.foot_contacts[leg] = foot_position(q, leg).y() <= 0.0 && s.foot_forces[leg].y() > 0.0;
  }
  return s;
}

ComState PlanarSim::com_state(const SimState& s) const {
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  for (int l = 0; l < kNumLinks; ++l) {
    p += model_.links[l].mass * link_com(s.q, l);
    v += model_.links[l].mass * link_com_velocity(s.q, s.qd, l);
  }
  p /= model_.total_mass;
  v /= model_.total_mass;
  return {p.x(), 0.0, p.y(), v.x(), 0.0, v.y()};
}

CentroidalMomentum PlanarSim::centroidal_momentum(const SimState& s) const {
  // Positions relative to the base so the result does not depend on where
  // the robot is in the world, down to the last bit.
  Dof q = s.q;
  q[0] = 0.0;
  q[1] = 0.0;
  Eigen::Vector2d pg = Eigen::Vector2d::Zero();
  for (int l = 0; l < kNumLinks; ++l) pg += model_.links[l].mass * link_com(q, l);
  pg /= model_.total_mass;
  const auto w = link_rates(s.qd);
  CentroidalMomentum h;
  for (int l = 0; l < kNumLinks; ++l) {
    const double m = model_.links[l].mass;
    const Eigen::Vector2d r = link_com(q, l) - pg;
    const Eigen::Vector2d v = link_com_velocity(s.q, s.qd, l);
    h.linear += m * v;
    h.angular += model_.links[l].inertia * w[l] + m * (r.x() * v.y() - r.y() * v.x());
  }
  return h;
}

std::array<bool, 2> PlanarSim::contact_flags(const SimState& s) const {
  std::array<bool, 2> flags{};
  for (int leg = 0; leg < 2; ++leg) {
    const Eigen::Vector2d f = contact_force(foot_position(s.q, leg), foot_velocity(s.q, s.qd, leg));
    flags[leg] = foot_position(s.q, leg).y() <= 0.0 && f.y() > 0.0;
  }
  return flags;
}

double PlanarSim::min_standing_height() const {
  const double a = model_.links[1].length;
  const double b = model_.links[2].length;
  return std::abs(a - b) + 0.05 * (a + b) + kFootClearance;
}

SimState PlanarSim::initial_pose(const SlipState& apex, std::mt19937_64& rng,
                                 double noise_scale) const {
  if (apex.z < min_standing_height()) {
    std::ostringstream os;
    os << "apex height " << apex.z << " m below minimum standing height "
       << min_standing_height() << " m";
    throw PoseError(os.str());
  }
  const double a = model_.links[1].length;
  const double b = model_.links[2].length;
  const double d = std::min(0.95 * (a + b), apex.z - kFootClearance);
  double knee = 0.0;
  try {
    knee = knee_angle_for_extension(model_, d);
  } catch (const ParameterError& e) {
    throw PoseError(std::string("leg IK infeasible: ") + e.what());
  }
  // Foot directly under the hip, knee pointing forward.
  const double hip = std::atan2(b * std::sin(knee), a + b * std::cos(knee));

  Dof q = Dof::Zero();
  q << apex.x, apex.z, 0.0, hip, -knee, hip, -knee;
  std::uniform_real_distribution<double> noise(-1.0, 1.0);
  for (int j = 0; j < kNumJoints; ++j) q[3 + j] += noise_scale * noise(rng);
  Dof qd = Dof::Zero();
  qd[0] = apex.vx;

  SimState s = finalize(q, qd, 0.0);
  for (int leg = 0; leg < 2; ++leg) {
    if (foot_position(q, leg).y() <= 0.0) throw PoseError("initial pose puts a foot on the ground");
  }
  return s;
}

double PlanarSim::kinetic_energy(const SimState& s) const {
  return 0.5 * s.qd.dot(mass_matrix(s.q) * s.qd);
}

double PlanarSim::potential_energy(const SimState& s) const {
  double e = 0.0;
  for (int l = 0; l < kNumLinks; ++l) e += model_.links[l].mass * options_.gravity * link_com(s.q, l).y();
  return e;
}

Eigen::Vector2d PlanarSim::foot_position(const Dof& q, int leg) const {
  return point_position(foot_terms(model_, leg), q);
}

Eigen::Vector2d PlanarSim::foot_velocity(const Dof& q, const Dof& qd, int leg) const {
  return foot_jacobian(q, leg) * qd;
}

PointJacobian PlanarSim::foot_jacobian(const Dof& q, int leg) const {
  return point_jacobian(foot_terms(model_, leg), q);
}

Eigen::Vector2d PlanarSim::link_com(const Dof& q, int link) const {
  return point_position(com_terms(model_, link), q);
}

Eigen::Vector2d PlanarSim::link_com_velocity(const Dof& q, const Dof& qd, int link) const {
  return point_jacobian(com_terms(model_, link), q) * qd;
}

}  // namespace slipbound
