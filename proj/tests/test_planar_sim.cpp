#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "slipbound/planar_sim.hpp"

using namespace slipbound;

namespace {

SimState airborne(double z = 1.0) {
  SimState s;
  s.q << 0.0, z, 0.0, 0.3, -0.6, -0.2, -0.4;
  return s;
}

double total_energy(const PlanarSim& sim, const SimState& s) {
  return sim.kinetic_energy(s) + sim.potential_energy(s);
}

}  // namespace

TEST_CASE("model presets") {
  for (const RobotModel& m : {planar_bolt(), planar_solo()}) {
    double sum = 0.0;
    for (const Link& l : m.links) sum += l.mass;
    CHECK(std::abs(sum - m.total_mass) <= 1e-12);
    for (const Joint& j : m.joints) {
      CHECK(j.pos_min == doctest::Approx(-std::numbers::pi));
      CHECK(j.pos_max == doctest::Approx(std::numbers::pi));
      CHECK(j.vel_limit == doctest::Approx(4 * std::numbers::pi));
      CHECK(j.torque_limit == doctest::Approx(2.7));
    }
  }
  CHECK(planar_bolt().total_mass == 1.3);
  CHECK(planar_bolt().hip_height == 0.35);
  CHECK(planar_solo().n_stance_legs == 2);
  CHECK_THROWS_AS(robot_preset("spot"), ParameterError);
}

TEST_CASE("free fall") {
  const PlanarSim sim(planar_bolt(), ContactParams{});
  SimState s = airborne();
  s.qd << 0.5, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0;
  const double dt = 1.0 / 2000.0;
  const double m = sim.model().total_mass;
  const CentroidalMomentum h0 = sim.centroidal_momentum(s);
  const SimState n = sim.step(s, JointVec::Zero(), dt);
  const CentroidalMomentum h1 = sim.centroidal_momentum(n);
  CHECK(std::abs(h1.linear.x() - h0.linear.x()) <= 1e-12);
  CHECK(std::abs((h1.linear.y() - h0.linear.y()) - (-m * 9.81 * dt)) <= 1e-12);
  const Dof a = sim.accelerations(s.q, s.qd, JointVec::Zero());
  CHECK(a[1] == doctest::Approx(-9.81).epsilon(1e-12));
  CHECK_FALSE(n.foot_contacts[0]);
  CHECK_FALSE(n.foot_contacts[1]);
}

TEST_CASE("passive pendulum conserves energy") {
  // Base fixed, left leg released from 0.8 rad. Oracle: an independent RK4
  // integration of the same model at dt = 1e-6.
  SimOptions opt;
  opt.fixed_base = true;
  const PlanarSim sim(planar_bolt(), ContactParams{}, opt);
  SimState s;
  s.q << 0.0, 2.0, 0.0, 0.8, 0.0, 0.0, 0.0;
  SimState rest = s;
  rest.q[3] = 0.0;
  const double swing = sim.potential_energy(s) - sim.potential_energy(rest);
  REQUIRE(swing > 0.0);

  const double e0 = total_energy(sim, s);
  double worst = 0.0;
  SimState cur = s;
  for (int i = 0; i < 2000; ++i) {
    cur = sim.step(cur, JointVec::Zero(), 1.0 / 2000.0);
    worst = std::max(worst, std::abs(total_energy(sim, cur) - e0));
  }
  CHECK(worst / swing <= 1e-5);

  Dof q = s.q;
  Dof v = s.qd;
  const double h = 1e-6;
  auto acc = [&](const Dof& qq, const Dof& vv) {
    Dof a = sim.accelerations(qq, vv, JointVec::Zero());
    a.head<3>().setZero();
    return a;
  };
  for (int i = 0; i < 1000000; ++i) {
    const Dof k1v = acc(q, v);
    const Dof k1q = v;
    const Dof k2q = v + 0.5 * h * k1v;
    const Dof k2v = acc(q + 0.5 * h * k1q, k2q);
    const Dof k3q = v + 0.5 * h * k2v;
    const Dof k3v = acc(q + 0.5 * h * k2q, k3q);
    const Dof k4q = v + h * k3v;
    const Dof k4v = acc(q + h * k3q, k4q);
    q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
    v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }
  SimState ref;
  ref.q = q;
  ref.qd = v;
  CHECK(std::abs(total_energy(sim, ref) - e0) / swing <= 1e-9);
  CHECK(std::abs(total_energy(sim, cur) - total_energy(sim, ref)) / swing <= 1e-5);
  CHECK((cur.q - ref.q).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("standing on both feet carries the body weight") {
  const PlanarSim sim(planar_bolt(), ContactParams{});
  SimState s;
  const double leg = sim.model().links[1].length + sim.model().links[2].length;
  s.q << 0.0, leg, 0.0, 0.0, 0.0, 0.0, 0.0;
  for (int i = 0; i < 4000; ++i) s = sim.step(s, JointVec::Zero(), 1.0 / 2000.0);
  const double fz = s.foot_forces[0].y() + s.foot_forces[1].y();
  const double mg = sim.model().total_mass * 9.81;
  CHECK(std::abs(fz - mg) <= 0.01 * mg);
  CHECK(s.foot_contacts[0]);
  CHECK(s.foot_contacts[1]);
  const double penetration = -sim.foot_position(s.q, 0).y();
  CHECK(penetration > 0.0);
  CHECK(penetration < 3e-3);
}

TEST_CASE("CoM state") {
  const PlanarSim sim(planar_bolt(), ContactParams{});
  SimState s;
  s.q << 0.3, 0.5, 0.0, 0.4, -0.7, -0.4, 0.7;  // legs mirrored front/back
  CHECK(sim.com_state(s).x == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(sim.com_state(s).y == 0.0);

  SimState f = airborne();
  f.qd << 0.8, 0.3, 0.5, 1.0, -2.0, 0.7, 1.5;
  const double dt = 1.0 / 2000.0;
  const SimState n = sim.step(f, JointVec::Zero(), dt);
  const ComState a = sim.com_state(f);
  const ComState b = sim.com_state(n);
  CHECK(std::abs((b.x - a.x) / dt - 0.5 * (a.vx + b.vx)) <= 1e-6);
  CHECK(std::abs((b.z - a.z) / dt - 0.5 * (a.vz + b.vz)) <= 1e-6);

  // Nearly massless legs: CoM collapses onto the torso CoM.
  RobotModel m = planar_bolt();
  for (int l = 1; l < 5; ++l) {
    m.links[l].mass = 1e-12;
    m.links[l].inertia = 1e-15;
  }
  m.total_mass = m.links[0].mass + 4e-12;
  const PlanarSim light(m, ContactParams{});
  SimState t;
  t.q << 0.1, 0.6, 0.2, 0.3, -0.5, 0.1, -0.2;
  const Eigen::Vector2d torso = light.link_com(t.q, 0);
  CHECK(light.com_state(t).x == doctest::Approx(torso.x()).epsilon(1e-10));
  CHECK(light.com_state(t).z == doctest::Approx(torso.y()).epsilon(1e-10));
}

TEST_CASE("centroidal momentum") {
  const PlanarSim sim(planar_bolt(), ContactParams{});
  SimState s = airborne();
  CentroidalMomentum h = sim.centroidal_momentum(s);
  CHECK(h.linear.norm() == 0.0);
  CHECK(h.angular == 0.0);

  s.qd << 1.2, -0.4, 0.0, 0.0, 0.0, 0.0, 0.0;
  h = sim.centroidal_momentum(s);
  const double m = sim.model().total_mass;
  CHECK(std::abs(h.linear.x() - m * 1.2) <= 1e-12);
  CHECK(std::abs(h.linear.y() + m * 0.4) <= 1e-12);
  CHECK(std::abs(h.angular) <= 1e-12);

  s.qd << 0.7, 0.2, 0.4, 1.0, -1.5, -0.8, 1.1;
  h = sim.centroidal_momentum(s);
  const ComState c = sim.com_state(s);
  CHECK(std::abs(h.linear.x() - m * c.vx) <= 1e-10);
  CHECK(std::abs(h.linear.y() - m * c.vz) <= 1e-10);

  // No external moment about the CoM in flight.
  const double l0 = h.angular;
  double worst = 0.0;
  for (int i = 0; i < 400; ++i) {
    s = sim.step(s, JointVec::Zero(), 1.0 / 2000.0);
    worst = std::max(worst, std::abs(sim.centroidal_momentum(s).angular - l0));
  }
  REQUIRE_FALSE(s.foot_contacts[0]);
  CHECK(worst <= 1e-6);
}

TEST_CASE("contact flags and force law") {
  const PlanarSim sim(planar_bolt(), ContactParams{});
  SimState s = airborne();
  auto flags = sim.contact_flags(s);
  CHECK_FALSE(flags[0]);
  CHECK_FALSE(flags[1]);

  // Lower the base until only the left foot penetrates.
  s.q << 0.0, 0.0, 0.0, 0.0, 0.0, 0.6, -1.2;
  s.q[1] = -sim.foot_position(s.q, 0).y() - 0.002;
  REQUIRE(sim.foot_position(s.q, 1).y() > 0.0);
  flags = sim.contact_flags(s);
  CHECK(flags[0]);
  CHECK_FALSE(flags[1]);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  std::uniform_real_distribution<double> uv(-1.0, 1.0);
  const double mu = sim.contact().mu;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Vector2d f =
        sim.contact_force(Eigen::Vector2d(u(rng), u(rng)), Eigen::Vector2d(uv(rng), uv(rng)));
    CHECK(f.y() >= 0.0);
    CHECK(std::abs(f.x()) <= mu * f.y() + 1e-9);
  }

  // After a step, flags agree with the stored normal forces.
  SimState g;
  g.q << 0.0, 0.399, 0.0, 0.0, 0.0, 0.0, 0.0;
  g = sim.step(g, JointVec::Zero(), 1.0 / 2000.0);
  for (int leg = 0; leg < 2; ++leg) CHECK(g.foot_contacts[leg] == (g.foot_forces[leg].y() > 0.0));
}

TEST_CASE("initial pose") {
  const PlanarSim sim(planar_bolt(), ContactParams{});
  const SlipState apex{0.2, 0.3675, 1.1, 0.0, SlipPhase::Flight, 0.0};
  std::mt19937_64 rng(0);
  const SimState s = sim.initial_pose(apex, rng, 0.0);
  const ComState c = sim.com_state(s);
  CHECK(std::hypot(c.x - apex.x, c.z - apex.z) <= 0.02);
  CHECK(std::abs(c.vx - apex.vx) <= 1e-9);
  CHECK(sim.foot_position(s.q, 0).y() > 0.0);
  CHECK(sim.foot_position(s.q, 1).y() > 0.0);
  CHECK(s.q[2] == 0.0);

  std::mt19937_64 r1(5), r2(5);
  const SimState a = sim.initial_pose(apex, r1, 0.05);
  const SimState b = sim.initial_pose(apex, r2, 0.05);
  CHECK(a.q == b.q);
  CHECK((a.q - s.q).tail<4>().cwiseAbs().maxCoeff() <= 0.05 + 1e-12);

  SlipState low = apex;
  low.z = 0.01;
  CHECK_THROWS_AS(sim.initial_pose(low, rng, 0.0), PoseError);
}

TEST_CASE("determinism, limits and blow-up") {
  const PlanarSim sim(planar_bolt(), ContactParams{});
  std::mt19937_64 rng(1);
  const SimState s0 = sim.initial_pose({0.0, 0.3675, 1.1, 0.0, SlipPhase::Flight, 0.0}, rng, 0.05);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  SimState a = s0;
  SimState b = s0;
  for (int i = 0; i < 3000; ++i) {
    const JointVec tau(u(rng), u(rng), u(rng), u(rng));
    a = sim.step(a, tau, 1.0 / 2000.0);
    b = sim.step(b, tau.cwiseMax(-2.7).cwiseMin(2.7), 1.0 / 2000.0);
    for (int j = 3; j < kNumDof; ++j) {
      CHECK(a.q[j] >= -std::numbers::pi);
      CHECK(a.q[j] <= std::numbers::pi);
    }
  }
  // Over-limit torques are clamped, so both runs are bit-identical.
  CHECK(a.q == b.q);
  CHECK(a.qd == b.qd);

  SimState bad = s0;
  bad.qd[0] = std::nan("");
  CHECK_THROWS_AS(sim.step(bad, JointVec::Zero(), 1e-3), SimulationError);
  CHECK_THROWS_AS(sim.step(s0, JointVec::Zero(), 0.0), ParameterError);
}
