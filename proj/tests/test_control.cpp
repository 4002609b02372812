#include <doctest.h>

#include <cmath>
#include <random>

#include "seatsim/control.hpp"
#include "test_helpers.hpp"

using namespace seatsim;
using testutil::Rng;
using testutil::uniform;

TEST_CASE("single controller torque terms") {
  PidGains g;
  g.kp = 50;
  g.ki = 10;
  g.kd = 4;
  PidState s;

  SUBCASE("zero error, zero rate, zero integral give zero torque") {
    CHECK(pid_torque(g, s, 0.0, 0.0, 1e-3) == 0.0);
  }
  SUBCASE("proportional term is linear in the error") {
    PidGains p;
    p.kp = 50;
    p.i_enabled = false;
    p.d_enabled = false;
    PidState st;
    st.reference = 0.1;
    CHECK(pid_torque(p, st, 0.0, 0.0, 1e-3) == doctest::Approx(5.0).epsilon(1e-14));
  }
  SUBCASE("derivative acts on the measured rate with a minus sign") {
    PidGains d;
    d.kd = 4;
    d.p_enabled = false;
    d.i_enabled = false;
    PidState st;
    CHECK(pid_torque(d, st, 0.0, 0.5, 1e-3) == doctest::Approx(-2.0).epsilon(1e-14));
  }
  SUBCASE("integral accumulates error times dt") {
    PidGains i;
    i.ki = 10;
    i.p_enabled = false;
    i.d_enabled = false;
    PidState st;
    st.reference = 0.2;
    double tau = 0.0;
    for (int k = 0; k < 1000; ++k) tau = pid_torque(i, st, 0.0, 0.0, 1e-3);
    CHECK(st.integral == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(tau == doctest::Approx(2.0).epsilon(1e-9));
  }
}

TEST_CASE("anti-windup clamps the integral for any input sequence") {
  PidGains g;
  g.ki = 5;
  g.integrator_limit = 0.5;
  PidState s;
  s.reference = 1.0;
  Rng rng(5);
  for (int k = 0; k < 20000; ++k) {
    pid_torque(g, s, uniform(rng, -30, 30), uniform(rng, -5, 5), 1e-3);
    CHECK(std::abs(s.integral) <= 0.5);
  }
  // Saturation actually reached from persistent error.
  PidState s2;
  s2.reference = 10.0;
  for (int k = 0; k < 2000; ++k) pid_torque(g, s2, 0.0, 0.0, 1e-3);
  CHECK(s2.integral == 0.5);
}

TEST_CASE("disabled integral term freezes the accumulator") {
  PidGains g;
  g.ki = 5;
  g.i_enabled = false;
  PidState s;
  s.reference = 1.0;
  s.integral = 0.2;
  const double tau = pid_torque(g, s, 0.0, 0.0, 1e-3);
  CHECK(s.integral == 0.2);
  CHECK(tau == 0.0);  // ki path disabled entirely
}

TEST_CASE("fully disabled controller outputs exactly zero") {
  PidGains g;
  g.kp = 50;
  g.ki = 10;
  g.kd = 4;
  g.p_enabled = g.i_enabled = g.d_enabled = false;
  PidState s;
  s.reference = 3.0;
  Rng rng(6);
  for (int k = 0; k < 100; ++k)
    CHECK(pid_torque(g, s, uniform(rng, -1, 1), uniform(rng, -1, 1), 1e-3) == 0.0);
}

TEST_CASE("controller bank: capture, separability, determinism") {
  ControllerBank bank;
  for (int i = 0; i < 3; ++i) {
    ControlledDof d;
    d.name = "joint" + std::to_string(i);
    d.dof = 2 * i;  // controllers on coordinates 0, 2, 4 of a 6-DoF state
    d.gains.kp = 40;
    d.gains.ki = 8;
    d.gains.kd = 2;
    bank.dofs.push_back(d);
  }

  VectorXd q0(6);
  q0 << 0.1, 0.0, -0.2, 0.0, 0.3, 0.0;

  SUBCASE("update before capture is an error") {
    CHECK_THROWS_AS(bank.update(q0, VectorXd::Zero(6), 1e-3, 6), ControlError);
  }

  bank.capture_references(q0);

  SUBCASE("capture makes the current pose torque free") {
    const VectorXd tau = bank.update(q0, VectorXd::Zero(6), 1e-3, 6);
    CHECK(tau.norm() == 0.0);
  }

  SUBCASE("only the displaced coordinate receives torque") {
    VectorXd q = q0;
    q[2] += 0.05;
    const VectorXd tau = bank.update(q, VectorXd::Zero(6), 1e-3, 6);
    CHECK(tau[2] != 0.0);
    for (int i : {0, 1, 3, 4, 5}) CHECK(tau[i] == 0.0);
  }

  SUBCASE("identical input sequences give bit-identical torque sequences") {
    ControllerBank bank2 = bank;  // copy after capture
    Rng rng(9);
    for (int k = 0; k < 500; ++k) {
      VectorXd q(6), u(6);
      for (int i = 0; i < 6; ++i) {
        q[i] = uniform(rng, -1, 1);
        u[i] = uniform(rng, -1, 1);
      }
      const VectorXd t1 = bank.update(q, u, 1e-3, 6);
      const VectorXd t2 = bank2.update(q, u, 1e-3, 6);
      CHECK((t1 - t2).norm() == 0.0);
    }
  }

  SUBCASE("integral ablation switch clears and freezes") {
    VectorXd q = q0;
    q[0] += 0.1;
    for (int k = 0; k < 100; ++k) bank.update(q, VectorXd::Zero(6), 1e-3, 6);
    CHECK(bank.dofs[0].state.integral != 0.0);
    bank.set_integral_enabled(false, true);
    CHECK(bank.dofs[0].state.integral == 0.0);
    const VectorXd tau = bank.update(q, VectorXd::Zero(6), 1e-3, 6);
    CHECK(bank.dofs[0].state.integral == 0.0);
    // P term still acts.
    CHECK(tau[0] == doctest::Approx(-0.1 * 40).epsilon(1e-12));
  }
}

TEST_CASE("restored references behave like a fresh capture") {
  ControllerBank bank;
  ControlledDof d;
  d.dof = 0;
  d.gains.kp = 30;
  bank.dofs.push_back(d);
  bank.restore_references({0.25}, {0.1});
  CHECK(bank.captured());
  CHECK(bank.dofs[0].state.reference == 0.25);
  CHECK(bank.dofs[0].state.integral == 0.1);
  CHECK_THROWS_AS(bank.restore_references({0.1, 0.2}, {0.0, 0.0}), ControlError);
}

TEST_CASE("tuned gains recover a disturbed 1-DoF plant in about three seconds") {
  const double inertia = 2.0, stiffness = 20.0, damping = 1.0;
  const PidGains g = tuned_gains(inertia, stiffness, damping, 3.0);
  CHECK(g.kp > 0);
  CHECK(g.ki > 0);
  CHECK(g.kd > 0);

  PidState s;
  s.reference = 0.0;
  const double h = 1e-3, disturbance = 5.0;
  double q = 0.0, u = 0.0, peak = 0.0, last_outside = 0.0;
  PidGains gains = g;
  PidState state = s;
  for (int k = 0; k < 10000; ++k) {
    const double tau = pid_torque(gains, state, q, u, h);
    const double acc = (tau + disturbance - stiffness * q - damping * u) / inertia;
    u += h * acc;
    q += h * u;
    peak = std::max(peak, std::abs(q));
    if (std::abs(q) > 0.05 * peak) last_outside = (k + 1) * h;
  }
  CHECK(peak > 0.0);
  CHECK(std::abs(q) < 0.05 * peak);  // actually settled by 10 s
  CHECK(last_outside > 2.0);
  CHECK(last_outside < 4.0);
}
