#include "seatsim/control.hpp"

#include <algorithm>

namespace seatsim {

double pid_torque(const PidGains& gains, PidState& state, double q, double u, double dt) {
  const double e = state.reference - q;
  if (gains.i_enabled)
    state.integral =
        std::clamp(state.integral + e * dt, -gains.integrator_limit, gains.integrator_limit);
  state.last_time += dt;
  double tau = 0.0;
  if (gains.p_enabled) tau += gains.kp * e;
  if (gains.i_enabled) tau += gains.ki * state.integral;
  if (gains.d_enabled) tau -= gains.kd * u;
  return tau;
}

void ControllerBank::capture_references(const VectorXd& q) {
  for (auto& d : dofs) {
    if (d.dof < 0 || d.dof >= q.size())
      throw ControlError("controller '" + d.name + "' references coordinate " +
                         std::to_string(d.dof) + " outside the state");
    d.state.reference = q[d.dof];
    d.state.integral = 0.0;
  }
  captured_ = true;
}

void ControllerBank::restore_references(const std::vector<double>& references,
                                        const std::vector<double>& integrals) {
  if (references.size() != dofs.size() || integrals.size() != dofs.size())
    throw ControlError("restored controller state does not match the bank layout");
  for (size_t i = 0; i < dofs.size(); ++i) {
    dofs[i].state.reference = references[i];
    dofs[i].state.integral = integrals[i];
  }
  captured_ = true;
}

VectorXd ControllerBank::update(const VectorXd& q, const VectorXd& u, double dt, int total_dof) {
  if (!captured_) throw ControlError("controller references not captured yet");
  if (dt <= 0.0) throw ControlError("controller update needs dt > 0");
  VectorXd tau = VectorXd::Zero(total_dof);
  for (auto& d : dofs) {
    if (d.dof >= total_dof)
      throw ControlError("controller '" + d.name + "' outside the generalized force vector");
    tau[d.dof] += pid_torque(d.gains, d.state, q[d.dof], u[d.dof], dt);
  }
  return tau;
}

void ControllerBank::set_integral_enabled(bool enabled, bool clear_integrals) {
  for (auto& d : dofs) {
    d.gains.i_enabled = enabled;
    if (clear_integrals) d.state.integral = 0.0;
  }
}

void ControllerBank::set_all_enabled(bool enabled) {
  for (auto& d : dofs) {
    d.gains.p_enabled = enabled;
    d.gains.i_enabled = enabled;
    d.gains.d_enabled = enabled;
  }
}

PidGains tuned_gains(double inertia, double stiffness, double damping, double settle_time) {
  if (inertia <= 0.0) throw ControlError("tuned_gains needs a positive inertia");
  if (settle_time <= 0.0) throw ControlError("tuned_gains needs a positive settle time");
  // Closed-loop characteristic polynomial (s + a)(s² + 2ζωs + ω²) with the
  // dominant real pole at -a; ln(20) ≈ 3 gives 5% recovery at ≈ settle_time.
  const double a = 3.0 / settle_time;
  const double omega = 6.0 * a;
  const double zeta = 0.8;
  PidGains g;
  g.kd = std::max(0.0, inertia * (2 * zeta * omega + a) - damping);
  g.kp = std::max(0.0, inertia * (omega * omega + 2 * zeta * omega * a) - stiffness);
  g.ki = inertia * a * omega * omega;
  return g;
}

}  // namespace seatsim
