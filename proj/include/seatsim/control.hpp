// Per-DoF PID joint-torque controllers holding a captured posture.
//
// Each controlled generalized coordinate gets an independent controller.
// The derivative term acts on the measured coordinate rate, not on the
// error derivative, so capturing a new reference produces no torque kick.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "seatsim/spatial.hpp"

namespace seatsim {

struct ControlError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PidGains {
  double kp = 0.0;  // N·m/rad (N/m on translational coordinates)
  double ki = 0.0;  // N·m/(rad·s)
  double kd = 0.0;  // N·m·s/rad
  double integrator_limit = 6.0;  // rad·s, anti-windup clamp
  bool p_enabled = true;
  bool i_enabled = true;
  bool d_enabled = true;
};

struct PidState {
  double reference = 0.0;  // rad (or m)
  double integral = 0.0;   // rad·s, always within ±integrator_limit
  double last_time = 0.0;  // s, accumulated update time
};

/// One update of a single controller: advances the clamped integral and
/// returns the torque. Disabled terms contribute nothing; a disabled
/// integral term also freezes the accumulator.
double pid_torque(const PidGains& gains, PidState& state, double q, double u, double dt);

/// Controller attached to one generalized coordinate.
struct ControlledDof {
  std::string name;  // diagnostic label, e.g. "l4_l5.ry"
  int dof = -1;      // global coordinate index
  PidGains gains;
  PidState state;
};

/// The independent controllers of one simulation instance.
class ControllerBank {
 public:
  std::vector<ControlledDof> dofs;

  bool captured() const { return captured_; }

  /// Snapshot the current coordinates as references and restart the
  /// integrators. Called at the end of settling or on snapshot load.
  void capture_references(const VectorXd& q);

  /// Restore previously captured references (restart path).
  void restore_references(const std::vector<double>& references,
                          const std::vector<double>& integrals);

  /// Torque of every controller scattered into a full generalized force
  /// vector of size total_dof. Throws until references are captured.
  VectorXd update(const VectorXd& q, const VectorXd& u, double dt, int total_dof);

  /// Ablation switch: enable/disable every integral term, optionally
  /// clearing the accumulated integrals.
  void set_integral_enabled(bool enabled, bool clear_integrals);

  /// Disable all controllers outright (pure passive model).
  void set_all_enabled(bool enabled);

 private:
  bool captured_ = false;
};

/// Pole-placement gains for the 1-DoF plant J q̈ + c q̇ + k q = τ: a real
/// pole at -a paired with a damped quadratic at natural frequency 6a, with
/// a chosen so the closed loop recovers from a step disturbance to 5% in
/// about `settle_time` seconds.
PidGains tuned_gains(double inertia, double stiffness, double damping,
                     double settle_time = 3.0);

}  // namespace seatsim
