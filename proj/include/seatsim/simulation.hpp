// Time integration, run phasing, trajectory logging, and restart snapshots.
//
// A run has two phases on one uniform step grid: a quiet settling window in
// which the model relaxes under gravity while the controllers hold the
// initial posture, then the excited window. At the settle point the
// controller references are recaptured at the settled posture and a restart
// snapshot can be taken; resuming from that snapshot replays the excited
// window bit-for-bit, because time is always reconstructed as
// step_index * h and the snapshot stores the exact state.

#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "seatsim/control.hpp"
#include "seatsim/dynamics.hpp"
#include "seatsim/excitation.hpp"
#include "seatsim/forces.hpp"
#include "seatsim/tree.hpp"

namespace seatsim {

struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite state detected after a step.
struct DivergenceError : SimulationError {
  DivergenceError(std::string channel_, double time_);
  std::string channel;
  double time;
};

/// Everything that defines one mechanical scenario. Immutable during a run.
struct Model {
  KinematicTree tree;
  ForceElements elements;
  ControllerBank controllers;  // gain/binding template; references uncaptured
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  int seat_body = -1;  // free6 body driven by the excitation; -1 = none
  VectorXd q0, u0;     // initial state; empty means zero
};

/// Hash of the mechanical structure: tree geometry, mass properties, initial
/// posture, gravity, and the seat binding. Force element parameters and
/// controller gains are deliberately excluded so a settled snapshot stays
/// valid while those are being tuned.
std::uint64_t model_structure_hash(const Model& model);

struct SimState {
  VectorXd q, u;
  std::int64_t step_index = 0;  // simulated time = step_index * h
  ControllerBank controllers;   // live copy with references and integrals
};

SimState initial_state(const Model& model);

enum class Integrator {
  kSemiImplicitEuler,  // default: u += h·u̇, then q += h·u
  kRungeKutta4,        // classical RK4; used where energy behaviour matters
};

/// Dynamics quantities of the instant a step started from.
struct StepOutput {
  double t = 0.0;
  VectorXd q, u;
  std::vector<BodyKinematics> kin;
  std::vector<Vec6> body_acc;  // body-frame spatial accelerations
  std::vector<ContactReport> contacts;
  VectorXd udot;
  VectorXd tau_control;
};

/// Advance one step of size h from t = state.step_index * h. Prescribes the
/// seat coordinates from the excitation (exact zeros while it is quiet, or
/// holding still when there is no excitation), integrates the free
/// coordinates, and re-imposes the seat at the new time so the stored state
/// never drifts off the prescription. Throws DivergenceError naming the
/// first non-finite coordinate.
void advance(const Model& model, SimState& state, const ExcitationSignal* excitation, double h,
             Integrator integrator, StepOutput* out = nullptr);

struct TrajectoryLog {
  double sample_step = 0.0;           // seconds between rows
  std::vector<std::string> channels;  // column names, excluding leading "t"
  std::vector<double> times;
  std::vector<std::vector<double>> rows;  // rows[i][j] = channel j at times[i]

  int column(const std::string& name) const;          // throws if unknown
  std::vector<double> series(const std::string& name) const;
  void write_csv(std::ostream& os) const;  // header "t,<channel>,...",
                                           // shortest round-trip numbers
};

inline constexpr int kRestartFormatVersion = 1;

struct RestartSnapshot {
  int format_version = kRestartFormatVersion;
  std::uint64_t model_hash = 0;
  std::int64_t step_index = 0;
  double h = 0.0;
  VectorXd q, u;
  std::vector<double> controller_references;
  std::vector<double> controller_integrals;
};

void save_restart(const RestartSnapshot& snapshot, const std::string& path);
RestartSnapshot load_restart(const std::string& path);

struct RunSettings {
  double h = 1e-3;           // s
  double duration = 35.0;    // total simulated time from t = 0
  double settle_time = 5.0;  // quiet phase; references recaptured at its end
  Integrator integrator = Integrator::kSemiImplicitEuler;
  int log_stride = 1;        // keep every n-th step in the log
  std::vector<std::string> channels;
  bool make_snapshot = true;  // record a restart snapshot at the settle point
};

struct RunOutput {
  TrajectoryLog log;
  std::optional<RestartSnapshot> snapshot;
  std::int64_t steps = 0;
};

/// Channel grammar:
///   <segment>.pos.{x,y,z}     COM position, world               [m]
///   <segment>.vel.{x,y,z}     COM velocity, world               [m/s]
///   <segment>.acc.{x,y,z}     COM acceleration, world           [m/s²]
///   <segment>.ang.{x,y,z}     orientation Cardan angles, world  [rad]
///   <segment>.angvel.{x,y,z}  angular velocity, world           [rad/s]
///   <segment>.angacc.{x,y,z}  angular acceleration, world       [rad/s²]
///   q.<segment>.<coord>       generalized coordinate (see coordinate_name)
///   u.<segment>.<coord>       generalized velocity
///   ctrl.<segment>.<coord>    controller torque on that coordinate
///   contact.<pair>.fn         contact normal force magnitude    [N]
///   contact.<pair>.depth      contact penetration depth         [m]
RunOutput run(const Model& model, const ExcitationSignal* excitation, const RunSettings& settings);

/// Resume the excited window from a snapshot. Log rows reproduce an
/// uninterrupted run(...) of the same settings bit-for-bit.
RunOutput resume(const Model& model, const RestartSnapshot& snapshot,
                 const ExcitationSignal* excitation, const RunSettings& settings);

}  // namespace seatsim
