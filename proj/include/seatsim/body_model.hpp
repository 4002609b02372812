// Seated human body builder: 12 segments, 31 DoF, spring-damper joint
// restraints, flesh attachments, per-DoF posture controllers, and the seat
// environment the body rests on.
//
// Conventions: x forward (toward the knees), y left, z up. The seat frame
// origin lies at the center of the seat-pan top surface, and every segment
// frame is world-aligned in the default posture, so q = 0 is the erect
// seated pose and all Cardan angles start at zero.

#pragma once

#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "seatsim/simulation.hpp"

namespace seatsim {

struct BodyModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One row of the segment table. All meters at the reference stature;
/// the segment frame origin is the proximal joint.
struct SegmentRow {
  std::string name;
  bool mirrored = false;       // built once per side (thigh, lower_leg, foot)
  double mass_fraction = 0.0;  // of total body mass, per built instance
  double length = 0.0;         // proximal-to-distal span, m
  Vec3 com = Vec3::Zero();     // COM offset in the segment frame, m
  Vec3 gyration = Vec3::Zero();  // radii of gyration about the COM axes, m
};

struct Anthropometry {
  double total_mass = 75.3;      // kg
  double stature = 1.76;         // m
  double sitting_height = 0.92;  // m, pan surface to crown
  // Scale of the table entries; lengths are multiplied by
  // stature / reference_stature and the seated chain is then normalized so
  // the crown lands exactly at sitting_height.
  double reference_stature = 1.76;
  double hip_height = 0.095;       // hip joint above the pan, reference scale
  double hip_half_spacing = 0.09;  // hip joint lateral offset, reference scale
  std::vector<SegmentRow> segments;
};

/// Reads the segment table shipped in data/anthropometry.json (or another
/// file of the same format). The file is the single source of truth for
/// segment masses and dimensions.
Anthropometry load_anthropometry(const std::string& path);

/// Path of the shipped table; honors the SEATSIM_DATA_DIR environment
/// variable so relocated installs can point elsewhere.
std::string default_anthropometry_path();

/// Consistency checks shared by the builders: known segment rows, positive
/// dimensions, and mass fractions (mirrored rows counted twice) summing to
/// one within 1e-6.
void validate_anthropometry(const Anthropometry& anthro);

struct SeatConfig {
  double seat_mass = 60.0;  // driven platform: pan, backrest, and floor
  // Surface placement relative to the default-posture body: positive lift
  // moves the surface into the body, preload/clearance set the initial
  // penetration of the pelvis into the pan and the gap behind the torso.
  double pan_lift = 0.0;              // m
  double floor_lift = 0.0;            // m
  double pan_preload = 0.002;         // m
  double backrest_clearance = 0.002;  // m
  double backrest_angle = 0.0;  // rad, rearward recline of the pad column
  bool backrest = true;
  double pan_stiffness = 5.0e4;  // N/m
  double pan_damping = 500.0;    // N·s/m
  double floor_stiffness = 8.0e4;
  double floor_damping = 400.0;
  double backrest_stiffness = 3.0e4;
  double backrest_damping = 300.0;
  double friction_mu = 0.5;
};

/// Per-joint restraint override, addressed by the child segment's base name
/// (mirrored sides share one entry).
struct RestraintOverride {
  Vec3 stiffness = Vec3::Zero();
  Vec3 damping = Vec3::Zero();
};

/// Knobs applied on top of the built-in restraint table while the model is
/// assembled. Controller gains are always derived from the final restraint
/// values, so overriding a stiffness retunes the controller on that joint.
struct ModelTuning {
  double stiffness_scale = 1.0;  // multiplies every joint restraint
  double damping_scale = 1.0;
  std::map<std::string, RestraintOverride> restraints;
  bool controllers_enabled = true;
  double controller_settle_target = 3.0;  // s to pull posture back to setpoint
  double integrator_limit = 6.0;          // N·m²·s, anti-windup clamp
};

/// The built-in restraint table, keyed like ModelTuning::restraints.
std::map<std::string, RestraintOverride> default_joint_restraints();

/// The occupant alone: 12 segments and 31 DoF with joint restraints and
/// posture controllers, no environment and no contacts.
Model build_ehm(const Anthropometry& anthro, const ModelTuning& tuning = {});

/// The environment segment: floor plane, pan slabs, and backrest pads,
/// placed against the default-posture body built from `anthro`.
SegmentDef build_seat(const SeatConfig& config, const Anthropometry& anthro);

/// The occupant on the seat: build_ehm plus the environment body, the
/// contact pairs (feet-floor, pelvis/thighs-pan, torso-backrest), and the
/// flesh point restraints tying pelvis and torso to the seat. Throws when
/// any contact starts more than 5 mm deep.
Model build_model(const Anthropometry& anthro, const SeatConfig& config = {},
                  const ModelTuning& tuning = {});

/// Canonical plain-text description of a model, stable across builds, for
/// diffing two configurations.
void dump_model(const Model& model, std::ostream& os);

}  // namespace seatsim
