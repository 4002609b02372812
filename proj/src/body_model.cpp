#include "seatsim/body_model.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "seatsim/control.hpp"
#include "seatsim/dynamics.hpp"
#include "seatsim/forces.hpp"

namespace seatsim {

namespace {

using nlohmann::json;

const char* kAxialRows[] = {"pelvis", "lower_torso", "middle_torso",
                            "upper_torso", "neck", "head"};
const char* kMirroredRows[] = {"thigh", "lower_leg", "foot"};

// Posture constants at the reference scale: spine joints sit behind the hip
// axis (the vertebral column is posterior), the neck and head joints step
// back toward the body axis, and the sole hangs below the ankle.
constexpr double kLumbarSetback = 0.030;
constexpr double kNeckSetback = 0.020;
constexpr double kHeadSetback = 0.010;
constexpr double kSoleDrop = 0.072;
constexpr double kIschialSpacing = 0.060;

constexpr double kMaxInitialDepth = 0.005;  // m

// Joint restraint table: torsional stiffness/damping per Cardan axis of the
// named child segment's inboard joint. Joints with fewer rotational
// coordinates use the leading entries.
struct JointRestraintSpec {
  Vec3 stiffness;
  Vec3 damping;
};

const std::pair<const char*, JointRestraintSpec> kJointRestraints[] = {
    {"lower_torso", {{240.0, 220.0, 120.0}, {20.0, 18.0, 10.0}}},
    {"middle_torso", {{240.0, 220.0, 120.0}, {20.0, 18.0, 10.0}}},
    {"upper_torso", {{260.0, 250.0, 140.0}, {22.0, 20.0, 12.0}}},
    {"neck", {{40.0, 35.0, 0.0}, {3.0, 3.0, 0.0}}},
    {"head", {{20.0, 18.0, 10.0}, {1.5, 1.5, 0.8}}},
    {"thigh", {{120.0, 90.0, 80.0}, {10.0, 8.0, 7.0}}},
    {"lower_leg", {{40.0, 0.0, 0.0}, {4.0, 0.0, 0.0}}},
    {"foot", {{50.0, 0.0, 0.0}, {5.0, 0.0, 0.0}}},
};

constexpr double kSpineAxialStiffness = 3.0e4;  // N/m
constexpr double kSpineAxialDamping = 1.2e3;    // N·s/m

constexpr double kPelvisFleshStiffness = 2000.0;  // N/m
constexpr double kPelvisFleshDamping = 150.0;
constexpr double kTorsoFleshStiffness = 1200.0;
constexpr double kTorsoFleshDamping = 100.0;

[[noreturn]] void bad(const std::string& message) { throw BodyModelError(message); }

const SegmentRow& row(const Anthropometry& anthro, const std::string& name) {
  for (const SegmentRow& r : anthro.segments)
    if (r.name == name) return r;
  bad("anthropometry is missing segment row '" + name + "'");
}

// Strips a _left/_right suffix so mirrored segments share one table entry.
std::string base_name(const std::string& segment) {
  for (const char* suffix : {"_left", "_right"}) {
    const size_t n = std::string(suffix).size();
    if (segment.size() > n && segment.compare(segment.size() - n, n, suffix) == 0)
      return segment.substr(0, segment.size() - n);
  }
  return segment;
}

const JointRestraintSpec* restraint_for(const std::string& segment) {
  const std::string base = base_name(segment);
  for (const auto& [name, spec] : kJointRestraints)
    if (base == name) return &spec;
  return nullptr;
}

Vec3 read_vec3(const json& j, const std::string& key, const std::string& context) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
    bad(context + ": '" + key + "' must be an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = j[key][i].get<double>();
  return v;
}

double read_positive(const json& j, const std::string& key, const std::string& context) {
  if (!j.contains(key) || !j[key].is_number())
    bad(context + ": missing number '" + key + "'");
  const double v = j[key].get<double>();
  if (!(v > 0.0)) bad(context + ": '" + key + "' must be positive");
  return v;
}

// World positions of the joints in the default posture. Vertical spans of
// the seated chain are normalized so the crown lands exactly at the
// requested sitting height; everything else scales with stature.
struct Layout {
  double s;   // stature / reference_stature
  double sv;  // vertical scale of the seated chain
  double z_hip, z_l5_s1, z_l4_l5, z_t8, z_t1_c7, z_c1_c0, z_crown;
  double x_lumbar, x_t1_c7, x_c1_c0;
  double hip_y, knee_x, knee_z, ankle_z, sole_z;
};

Layout compute_layout(const Anthropometry& a) {
  Layout L;
  L.s = a.stature / a.reference_stature;
  const double chain = a.hip_height + row(a, "pelvis").length + row(a, "lower_torso").length +
                       row(a, "middle_torso").length + row(a, "upper_torso").length +
                       row(a, "neck").length + row(a, "head").length;
  L.sv = a.sitting_height / chain;
  L.z_hip = L.sv * a.hip_height;
  L.z_l5_s1 = L.z_hip + L.sv * row(a, "pelvis").length;
  L.z_l4_l5 = L.z_l5_s1 + L.sv * row(a, "lower_torso").length;
  L.z_t8 = L.z_l4_l5 + L.sv * row(a, "middle_torso").length;
  L.z_t1_c7 = L.z_t8 + L.sv * row(a, "upper_torso").length;
  L.z_c1_c0 = L.z_t1_c7 + L.sv * row(a, "neck").length;
  L.z_crown = L.z_c1_c0 + L.sv * row(a, "head").length;
  L.x_lumbar = -kLumbarSetback * L.s;
  L.x_t1_c7 = -kNeckSetback * L.s;
  L.x_c1_c0 = -kHeadSetback * L.s;
  L.hip_y = a.hip_half_spacing * L.s;
  L.knee_x = row(a, "thigh").length * L.s;
  L.knee_z = L.z_hip;
  L.ankle_z = L.knee_z - row(a, "lower_leg").length * L.s;
  L.sole_z = L.ankle_z - kSoleDrop * L.s;
  return L;
}

SegmentDef make_segment(const Anthropometry& a, const Layout& L, const std::string& name) {
  const SegmentRow& r = row(a, base_name(name));
  SegmentDef def;
  def.name = name;
  def.mass = r.mass_fraction * a.total_mass;
  def.com = r.com * L.s;
  const Vec3 g = r.gyration * L.s;
  def.inertia_com = def.mass * Vec3(g.x() * g.x(), g.y() * g.y(), g.z() * g.z()).asDiagonal();
  return def;
}

Ellipsoid flesh(const std::string& name, const Vec3& center, const Vec3& semi, double s) {
  Ellipsoid e;
  e.name = name;
  e.pose.p = center * s;
  e.semi_axes = semi * s;
  return e;
}

JointDef make_joint(JointKind kind, const std::string& parent, const std::string& child,
                    const Vec3& joint_world, const Vec3& parent_origin_world,
                    std::vector<Vec3> axes = {}) {
  JointDef j;
  j.kind = kind;
  j.parent = parent;
  j.child = child;
  j.parent_frame.p = joint_world - parent_origin_world;
  j.axes = std::move(axes);
  return j;
}

struct OccupantParts {
  std::vector<SegmentDef> segments;
  std::vector<JointDef> joints;
  Layout layout;
};

OccupantParts occupant_parts(const Anthropometry& a) {
  validate_anthropometry(a);
  const Layout L = compute_layout(a);
  OccupantParts out;
  out.layout = L;

  SegmentDef pelvis = make_segment(a, L, "pelvis");
  pelvis.geometry.push_back(
      flesh("buttocks", {-0.010, 0.0, -0.002}, {0.160, 0.170, 0.095}, L.s));
  SegmentDef lower = make_segment(a, L, "lower_torso");
  lower.geometry.push_back(
      flesh("torso_back", {-0.025, 0.0, 0.035}, {0.085, 0.130, 0.070}, L.s));
  SegmentDef middle = make_segment(a, L, "middle_torso");
  SegmentDef upper = make_segment(a, L, "upper_torso");
  upper.geometry.push_back(
      flesh("scapula_back", {-0.025, 0.0, 0.060}, {0.095, 0.150, 0.110}, L.s));
  SegmentDef neck = make_segment(a, L, "neck");
  SegmentDef head = make_segment(a, L, "head");
  head.geometry.push_back(flesh("skull", {0.010, 0.0, 0.095}, {0.080, 0.075, 0.095}, L.s));

  out.segments = {pelvis, lower, middle, upper, neck, head};
  for (const char* side : {"_left", "_right"}) {
    SegmentDef thigh = make_segment(a, L, std::string("thigh") + side);
    thigh.geometry.push_back(
        flesh("thigh_pad", {0.187, 0.0, -0.010}, {0.180, 0.070, 0.085}, L.s));
    SegmentDef shank = make_segment(a, L, std::string("lower_leg") + side);
    SegmentDef foot = make_segment(a, L, std::string("foot") + side);
    foot.geometry.push_back(flesh("sole", {0.050, 0.0, -0.037}, {0.110, 0.045, 0.035}, L.s));
    out.segments.push_back(thigh);
    out.segments.push_back(shank);
    out.segments.push_back(foot);
  }

  const Vec3 hip_mid(0.0, 0.0, L.z_hip);
  const Vec3 l5_s1(L.x_lumbar, 0.0, L.z_l5_s1);
  const Vec3 l4_l5(L.x_lumbar, 0.0, L.z_l4_l5);
  const Vec3 t8(L.x_lumbar, 0.0, L.z_t8);
  const Vec3 t1_c7(L.x_t1_c7, 0.0, L.z_t1_c7);
  const Vec3 c1_c0(L.x_c1_c0, 0.0, L.z_c1_c0);
  const Vec3 x_axis = Vec3::UnitX(), y_axis = Vec3::UnitY(), z_axis = Vec3::UnitZ();

  out.joints = {
      make_joint(JointKind::kFree6, "world", "pelvis", hip_mid, Vec3::Zero()),
      make_joint(JointKind::kSpherical3, "pelvis", "lower_torso", l5_s1, hip_mid),
      make_joint(JointKind::kSpherical3, "lower_torso", "middle_torso", l4_l5, l5_s1),
      make_joint(JointKind::kSphericalTranslational4, "middle_torso", "upper_torso", t8, l4_l5,
                 {z_axis}),
      make_joint(JointKind::kUniversal2, "upper_torso", "neck", t1_c7, t8, {x_axis, y_axis}),
      make_joint(JointKind::kSpherical3, "neck", "head", c1_c0, t1_c7),
  };
  for (const char* side : {"_left", "_right"}) {
    const double ys = (std::string(side) == "_left") ? 1.0 : -1.0;
    const Vec3 hip(0.0, ys * L.hip_y, L.z_hip);
    const Vec3 knee(L.knee_x, ys * L.hip_y, L.knee_z);
    const Vec3 ankle(L.knee_x, ys * L.hip_y, L.ankle_z);
    out.joints.push_back(
        make_joint(JointKind::kSpherical3, "pelvis", std::string("thigh") + side, hip, hip_mid));
    out.joints.push_back(make_joint(JointKind::kRevolute1, std::string("thigh") + side,
                                    std::string("lower_leg") + side, knee, hip, {y_axis}));
    out.joints.push_back(make_joint(JointKind::kRevolute1, std::string("lower_leg") + side,
                                    std::string("foot") + side, ankle, knee, {y_axis}));
  }
  return out;
}

void validate_tuning(const ModelTuning& tuning) {
  if (!(tuning.stiffness_scale > 0.0) || !(tuning.damping_scale > 0.0))
    bad("restraint scales must be positive");
  if (!(tuning.controller_settle_target > 0.0)) bad("controller settle target must be positive");
  if (!(tuning.integrator_limit > 0.0)) bad("integrator limit must be positive");
  for (const auto& [name, ov] : tuning.restraints) {
    bool known = false;
    for (const auto& [table_name, spec] : kJointRestraints)
      if (name == table_name) known = true;
    if (!known) bad("no joint restraint named '" + name + "'");
    for (int i = 0; i < 3; ++i)
      if (ov.stiffness[i] < 0.0 || ov.damping[i] < 0.0)
        bad("restraint override '" + name + "' has negative entries");
  }
}

void attach_restraints(const KinematicTree& tree, ForceElements& elements,
                       const ModelTuning& tuning) {
  for (int b = 0; b < tree.body_count(); ++b) {
    if (tree.segments[b].environment) continue;
    const JointRestraintSpec* spec = restraint_for(tree.segments[b].name);
    if (!spec) continue;
    const auto ov = tuning.restraints.find(base_name(tree.segments[b].name));
    CardanRestraint cr;
    cr.body = b;
    cr.stiffness = (ov != tuning.restraints.end() ? ov->second.stiffness : spec->stiffness) *
                   tuning.stiffness_scale;
    cr.damping = (ov != tuning.restraints.end() ? ov->second.damping : spec->damping) *
                 tuning.damping_scale;
    elements.cardan_restraints.push_back(cr);
    if (tree.joints[b].kind == JointKind::kSphericalTranslational4) {
      AxialRestraint ar;
      ar.body = b;
      ar.stiffness = kSpineAxialStiffness * tuning.stiffness_scale;
      ar.damping = kSpineAxialDamping * tuning.damping_scale;
      elements.axial_restraints.push_back(ar);
    }
  }
}

// Every occupant joint coordinate except the floating pelvis base gets a
// posture controller, tuned against the diagonal inertia of the default
// posture and the passive restraint already acting on the coordinate.
ControllerBank make_controllers(const KinematicTree& tree, const ForceElements& elements,
                                const ModelTuning& tuning) {
  std::vector<std::pair<double, double>> passive(tree.dof(), {0.0, 0.0});
  for (const CardanRestraint& cr : elements.cardan_restraints) {
    const auto [first, count] = rotational_block(tree.joints[cr.body].kind);
    for (int i = 0; i < count; ++i)
      passive[tree.dof_offset[cr.body] + first + i] = {cr.stiffness[i], cr.damping[i]};
  }
  for (const AxialRestraint& ar : elements.axial_restraints) {
    const int coord = axial_coordinate(tree.joints[ar.body].kind);
    if (coord >= 0) passive[tree.dof_offset[ar.body] + coord] = {ar.stiffness, ar.damping};
  }

  const MatrixXd M = mass_matrix(tree, VectorXd::Zero(tree.dof()));
  ControllerBank bank;
  for (int b = 0; b < tree.body_count(); ++b) {
    if (tree.segments[b].environment || tree.joints[b].parent == "world") continue;
    for (int i = 0; i < tree.joint_dof_count(b); ++i) {
      const int coord = tree.dof_offset[b] + i;
      ControlledDof dof;
      dof.name = coordinate_name(tree, coord);
      dof.dof = coord;
      dof.gains = tuned_gains(M(coord, coord), passive[coord].first, passive[coord].second,
                              tuning.controller_settle_target);
      dof.gains.integrator_limit = tuning.integrator_limit;
      bank.dofs.push_back(dof);
    }
  }
  return bank;
}

struct SurfaceLookup {
  SurfaceRef ellipsoid(const KinematicTree& tree, const std::string& body,
                       const std::string& name) const {
    const int b = tree.body_index(body);
    const auto& geo = tree.segments[b].geometry;
    for (size_t i = 0; i < geo.size(); ++i)
      if (geo[i].name == name) return {b, static_cast<int>(i)};
    bad("segment '" + body + "' has no ellipsoid '" + name + "'");
  }
  SurfaceRef plane(const KinematicTree& tree, const std::string& body,
                   const std::string& name) const {
    const int b = tree.body_index(body);
    const auto& pl = tree.segments[b].planes;
    for (size_t i = 0; i < pl.size(); ++i)
      if (pl[i].name == name) return {b, static_cast<int>(i)};
    bad("segment '" + body + "' has no plane '" + name + "'");
  }
};

ContactPair make_pair(const std::string& name, SurfaceRef a, SurfaceRef b, bool plane_b,
                      double stiffness, double damping, double mu) {
  ContactPair p;
  p.name = name;
  p.ellipsoid_a = a;
  p.surface_b = b;
  p.plane_b = plane_b;
  p.stiffness = stiffness;
  p.damping = damping;
  p.friction_mu = mu;
  return p;
}

void check_initial_depths(const Model& model) {
  const auto kin = forward_kinematics(model.tree, model.q0);
  for (const ContactPair& pair : model.elements.contacts) {
    const SegmentDef& sa = model.tree.segments[pair.ellipsoid_a.body];
    const Ellipsoid& ea = sa.geometry[pair.ellipsoid_a.index];
    const Pose pose_a = kin[pair.ellipsoid_a.body].X_wb * ea.pose;
    const auto& kb = kin[pair.surface_b.body];
    std::optional<Penetration> pen;
    if (pair.plane_b) {
      const Plane& pl = model.tree.segments[pair.surface_b.body].planes[pair.surface_b.index];
      const Vec3 n_w = kb.X_wb.R * pl.normal;
      pen = ellipsoid_plane_penetration(pose_a, ea.semi_axes, n_w,
                                        pl.offset + n_w.dot(kb.X_wb.p));
    } else {
      const Ellipsoid& eb = model.tree.segments[pair.surface_b.body].geometry[pair.surface_b.index];
      pen = ellipsoid_ellipsoid_penetration(pose_a, ea.semi_axes, kb.X_wb * eb.pose, eb.semi_axes);
    }
    if (pen && pen->depth > kMaxInitialDepth) {
      char msg[160];
      std::snprintf(msg, sizeof msg,
                    "contact '%s' starts %.1f mm deep, more than the 5 mm the flesh model allows",
                    pair.name.c_str(), pen->depth * 1e3);
      bad(msg);
    }
  }
}

char* fmt(char* buf, size_t n, double v) {
  std::snprintf(buf, n, "%.9g", v);
  return buf;
}

void print_vec(std::ostream& os, const Vec3& v) {
  char b[3][32];
  os << "(" << fmt(b[0], 32, v.x()) << ", " << fmt(b[1], 32, v.y()) << ", "
     << fmt(b[2], 32, v.z()) << ")";
}

}  // namespace

Anthropometry load_anthropometry(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open anthropometry file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    bad("anthropometry file '" + path + "' is not valid JSON: " + e.what());
  }
  const std::string ctx = "anthropometry file '" + path + "'";
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
    bad(ctx + ": unsupported format_version");
  if (!j.contains("reference") || !j["reference"].is_object())
    bad(ctx + ": missing 'reference' object");
  Anthropometry a;
  a.total_mass = read_positive(j["reference"], "total_mass_kg", ctx);
  a.stature = read_positive(j["reference"], "stature_m", ctx);
  a.sitting_height = read_positive(j["reference"], "sitting_height_m", ctx);
  a.reference_stature = a.stature;
  a.hip_height = read_positive(j, "hip_height_m", ctx);
  a.hip_half_spacing = read_positive(j, "hip_half_spacing_m", ctx);
  if (!j.contains("segments") || !j["segments"].is_array()) bad(ctx + ": missing 'segments'");
  a.segments.clear();
  for (const json& js : j["segments"]) {
    SegmentRow r;
    if (!js.contains("name") || !js["name"].is_string()) bad(ctx + ": segment without a name");
    r.name = js["name"].get<std::string>();
    const std::string sctx = ctx + ", segment '" + r.name + "'";
    r.mirrored = js.value("mirrored", false);
    r.mass_fraction = read_positive(js, "mass_fraction", sctx);
    r.length = read_positive(js, "length_m", sctx);
    r.com = read_vec3(js, "com_m", sctx);
    r.gyration = read_vec3(js, "gyration_m", sctx);
    if (r.gyration.minCoeff() <= 0.0) bad(sctx + ": gyration radii must be positive");
    a.segments.push_back(r);
  }
  validate_anthropometry(a);
  return a;
}

std::string default_anthropometry_path() {
  if (const char* env = std::getenv("SEATSIM_DATA_DIR"))
    return std::string(env) + "/anthropometry.json";
  return std::string(SEATSIM_DATA_DIR) + "/anthropometry.json";
}

void validate_anthropometry(const Anthropometry& a) {
  if (!(a.total_mass > 0.0)) bad("total mass must be positive");
  if (!(a.stature > 0.0) || !(a.reference_stature > 0.0)) bad("stature must be positive");
  if (!(a.sitting_height > 0.0) || a.sitting_height >= a.stature)
    bad("sitting height must be positive and below the stature");
  if (!(a.hip_height > 0.0) || !(a.hip_half_spacing > 0.0))
    bad("hip height and spacing must be positive");

  std::vector<std::string> seen;
  double fraction_sum = 0.0;
  for (const SegmentRow& r : a.segments) {
    for (const std::string& s : seen)
      if (s == r.name) bad("duplicate segment row '" + r.name + "'");
    seen.push_back(r.name);
    bool axial = false, mirrored = false;
    for (const char* n : kAxialRows) axial |= (r.name == n);
    for (const char* n : kMirroredRows) mirrored |= (r.name == n);
    if (!axial && !mirrored) bad("unknown segment row '" + r.name + "'");
    if (r.mirrored != mirrored)
      bad("segment row '" + r.name + "' has the wrong mirrored flag");
    if (!(r.mass_fraction > 0.0) || !(r.length > 0.0))
      bad("segment row '" + r.name + "' needs positive mass fraction and length");
    if (!(r.gyration.minCoeff() > 0.0))
      bad("segment row '" + r.name + "' needs positive gyration radii");
    fraction_sum += r.mass_fraction * (r.mirrored ? 2.0 : 1.0);
  }
  for (const char* n : kAxialRows)
    row(a, n);
  for (const char* n : kMirroredRows)
    row(a, n);
  if (std::abs(fraction_sum - 1.0) > 1e-6) {
    char msg[96];
    std::snprintf(msg, sizeof msg, "segment mass fractions sum to %.7f, expected 1", fraction_sum);
    bad(msg);
  }
}

std::map<std::string, RestraintOverride> default_joint_restraints() {
  std::map<std::string, RestraintOverride> out;
  for (const auto& [name, spec] : kJointRestraints) out[name] = {spec.stiffness, spec.damping};
  return out;
}

Model build_ehm(const Anthropometry& anthro, const ModelTuning& tuning) {
  validate_tuning(tuning);
  OccupantParts parts = occupant_parts(anthro);
  Model model;
  model.tree = build_tree(parts.segments, parts.joints);
  attach_restraints(model.tree, model.elements, tuning);
  if (tuning.controllers_enabled)
    model.controllers = make_controllers(model.tree, model.elements, tuning);
  model.q0 = VectorXd::Zero(model.tree.dof());
  model.u0 = VectorXd::Zero(model.tree.dof());
  return model;
}

SegmentDef build_seat(const SeatConfig& config, const Anthropometry& anthro) {
  validate_anthropometry(anthro);
  if (!(config.seat_mass > 0.0)) bad("seat mass must be positive");
  if (!(config.pan_stiffness > 0.0) || !(config.floor_stiffness > 0.0) ||
      !(config.backrest_stiffness > 0.0))
    bad("contact stiffness must be positive");
  const Layout L = compute_layout(anthro);
  const double s = L.s;

  SegmentDef seat;
  seat.name = "seat";
  seat.environment = true;
  seat.mass = config.seat_mass;
  seat.inertia_com = 10.0 * Mat3::Identity();
  seat.com = Vec3(0.0, 0.0, -0.15);

  Plane floor;
  floor.name = "floor";
  floor.normal = Vec3::UnitZ();
  floor.offset = L.sole_z + config.floor_lift;
  seat.planes.push_back(floor);

  // Pan slabs sit directly below their flesh counterparts so the
  // line-of-centers contact starts exactly at the configured depth.
  const Vec3 buttocks_center(-0.010 * s, 0.0, L.z_hip - 0.002 * s);
  Ellipsoid pan;
  pan.name = "pan_seat";
  pan.semi_axes = Vec3(0.300, 0.240, 0.100) * s;
  pan.pose.p = Vec3(buttocks_center.x(), 0.0,
                    buttocks_center.z() - 0.095 * s - pan.semi_axes.z() +
                        config.pan_preload + config.pan_lift);
  seat.geometry.push_back(pan);
  for (const char* side : {"_left", "_right"}) {
    const double ys = (std::string(side) == "_left") ? 1.0 : -1.0;
    Ellipsoid slab;
    slab.name = std::string("pan_thigh") + side;
    slab.semi_axes = Vec3(0.260, 0.100, 0.090) * s;
    slab.pose.p = Vec3(0.187 * s, ys * L.hip_y,
                       (L.z_hip - 0.010 * s) - 0.085 * s - slab.semi_axes.z() + config.pan_lift);
    seat.geometry.push_back(slab);
  }

  if (config.backrest) {
    const Vec3 lower_back(L.x_lumbar - 0.025 * s, 0.0, L.z_l5_s1 + 0.035 * s);
    const Vec3 upper_back(L.x_lumbar - 0.025 * s, 0.0, L.z_t8 + 0.060 * s);
    Ellipsoid lower_pad, upper_pad;
    lower_pad.name = "backrest_lower";
    lower_pad.semi_axes = Vec3(0.050, 0.140, 0.060) * s;
    lower_pad.pose.p = Vec3(
        lower_back.x() - 0.085 * s - lower_pad.semi_axes.x() - config.backrest_clearance, 0.0,
        lower_back.z());
    upper_pad.name = "backrest_upper";
    upper_pad.semi_axes = Vec3(0.050, 0.160, 0.090) * s;
    upper_pad.pose.p = Vec3(
        upper_back.x() - 0.095 * s - upper_pad.semi_axes.x() - config.backrest_clearance, 0.0,
        upper_back.z());
    // Recline pivots the pad column rearward about the lower pad's base.
    const Vec3 pivot(lower_pad.pose.p.x(), 0.0, 0.0);
    const Mat3 R = Eigen::AngleAxisd(-config.backrest_angle, Vec3::UnitY()).toRotationMatrix();
    for (Ellipsoid* pad : {&lower_pad, &upper_pad}) {
      pad->pose.p = pivot + R * (pad->pose.p - pivot);
      pad->pose.R = R;
    }
    seat.geometry.push_back(lower_pad);
    seat.geometry.push_back(upper_pad);
  }
  return seat;
}

Model build_model(const Anthropometry& anthro, const SeatConfig& config,
                  const ModelTuning& tuning) {
  validate_tuning(tuning);
  OccupantParts parts = occupant_parts(anthro);
  parts.segments.push_back(build_seat(config, anthro));
  JointDef seat_joint;
  seat_joint.kind = JointKind::kFree6;
  seat_joint.parent = "world";
  seat_joint.child = "seat";
  parts.joints.push_back(seat_joint);

  Model model;
  model.tree = build_tree(parts.segments, parts.joints);
  model.seat_body = model.tree.body_index("seat");
  attach_restraints(model.tree, model.elements, tuning);

  const Layout& L = parts.layout;
  const double s = L.s;
  const SurfaceLookup find;
  const int seat_b = model.seat_body;
  auto& contacts = model.elements.contacts;
  contacts.push_back(make_pair("pelvis_pan", find.ellipsoid(model.tree, "pelvis", "buttocks"),
                               find.ellipsoid(model.tree, "seat", "pan_seat"), false,
                               config.pan_stiffness, config.pan_damping, config.friction_mu));
  for (const char* side : {"_left", "_right"}) {
    contacts.push_back(make_pair(
        std::string("thigh") + side + "_pan",
        find.ellipsoid(model.tree, std::string("thigh") + side, "thigh_pad"),
        find.ellipsoid(model.tree, "seat", std::string("pan_thigh") + side), false,
        0.5 * config.pan_stiffness, 0.5 * config.pan_damping, config.friction_mu));
    contacts.push_back(make_pair(
        std::string("foot") + side + "_floor",
        find.ellipsoid(model.tree, std::string("foot") + side, "sole"),
        find.plane(model.tree, "seat", "floor"), true, config.floor_stiffness,
        config.floor_damping, config.friction_mu));
  }
  if (config.backrest) {
    contacts.push_back(make_pair(
        "lower_torso_backrest", find.ellipsoid(model.tree, "lower_torso", "torso_back"),
        find.ellipsoid(model.tree, "seat", "backrest_lower"), false, config.backrest_stiffness,
        config.backrest_damping, config.friction_mu));
    contacts.push_back(make_pair(
        "upper_torso_backrest", find.ellipsoid(model.tree, "upper_torso", "scapula_back"),
        find.ellipsoid(model.tree, "seat", "backrest_upper"), false, config.backrest_stiffness,
        config.backrest_damping, config.friction_mu));
  }

  // Flesh shear: the buttocks grip the pan at the ischial points, the torso
  // drags against the pads. The attach points coincide in the default
  // posture, so the restraints start force-free.
  const int pelvis_b = model.tree.body_index("pelvis");
  for (const double ys : {1.0, -1.0}) {
    PointRestraint pr;
    pr.body_a = pelvis_b;
    pr.body_b = seat_b;
    pr.attach_a = Vec3(0.0, ys * kIschialSpacing * s, -L.z_hip);
    pr.attach_b = Vec3(0.0, ys * kIschialSpacing * s, 0.0);
    pr.stiffness = kPelvisFleshStiffness;
    pr.damping = kPelvisFleshDamping;
    model.elements.point_restraints.push_back(pr);
  }
  if (config.backrest) {
    PointRestraint lower;
    lower.body_a = model.tree.body_index("lower_torso");
    lower.body_b = seat_b;
    lower.attach_a = Vec3(-0.110 * s, 0.0, 0.035 * s);
    lower.attach_b = Vec3(L.x_lumbar - 0.110 * s, 0.0, L.z_l5_s1 + 0.035 * s);
    lower.stiffness = kTorsoFleshStiffness;
    lower.damping = kTorsoFleshDamping;
    PointRestraint upper = lower;
    upper.body_a = model.tree.body_index("upper_torso");
    upper.attach_a = Vec3(-0.120 * s, 0.0, 0.060 * s);
    upper.attach_b = Vec3(L.x_lumbar - 0.120 * s, 0.0, L.z_t8 + 0.060 * s);
    model.elements.point_restraints.push_back(lower);
    model.elements.point_restraints.push_back(upper);
  }

  if (tuning.controllers_enabled)
    model.controllers = make_controllers(model.tree, model.elements, tuning);
  model.q0 = VectorXd::Zero(model.tree.dof());
  model.u0 = VectorXd::Zero(model.tree.dof());
  check_initial_depths(model);
  return model;
}

void dump_model(const Model& model, std::ostream& os) {
  const KinematicTree& tree = model.tree;
  char b[4][32];
  os << "model: " << tree.body_count() << " segments, " << tree.dof() << " dof (occupant "
     << tree.occupant_segment_count() << " segments, " << tree.occupant_dof() << " dof)\n";
  os << "gravity: ";
  print_vec(os, model.gravity);
  os << "\nseat body: " << model.seat_body << "\n";

  for (int i = 0; i < tree.body_count(); ++i) {
    const SegmentDef& seg = tree.segments[i];
    os << "segment " << seg.name << (seg.environment ? " [environment]" : "") << ": mass "
       << fmt(b[0], 32, seg.mass) << " com ";
    print_vec(os, seg.com);
    os << " inertia ";
    print_vec(os, seg.inertia_com.diagonal());
    os << "\n";
    for (const Ellipsoid& e : seg.geometry) {
      os << "  ellipsoid " << e.name << ": semi ";
      print_vec(os, e.semi_axes);
      os << " center ";
      print_vec(os, e.pose.p);
      os << "\n";
    }
    for (const Plane& p : seg.planes) {
      os << "  plane " << p.name << ": normal ";
      print_vec(os, p.normal);
      os << " offset " << fmt(b[0], 32, p.offset) << "\n";
    }
  }
  for (int i = 0; i < tree.body_count(); ++i) {
    const JointDef& j = tree.joints[i];
    os << "joint " << j.parent << " -> " << j.child << ": " << joint_kind_name(j.kind) << " at ";
    print_vec(os, j.parent_frame.p);
    os << "\n";
  }
  for (const CardanRestraint& r : model.elements.cardan_restraints) {
    os << "cardan restraint " << tree.segments[r.body].name << ": k ";
    print_vec(os, r.stiffness);
    os << " c ";
    print_vec(os, r.damping);
    os << "\n";
  }
  for (const AxialRestraint& r : model.elements.axial_restraints) {
    os << "axial restraint " << tree.segments[r.body].name << ": k "
       << fmt(b[0], 32, r.stiffness) << " c " << fmt(b[1], 32, r.damping) << "\n";
  }
  for (const PointRestraint& r : model.elements.point_restraints) {
    os << "point restraint " << tree.segments[r.body_a].name << " -> "
       << tree.segments[r.body_b].name << ": k " << fmt(b[0], 32, r.stiffness) << " c "
       << fmt(b[1], 32, r.damping) << " attach ";
    print_vec(os, r.attach_a);
    os << " -> ";
    print_vec(os, r.attach_b);
    os << "\n";
  }
  for (const ContactPair& p : model.elements.contacts) {
    os << "contact " << p.name << ": k " << fmt(b[0], 32, p.stiffness) << " c "
       << fmt(b[1], 32, p.damping) << " mu " << fmt(b[2], 32, p.friction_mu) << "\n";
  }
  os << "controllers: " << model.controllers.dofs.size() << "\n";
  for (const ControlledDof& d : model.controllers.dofs) {
    os << "  " << d.name << ": kp " << fmt(b[0], 32, d.gains.kp) << " ki "
       << fmt(b[1], 32, d.gains.ki) << " kd " << fmt(b[2], 32, d.gains.kd) << " limit "
       << fmt(b[3], 32, d.gains.integrator_limit) << "\n";
  }
}

}  // namespace seatsim
