// Reduced-coordinate kinematic tree: segment/joint definitions and the
// per-configuration kinematics cache shared by dynamics and force assembly.
//
// Generalized velocities are the time derivatives of the generalized
// coordinates for every joint kind (rotational coordinates are Cardan
// angles, so u is the vector of Cardan angle rates and translation rates).
// This makes Cardan restraint torques and per-DoF controller torques map
// onto generalized forces without any further projection.

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "seatsim/spatial.hpp"

namespace seatsim {

struct TreeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class JointKind {
  kFree6,
  kSpherical3,
  kUniversal2,
  kRevolute1,
  kTranslational1,
  kSphericalTranslational4,
};

int joint_dof(JointKind kind);
const char* joint_kind_name(JointKind kind);

/// Contact/inertia ellipsoid rigidly attached to a segment.
struct Ellipsoid {
  std::string name;
  Vec3 semi_axes = Vec3::Ones();
  Pose pose;  // ellipsoid frame in segment frame; center at pose.p
};

/// Contact plane rigidly attached to a segment: normal·x = offset in the
/// segment frame, material on the normal side pushes bodies toward +normal.
struct Plane {
  std::string name;
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
};

struct SegmentDef {
  std::string name;
  double mass = 0.0;
  Mat3 inertia_com = Mat3::Zero();  // about COM, in segment frame
  Vec3 com = Vec3::Zero();          // COM in segment frame
  std::vector<Ellipsoid> geometry;
  std::vector<Plane> planes;
  bool environment = false;  // seat/floor bodies, excluded from occupant totals
};

/// Joint connecting `parent` (segment name or "world") to `child`.
///
/// Coordinate layout per kind:
///   free6:                  [tx, ty, tz, rx, ry, rz]   translation of the
///                           child joint frame origin in the parent joint
///                           frame, then Cardan x-y-z angles
///   spherical3:             [rx, ry, rz]               Cardan angles about `axes`
///   universal2:             [r0, r1]                   angles about axes[0], axes[1]
///   revolute1:              [r0]                       angle about axes[0]
///   translational1:         [t0]                       translation along axes[0]
///   spherical_translational4: [rx, ry, rz, t]          Cardan angles, then
///                           translation along axes[0] expressed in the child
///                           joint frame (the axis rides with the rotation)
struct JointDef {
  JointKind kind = JointKind::kRevolute1;
  std::string parent;  // "world" for the root joint
  std::string child;
  Pose parent_frame;  // joint frame in parent segment frame
  Pose child_frame;   // joint frame in child segment frame
  std::vector<Vec3> axes;
};

struct KinematicTree {
  // Segments in topological order, segment i's inboard joint is joints[i].
  std::vector<SegmentDef> segments;
  std::vector<JointDef> joints;
  std::vector<int> parent;      // parent segment index, -1 for world
  std::vector<int> dof_offset;  // first generalized coordinate of joint i
  std::vector<SpatialInertia> body_inertia;  // about segment frame origin

  int dof() const { return total_dof_; }
  int body_count() const { return static_cast<int>(segments.size()); }
  int body_index(const std::string& name) const;
  bool has_body(const std::string& name) const;
  int joint_dof_count(int body) const { return joint_dof(joints[body].kind); }

  /// Count of non-environment segments and their DoF.
  int occupant_segment_count() const;
  int occupant_dof() const;

  int total_dof_ = 0;
  std::unordered_map<std::string, int> index_by_name_;
};

/// Validates the joint graph (rooted tree, no duplicate children, no cycles,
/// no dangling references) and assigns DoF ranges in topological order.
KinematicTree build_tree(std::vector<SegmentDef> segments, std::vector<JointDef> joints);

/// Everything about one body's kinematics at a given (q, u).
struct BodyKinematics {
  Pose X_pb;         // body frame in parent frame
  Pose X_wb;         // body frame in world
  JointSubspace S;   // joint motion subspace, child body coordinates
  Vec6 v_joint = Vec6::Zero();  // S * u_joint
  Vec6 c_bias = Vec6::Zero();   // Sdot * u_joint
  Vec6 v = Vec6::Zero();        // body twist, body coordinates
  Vec6 v_world = Vec6::Zero();  // body twist, world coordinates at body origin
  Vec3 com_world = Vec3::Zero();
};

/// Forward kinematics + velocity propagation for all bodies.
std::vector<BodyKinematics> compute_kinematics(const KinematicTree& tree, const VectorXd& q,
                                               const VectorXd& u);

/// Position-only forward kinematics (u treated as zero).
std::vector<BodyKinematics> forward_kinematics(const KinematicTree& tree, const VectorXd& q);

/// World-frame velocity of a body-fixed point (point given in body frame).
Vec3 point_velocity_world(const BodyKinematics& bk, const Vec3& point_body);

/// World-frame classical acceleration of a body-fixed point. `a_body` is the
/// body-frame spatial acceleration (apparent derivative of the body twist).
Vec3 point_acceleration_world(const BodyKinematics& bk, const Vec6& a_body, const Vec3& point_body);

/// Human-readable name of one generalized coordinate, e.g. "pelvis.ry".
std::string coordinate_name(const KinematicTree& tree, int coordinate);

}  // namespace seatsim
