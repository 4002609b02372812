// Force elements acting on the kinematic tree: gravity, joint restraints,
// point restraints, and penetration contact with regularized friction.
//
// Restraint torques act directly on generalized coordinates (rotational
// coordinates are Cardan angles and u = q̇, so a torque about a Cardan axis
// is already a generalized force). Contact and point-restraint forces are
// world wrenches folded through the kinematics.

#pragma once

#include <optional>
#include <vector>

#include "seatsim/tree.hpp"

namespace seatsim {

struct ForceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Torsional spring-damper triple on the Cardan angles of one joint. For
/// joints with fewer than three rotational coordinates the leading entries
/// apply; translational coordinates are never touched.
struct CardanRestraint {
  int body = -1;        // tree body whose inboard joint is restrained
  Vec3 stiffness = Vec3::Zero();  // N·m/rad per Cardan axis
  Vec3 damping = Vec3::Zero();    // N·m·s/rad
  Vec3 neutral = Vec3::Zero();    // rad
};

/// Linear spring-damper on the translation coordinate of a joint
/// (translational1 or the slide of spherical_translational4).
struct AxialRestraint {
  int body = -1;
  double stiffness = 0.0;  // N/m
  double damping = 0.0;    // N·s/m
  double neutral = 0.0;    // m
};

/// Linear spring-damper between two body-fixed points (body index -1 means
/// the attach point is fixed in the world).
struct PointRestraint {
  int body_a = -1;
  int body_b = -1;
  Vec3 attach_a = Vec3::Zero();  // in body_a frame (world frame if -1)
  Vec3 attach_b = Vec3::Zero();
  double stiffness = 0.0;  // N/m
  double damping = 0.0;    // N·s/m
};

/// Index of a geometry primitive on a body.
struct SurfaceRef {
  int body = -1;
  int index = 0;
};

struct ContactPair {
  std::string name;
  SurfaceRef ellipsoid_a;  // always an ellipsoid
  SurfaceRef surface_b;    // ellipsoid, or plane when plane_b is set
  bool plane_b = false;
  double stiffness = 5.0e4;       // N/m
  double damping = 500.0;         // N·s/m
  double friction_mu = 0.5;
  double friction_vel_eps = 1e-3;  // m/s, Coulomb regularization
};

struct Penetration {
  double depth = 0.0;   // m, > 0 when surfaces overlap
  Vec3 point = Vec3::Zero();   // world contact point
  Vec3 normal = Vec3::Zero();  // world unit vector pushing surface A out of B
};

/// Deepest point of a world-posed ellipsoid below the world plane
/// normal·x = offset. Empty when the ellipsoid clears the plane.
std::optional<Penetration> ellipsoid_plane_penetration(const Pose& pose, const Vec3& semi_axes,
                                                       const Vec3& plane_normal,
                                                       double plane_offset);

/// Line-of-centers overlap of two world-posed ellipsoids: the center segment
/// is intersected with both surfaces and the overlap of the two radii is the
/// depth. Approximate for non-spheres, adequate for shallow seat contact.
/// Coincident centers leave the direction undefined: the caller supplies the
/// previous step's normal or gets an error.
std::optional<Penetration> ellipsoid_ellipsoid_penetration(const Pose& pose_a, const Vec3& axes_a,
                                                           const Pose& pose_b, const Vec3& axes_b,
                                                           const Vec3* fallback_normal = nullptr);

struct ContactForce {
  Vec3 normal_force = Vec3::Zero();    // on surface A
  Vec3 friction_force = Vec3::Zero();  // on surface A
};

/// Unilateral linear contact law with regularized Coulomb friction.
/// `depth_rate` > 0 while penetration grows; `tangential_velocity` is the
/// slip velocity of A relative to B at the contact point.
ContactForce contact_force(const Penetration& pen, double depth_rate,
                           const Vec3& tangential_velocity, const ContactPair& pair);

/// Per-contact diagnostics from the last assembly.
struct ContactReport {
  bool active = false;
  double depth = 0.0;
  double normal_force = 0.0;  // magnitude, N
};

struct ForceElements {
  std::vector<CardanRestraint> cardan_restraints;
  std::vector<AxialRestraint> axial_restraints;
  std::vector<PointRestraint> point_restraints;
  std::vector<ContactPair> contacts;
};

/// Offset and length of the Cardan-angle block inside a joint's coordinates.
std::pair<int, int> rotational_block(JointKind kind);
/// Coordinate index of a joint's translation coordinate, -1 if it has none
/// that an axial restraint may act on.
int axial_coordinate(JointKind kind);

/// Sum of every element's generalized force at state (q, u), with gravity
/// applied at each segment COM. `kin` must be the kinematics of (q, u).
/// `reports`, when given, is resized to the contact list and filled with
/// per-pair diagnostics.
VectorXd assemble_generalized_forces(const KinematicTree& tree, const VectorXd& q,
                                     const VectorXd& u, const std::vector<BodyKinematics>& kin,
                                     const ForceElements& elements, const Vec3& gravity,
                                     std::vector<ContactReport>* reports = nullptr);

}  // namespace seatsim
