#include "seatsim/forces.hpp"

#include "seatsim/dynamics.hpp"

namespace seatsim {

namespace {

/// Velocity of the body-fixed point currently at `point_world`.
Vec3 body_point_velocity(const BodyKinematics& bk, const Vec3& point_world) {
  return bk.v_world.tail<3>() + bk.v_world.head<3>().cross(point_world - bk.X_wb.p);
}

void add_wrench_at_point(Vec6& wrench, const Pose& X_wb, const Vec3& point_world,
                         const Vec3& force_world) {
  wrench.head<3>() += (point_world - X_wb.p).cross(force_world);
  wrench.tail<3>() += force_world;
}

const Ellipsoid& ellipsoid_at(const KinematicTree& tree, const SurfaceRef& ref) {
  if (ref.body < 0 || ref.body >= tree.body_count())
    throw ForceError("contact surface references body index out of range");
  const auto& geo = tree.segments[ref.body].geometry;
  if (ref.index < 0 || ref.index >= static_cast<int>(geo.size()))
    throw ForceError("segment '" + tree.segments[ref.body].name + "' has no ellipsoid " +
                     std::to_string(ref.index));
  return geo[ref.index];
}

const Plane& plane_at(const KinematicTree& tree, const SurfaceRef& ref) {
  if (ref.body < 0 || ref.body >= tree.body_count())
    throw ForceError("contact surface references body index out of range");
  const auto& planes = tree.segments[ref.body].planes;
  if (ref.index < 0 || ref.index >= static_cast<int>(planes.size()))
    throw ForceError("segment '" + tree.segments[ref.body].name + "' has no plane " +
                     std::to_string(ref.index));
  return planes[ref.index];
}

}  // namespace

std::optional<Penetration> ellipsoid_plane_penetration(const Pose& pose, const Vec3& semi_axes,
                                                       const Vec3& plane_normal,
                                                       double plane_offset) {
  if (semi_axes.minCoeff() <= 0.0) throw ForceError("ellipsoid semi-axes must be positive");
  // Deepest point against the normal: support point of the ellipsoid in the
  // -normal direction.
  const Vec3 n_local = semi_axes.asDiagonal() * (pose.R.transpose() * plane_normal);
  const double n_norm = n_local.norm();
  const Vec3 deepest = pose.p - pose.R * (semi_axes.asDiagonal() * (n_local / n_norm));
  const double depth = plane_offset - plane_normal.dot(deepest);
  if (depth <= 0.0) return std::nullopt;
  Penetration pen;
  pen.depth = depth;
  pen.point = deepest;
  pen.normal = plane_normal;
  return pen;
}

namespace {

/// Distance from the ellipsoid center to its surface along a unit world
/// direction.
double ray_radius(const Pose& pose, const Vec3& semi_axes, const Vec3& dir_world) {
  const Vec3 d = pose.R.transpose() * dir_world;
  return 1.0 / (d.cwiseQuotient(semi_axes)).norm();
}

}  // namespace

std::optional<Penetration> ellipsoid_ellipsoid_penetration(const Pose& pose_a, const Vec3& axes_a,
                                                           const Pose& pose_b, const Vec3& axes_b,
                                                           const Vec3* fallback_normal) {
  if (axes_a.minCoeff() <= 0.0 || axes_b.minCoeff() <= 0.0)
    throw ForceError("ellipsoid semi-axes must be positive");
  const Vec3 separation = pose_a.p - pose_b.p;
  const double dist = separation.norm();
  Vec3 u;  // unit direction from b's center toward a's center
  if (dist < 1e-12) {
    if (!fallback_normal) throw ForceError("coincident ellipsoid centers: direction undefined");
    u = *fallback_normal;
  } else {
    u = separation / dist;
  }
  const double ra = ray_radius(pose_a, axes_a, -u);
  const double rb = ray_radius(pose_b, axes_b, u);
  const double depth = ra + rb - dist;
  if (depth <= 0.0) return std::nullopt;
  Penetration pen;
  pen.depth = depth;
  // Midpoint of the overlap segment [a-side surface point, b-side surface point].
  pen.point = 0.5 * ((pose_a.p - ra * u) + (pose_b.p + rb * u));
  pen.normal = u;
  return pen;
}

ContactForce contact_force(const Penetration& pen, double depth_rate,
                           const Vec3& tangential_velocity, const ContactPair& pair) {
  ContactForce out;
  const double fn = pair.stiffness * pen.depth + pair.damping * depth_rate;
  if (fn <= 0.0) return out;  // unilateral: never pulls surfaces together
  out.normal_force = fn * pen.normal;
  out.friction_force = -pair.friction_mu * fn * tangential_velocity /
                       (tangential_velocity.norm() + pair.friction_vel_eps);
  return out;
}

std::pair<int, int> rotational_block(JointKind kind) {
  switch (kind) {
    case JointKind::kFree6: return {3, 3};
    case JointKind::kSpherical3: return {0, 3};
    case JointKind::kUniversal2: return {0, 2};
    case JointKind::kRevolute1: return {0, 1};
    case JointKind::kTranslational1: return {0, 0};
    case JointKind::kSphericalTranslational4: return {0, 3};
  }
  return {0, 0};
}

int axial_coordinate(JointKind kind) {
  switch (kind) {
    case JointKind::kTranslational1: return 0;
    case JointKind::kSphericalTranslational4: return 3;
    default: return -1;
  }
}

VectorXd assemble_generalized_forces(const KinematicTree& tree, const VectorXd& q,
                                     const VectorXd& u, const std::vector<BodyKinematics>& kin,
                                     const ForceElements& elements, const Vec3& gravity,
                                     std::vector<ContactReport>* reports) {
  const int n = tree.body_count();
  if (q.size() != tree.dof() || u.size() != tree.dof())
    throw ForceError("state size mismatch in force assembly");
  VectorXd tau = VectorXd::Zero(tree.dof());
  BodyWrenches wrenches(n, Vec6::Zero());
  bool any_wrench = false;

  if (!gravity.isZero()) {
    any_wrench = true;
    for (int i = 0; i < n; ++i) {
      const Vec3 f = tree.segments[i].mass * gravity;
      const Vec3 com_offset = kin[i].X_wb.R * tree.segments[i].com;
      wrenches[i].head<3>() += com_offset.cross(f);
      wrenches[i].tail<3>() += f;
    }
  }

  for (const auto& r : elements.cardan_restraints) {
    if (r.body < 0 || r.body >= n) throw ForceError("Cardan restraint references no body");
    const auto [block, count] = rotational_block(tree.joints[r.body].kind);
    const int off = tree.dof_offset[r.body] + block;
    for (int k = 0; k < count; ++k)
      tau[off + k] -= r.stiffness[k] * (q[off + k] - r.neutral[k]) + r.damping[k] * u[off + k];
  }

  for (const auto& r : elements.axial_restraints) {
    if (r.body < 0 || r.body >= n) throw ForceError("axial restraint references no body");
    const int coord = axial_coordinate(tree.joints[r.body].kind);
    if (coord < 0)
      throw ForceError("axial restraint on '" + tree.segments[r.body].name +
                       "': joint has no translation coordinate");
    const int off = tree.dof_offset[r.body] + coord;
    tau[off] -= r.stiffness * (q[off] - r.neutral) + r.damping * u[off];
  }

  for (const auto& r : elements.point_restraints) {
    if (r.body_a >= n || r.body_b >= n || (r.body_a < 0 && r.body_b < 0))
      throw ForceError("point restraint references no body");
    Vec3 xa = r.attach_a, va = Vec3::Zero();
    Vec3 xb = r.attach_b, vb = Vec3::Zero();
    if (r.body_a >= 0) {
      xa = kin[r.body_a].X_wb * r.attach_a;
      va = body_point_velocity(kin[r.body_a], xa);
    }
    if (r.body_b >= 0) {
      xb = kin[r.body_b].X_wb * r.attach_b;
      vb = body_point_velocity(kin[r.body_b], xb);
    }
    const Vec3 f_a = -r.stiffness * (xa - xb) - r.damping * (va - vb);
    if (f_a.isZero()) continue;
    any_wrench = true;
    if (r.body_a >= 0) add_wrench_at_point(wrenches[r.body_a], kin[r.body_a].X_wb, xa, f_a);
    if (r.body_b >= 0) add_wrench_at_point(wrenches[r.body_b], kin[r.body_b].X_wb, xb, -f_a);
  }

  if (reports) {
    reports->clear();
    reports->resize(elements.contacts.size());
  }
  for (size_t ci = 0; ci < elements.contacts.size(); ++ci) {
    const ContactPair& pair = elements.contacts[ci];
    const Ellipsoid& ea = ellipsoid_at(tree, pair.ellipsoid_a);
    const int ba = pair.ellipsoid_a.body;
    const int bb = pair.surface_b.body;
    const Pose pose_a = kin[ba].X_wb * ea.pose;

    std::optional<Penetration> pen;
    if (pair.plane_b) {
      const Plane& pl = plane_at(tree, pair.surface_b);
      const Vec3 n_w = kin[bb].X_wb.R * pl.normal;
      const double d_w = pl.offset + n_w.dot(kin[bb].X_wb.p);
      pen = ellipsoid_plane_penetration(pose_a, ea.semi_axes, n_w, d_w);
    } else {
      const Ellipsoid& eb = ellipsoid_at(tree, pair.surface_b);
      pen = ellipsoid_ellipsoid_penetration(pose_a, ea.semi_axes, kin[bb].X_wb * eb.pose,
                                            eb.semi_axes);
    }
    if (!pen) continue;

    const Vec3 v_rel =
        body_point_velocity(kin[ba], pen->point) - body_point_velocity(kin[bb], pen->point);
    const double depth_rate = -pen->normal.dot(v_rel);
    const Vec3 v_t = v_rel + depth_rate * pen->normal;
    const ContactForce cf = contact_force(*pen, depth_rate, v_t, pair);
    const Vec3 f = cf.normal_force + cf.friction_force;
    if (reports) {
      (*reports)[ci].active = true;
      (*reports)[ci].depth = pen->depth;
      (*reports)[ci].normal_force = cf.normal_force.norm();
    }
    if (f.isZero()) continue;
    any_wrench = true;
    add_wrench_at_point(wrenches[ba], kin[ba].X_wb, pen->point, f);
    add_wrench_at_point(wrenches[bb], kin[bb].X_wb, pen->point, -f);
  }

  if (any_wrench) tau += generalized_forces_from_wrenches(tree, kin, wrenches);
  return tau;
}

}  // namespace seatsim
