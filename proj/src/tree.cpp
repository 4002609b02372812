#include "seatsim/tree.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <queue>

namespace seatsim {

int joint_dof(JointKind kind) {
  switch (kind) {
    case JointKind::kFree6: return 6;
    case JointKind::kSpherical3: return 3;
    case JointKind::kUniversal2: return 2;
    case JointKind::kRevolute1: return 1;
    case JointKind::kTranslational1: return 1;
    case JointKind::kSphericalTranslational4: return 4;
  }
  return 0;
}

const char* joint_kind_name(JointKind kind) {
  switch (kind) {
    case JointKind::kFree6: return "free6";
    case JointKind::kSpherical3: return "spherical3";
    case JointKind::kUniversal2: return "universal2";
    case JointKind::kRevolute1: return "revolute1";
    case JointKind::kTranslational1: return "translational1";
    case JointKind::kSphericalTranslational4: return "spherical_translational4";
  }
  return "?";
}

int KinematicTree::body_index(const std::string& name) const {
  auto it = index_by_name_.find(name);
  if (it == index_by_name_.end()) throw TreeError("unknown segment: " + name);
  return it->second;
}

bool KinematicTree::has_body(const std::string& name) const {
  return index_by_name_.count(name) > 0;
}

int KinematicTree::occupant_segment_count() const {
  int n = 0;
  for (const auto& s : segments)
    if (!s.environment) ++n;
  return n;
}

int KinematicTree::occupant_dof() const {
  int n = 0;
  for (size_t i = 0; i < segments.size(); ++i)
    if (!segments[i].environment) n += joint_dof(joints[i].kind);
  return n;
}

namespace {

void validate_axes(const JointDef& j) {
  size_t needed = 0;
  switch (j.kind) {
    case JointKind::kUniversal2: needed = 2; break;
    case JointKind::kRevolute1: needed = 1; break;
    case JointKind::kTranslational1: needed = 1; break;
    case JointKind::kSphericalTranslational4: needed = 1; break;
    default: needed = 0; break;
  }
  if (j.axes.size() < needed)
    throw TreeError("joint to '" + j.child + "' (" + joint_kind_name(j.kind) + ") needs " +
                    std::to_string(needed) + " axis vector(s)");
  for (size_t k = 0; k < needed; ++k) {
    if (std::abs(j.axes[k].norm() - 1.0) > 1e-9)
      throw TreeError("joint to '" + j.child + "': axis " + std::to_string(k) + " not unit length");
  }
  if (j.kind == JointKind::kUniversal2 && std::abs(j.axes[0].dot(j.axes[1])) > 1e-9)
    throw TreeError("joint to '" + j.child + "': universal axes not orthogonal");
}

}  // namespace

KinematicTree build_tree(std::vector<SegmentDef> segments, std::vector<JointDef> joints) {
  if (segments.empty()) throw TreeError("no segments");
  if (joints.size() != segments.size())
    throw TreeError("expected exactly one inboard joint per segment (got " +
                    std::to_string(joints.size()) + " joints for " +
                    std::to_string(segments.size()) + " segments)");

  std::unordered_map<std::string, int> seg_index;
  for (size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].name == "world") throw TreeError("segment may not be named 'world'");
    if (!seg_index.emplace(segments[i].name, static_cast<int>(i)).second)
      throw TreeError("duplicate segment name: " + segments[i].name);
    if (!(segments[i].mass > 0.0)) throw TreeError("segment '" + segments[i].name + "': mass must be positive");
    Eigen::SelfAdjointEigenSolver<Mat3> es(segments[i].inertia_com);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw TreeError("segment '" + segments[i].name + "': inertia not positive definite");
    for (const auto& e : segments[i].geometry)
      if (e.semi_axes.minCoeff() <= 0.0)
        throw TreeError("segment '" + segments[i].name + "': ellipsoid semi-axes must be positive");
    for (const auto& pl : segments[i].planes)
      if (std::abs(pl.normal.norm() - 1.0) > 1e-9)
        throw TreeError("segment '" + segments[i].name + "': plane normal not unit length");
  }

  // Map each segment to its inboard joint; detect duplicates and danglers.
  std::vector<int> joint_of_child(segments.size(), -1);
  for (size_t j = 0; j < joints.size(); ++j) {
    validate_axes(joints[j]);
    auto it = seg_index.find(joints[j].child);
    if (it == seg_index.end()) throw TreeError("joint references undefined child: " + joints[j].child);
    if (joint_of_child[it->second] != -1)
      throw TreeError("segment '" + joints[j].child + "' has two inboard joints");
    joint_of_child[it->second] = static_cast<int>(j);
    if (joints[j].parent != "world" && !seg_index.count(joints[j].parent))
      throw TreeError("joint references undefined parent: " + joints[j].parent);
    if (joints[j].parent == joints[j].child) throw TreeError("joint connects '" + joints[j].child + "' to itself");
  }

  // Breadth-first from world; anything unreached is in a cycle or detached.
  std::vector<std::vector<int>> children(segments.size());
  std::vector<int> roots;
  for (size_t i = 0; i < segments.size(); ++i) {
    const JointDef& j = joints[joint_of_child[i]];
    if (j.parent == "world")
      roots.push_back(static_cast<int>(i));
    else
      children[seg_index[j.parent]].push_back(static_cast<int>(i));
  }

  std::vector<int> order;
  std::queue<int> frontier;
  for (int r : roots) frontier.push(r);
  while (!frontier.empty()) {
    int i = frontier.front();
    frontier.pop();
    order.push_back(i);
    for (int c : children[i]) frontier.push(c);
  }
  if (order.size() != segments.size()) {
    std::string missing;
    std::vector<bool> seen(segments.size(), false);
    for (int i : order) seen[i] = true;
    for (size_t i = 0; i < segments.size(); ++i)
      if (!seen[i]) missing += (missing.empty() ? "" : ", ") + segments[i].name;
    throw TreeError("cycle or detached subgraph involving: " + missing);
  }

  KinematicTree tree;
  std::vector<int> new_index(segments.size());
  for (size_t k = 0; k < order.size(); ++k) new_index[order[k]] = static_cast<int>(k);
  for (int old_i : order) {
    const JointDef& j = joints[joint_of_child[old_i]];
    tree.segments.push_back(segments[old_i]);
    tree.joints.push_back(j);
    tree.parent.push_back(j.parent == "world" ? -1 : new_index[seg_index[j.parent]]);
    tree.dof_offset.push_back(tree.total_dof_);
    tree.total_dof_ += joint_dof(j.kind);
    tree.body_inertia.push_back(
        SpatialInertia::from_com(segments[old_i].mass, segments[old_i].com, segments[old_i].inertia_com));
    tree.index_by_name_[segments[old_i].name] = static_cast<int>(tree.segments.size()) - 1;
  }
  return tree;
}

namespace {

// Chain of rotations about fixed successive axes (Cardan-style):
//   R = prod_k exp(q_k [axes_k])
// Returns R plus the angular motion subspace columns S_k (expressed in the
// rotated frame) and their time derivatives. Uses
//   S_k = (suffix rotation)^T axes_k,   Sdot_k = S_k x nu_{k+1}
// where nu_{k+1} is the angular velocity contributed by rotations after k.
struct CardanChain {
  Mat3 R = Mat3::Identity();
  Eigen::Matrix<double, 3, Eigen::Dynamic, Eigen::ColMajor, 3, 3> S;
  Eigen::Matrix<double, 3, Eigen::Dynamic, Eigen::ColMajor, 3, 3> Sdot;
};

CardanChain cardan_chain(const Vec3* axes, const double* q, const double* qd, int m) {
  CardanChain out;
  out.S.resize(3, m);
  out.Sdot.resize(3, m);
  Mat3 suffix_t = Mat3::Identity();  // P_{k+1}^T
  for (int k = m - 1; k >= 0; --k) {
    out.S.col(k) = suffix_t * axes[k];
    suffix_t = suffix_t * Eigen::AngleAxisd(-q[k], axes[k]).toRotationMatrix();
  }
  out.R = suffix_t.transpose();
  Vec3 nu = Vec3::Zero();
  for (int k = m - 1; k >= 0; --k) {
    out.Sdot.col(k) = out.S.col(k).cross(nu);
    nu += qd[k] * out.S.col(k);
  }
  return out;
}

const Vec3 kXyzAxes[3] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};

struct JointEval {
  Pose X_pj;        // joint child frame in joint parent frame
  JointSubspace S;  // in joint child frame
  Vec6 c_bias;      // Sdot * u, in joint child frame
};

void check_cardan_guard(const JointDef& def, double middle) {
  if (std::abs(middle) > 1.2)
    throw SingularityError("joint to '" + def.child + "': Cardan middle angle " +
                           std::to_string(middle) + " rad is near the +/-pi/2 singularity");
}

JointEval eval_joint(const JointDef& def, const double* q, const double* u) {
  JointEval ev;
  switch (def.kind) {
    case JointKind::kFree6: {
      check_cardan_guard(def, q[4]);
      CardanChain ch = cardan_chain(kXyzAxes, q + 3, u + 3, 3);
      ev.X_pj = Pose{ch.R, Vec3(q[0], q[1], q[2])};
      ev.S.setZero(6, 6);
      ev.c_bias.setZero();
      const Vec3 omega = ch.S * Vec3(u[3], u[4], u[5]);
      for (int k = 0; k < 3; ++k) {
        // Translation rates are expressed in the parent joint frame; the
        // linear subspace columns are R^T e_k with derivative -[omega] R^T e_k.
        ev.S.col(k).tail<3>() = ch.R.transpose().col(k);
        ev.c_bias.tail<3>() += u[k] * (-omega.cross(Vec3(ch.R.transpose().col(k))));
      }
      for (int k = 0; k < 3; ++k) {
        ev.S.col(3 + k).head<3>() = ch.S.col(k);
        ev.c_bias.head<3>() += u[3 + k] * ch.Sdot.col(k);
      }
      break;
    }
    case JointKind::kSpherical3: {
      check_cardan_guard(def, q[1]);
      const Vec3* axes = def.axes.size() >= 3 ? def.axes.data() : kXyzAxes;
      CardanChain ch = cardan_chain(axes, q, u, 3);
      ev.X_pj = Pose{ch.R, Vec3::Zero()};
      ev.S.setZero(6, 3);
      ev.c_bias.setZero();
      for (int k = 0; k < 3; ++k) {
        ev.S.col(k).head<3>() = ch.S.col(k);
        ev.c_bias.head<3>() += u[k] * ch.Sdot.col(k);
      }
      break;
    }
    case JointKind::kUniversal2: {
      CardanChain ch = cardan_chain(def.axes.data(), q, u, 2);
      ev.X_pj = Pose{ch.R, Vec3::Zero()};
      ev.S.setZero(6, 2);
      ev.c_bias.setZero();
      for (int k = 0; k < 2; ++k) {
        ev.S.col(k).head<3>() = ch.S.col(k);
        ev.c_bias.head<3>() += u[k] * ch.Sdot.col(k);
      }
      break;
    }
    case JointKind::kRevolute1: {
      ev.X_pj = Pose{Eigen::AngleAxisd(q[0], def.axes[0]).toRotationMatrix(), Vec3::Zero()};
      ev.S.setZero(6, 1);
      ev.S.col(0).head<3>() = def.axes[0];
      ev.c_bias.setZero();
      break;
    }
    case JointKind::kTranslational1: {
      ev.X_pj = Pose{Mat3::Identity(), q[0] * def.axes[0]};
      ev.S.setZero(6, 1);
      ev.S.col(0).tail<3>() = def.axes[0];
      ev.c_bias.setZero();
      break;
    }
    case JointKind::kSphericalTranslational4: {
      check_cardan_guard(def, q[1]);
      CardanChain ch = cardan_chain(kXyzAxes, q, u, 3);
      const Vec3& axis = def.axes[0];  // child-frame translation axis
      ev.X_pj = Pose{ch.R, ch.R * (q[3] * axis)};
      ev.S.setZero(6, 4);
      ev.c_bias.setZero();
      for (int k = 0; k < 3; ++k) {
        ev.S.col(k).head<3>() = ch.S.col(k);
        ev.S.col(k).tail<3>() = q[3] * ch.S.col(k).cross(axis);
        ev.c_bias.head<3>() += u[k] * ch.Sdot.col(k);
        ev.c_bias.tail<3>() += u[k] * (u[3] * ch.S.col(k).cross(axis) + q[3] * ch.Sdot.col(k).cross(axis));
      }
      ev.S.col(3).tail<3>() = axis;
      break;
    }
  }
  return ev;
}

}  // namespace

std::vector<BodyKinematics> compute_kinematics(const KinematicTree& tree, const VectorXd& q,
                                               const VectorXd& u) {
  if (q.size() != tree.dof() || u.size() != tree.dof())
    throw TreeError("state size mismatch: expected " + std::to_string(tree.dof()) + " DoF");

  const int n = tree.body_count();
  std::vector<BodyKinematics> out(n);
  for (int i = 0; i < n; ++i) {
    const JointDef& def = tree.joints[i];
    const int off = tree.dof_offset[i];
    JointEval ev = eval_joint(def, q.data() + off, u.data() + off);

    BodyKinematics& bk = out[i];
    const Pose inv_child = def.child_frame.inverse();
    bk.X_pb = def.parent_frame * ev.X_pj * inv_child;

    // Re-express subspace quantities from the joint frame into the child
    // body frame (constant offset given by child_frame).
    const int nd = static_cast<int>(ev.S.cols());
    bk.S.resize(6, nd);
    for (int k = 0; k < nd; ++k) bk.S.col(k) = transform_motion(def.child_frame, Vec6(ev.S.col(k)));
    bk.c_bias = transform_motion(def.child_frame, ev.c_bias);

    bk.v_joint = Vec6::Zero();
    for (int k = 0; k < nd; ++k) bk.v_joint += bk.S.col(k) * u[off + k];

    const int p = tree.parent[i];
    bk.X_wb = (p < 0) ? bk.X_pb : out[p].X_wb * bk.X_pb;
    const Vec6 v_parent = (p < 0) ? Vec6::Zero() : inv_transform_motion(bk.X_pb, out[p].v);
    bk.v = v_parent + bk.v_joint;
    // Rotation only: v_world keeps the body origin as its reference point.
    bk.v_world.head<3>() = bk.X_wb.R * bk.v.head<3>();
    bk.v_world.tail<3>() = bk.X_wb.R * bk.v.tail<3>();
    bk.com_world = bk.X_wb * tree.segments[i].com;
  }
  return out;
}

std::vector<BodyKinematics> forward_kinematics(const KinematicTree& tree, const VectorXd& q) {
  return compute_kinematics(tree, q, VectorXd::Zero(tree.dof()));
}

Vec3 point_velocity_world(const BodyKinematics& bk, const Vec3& point_body) {
  const Vec3 r_w = bk.X_wb.R * point_body;
  return bk.v_world.tail<3>() + bk.v_world.head<3>().cross(r_w);
}

Vec3 point_acceleration_world(const BodyKinematics& bk, const Vec6& a_body, const Vec3& point_body) {
  const Vec3& omega = bk.v.head<3>();
  const Vec3& v_lin = bk.v.tail<3>();
  const Vec3 acc_b = a_body.head<3>().cross(point_body) + a_body.tail<3>() +
                     omega.cross(v_lin + omega.cross(point_body));
  return bk.X_wb.R * acc_b;
}

std::string coordinate_name(const KinematicTree& tree, int coordinate) {
  if (coordinate < 0 || coordinate >= tree.dof())
    throw TreeError("coordinate index out of range");
  for (std::size_t i = 0; i < tree.segments.size(); ++i) {
    int off = tree.dof_offset[i];
    int nd = joint_dof(tree.joints[i].kind);
    if (coordinate < off || coordinate >= off + nd) continue;
    static const char* kFree6[] = {"tx", "ty", "tz", "rx", "ry", "rz"};
    static const char* kSpherical[] = {"rx", "ry", "rz"};
    static const char* kSphTrans[] = {"rx", "ry", "rz", "t"};
    static const char* kUniversal[] = {"r0", "r1"};
    const char* label = nullptr;
    int k = coordinate - off;
    switch (tree.joints[i].kind) {
      case JointKind::kFree6: label = kFree6[k]; break;
      case JointKind::kSpherical3: label = kSpherical[k]; break;
      case JointKind::kSphericalTranslational4: label = kSphTrans[k]; break;
      case JointKind::kUniversal2: label = kUniversal[k]; break;
      case JointKind::kRevolute1: label = "r"; break;
      case JointKind::kTranslational1: label = "t"; break;
    }
    return tree.segments[i].name + "." + label;
  }
  throw TreeError("coordinate index not covered by any joint");
}

}  // namespace seatsim
