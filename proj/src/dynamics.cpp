#include "seatsim/dynamics.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace seatsim {

namespace {

// World wrench about the body origin -> body coordinates.
Vec6 wrench_to_body(const Pose& X_wb, const Vec6& w_world) {
  Vec6 out;
  out.head<3>() = X_wb.R.transpose() * w_world.head<3>();
  out.tail<3>() = X_wb.R.transpose() * w_world.tail<3>();
  return out;
}

std::vector<int> prescribed_flags(const KinematicTree& tree,
                                  const std::vector<PrescribedJoint>& prescribed) {
  std::vector<int> idx(tree.body_count(), -1);
  for (size_t k = 0; k < prescribed.size(); ++k) {
    const auto& pj = prescribed[k];
    if (pj.body < 0 || pj.body >= tree.body_count())
      throw DynamicsError("prescribed joint body index out of range");
    if (pj.udot.size() != tree.joint_dof_count(pj.body))
      throw DynamicsError("prescribed joint u̇ size mismatch for body " +
                          tree.segments[pj.body].name);
    idx[pj.body] = static_cast<int>(k);
  }
  return idx;
}

}  // namespace

VectorXd forward_dynamics_aba(const KinematicTree& tree, const std::vector<BodyKinematics>& kin,
                              const VectorXd& tau, const BodyWrenches& external_wrenches,
                              const std::vector<PrescribedJoint>& prescribed) {
  const int n = tree.body_count();
  if (tau.size() != tree.dof()) throw DynamicsError("generalized force vector size mismatch");
  if (!external_wrenches.empty() && static_cast<int>(external_wrenches.size()) != n)
    throw DynamicsError("external wrench list must have one entry per body");

  const std::vector<int> presc = prescribed_flags(tree, prescribed);

  std::vector<Mat6> IA(n);
  std::vector<Vec6> pA(n), c(n);
  std::vector<Eigen::Matrix<double, 6, Eigen::Dynamic, Eigen::ColMajor, 6, 6>> U(n);
  std::vector<Eigen::LDLT<MatrixXd>> D_ldlt(n);
  std::vector<VectorXd> u_bias(n);

  // Pass 1: velocities done by the caller (kin); set up inertias and biases.
  for (int i = 0; i < n; ++i) {
    const BodyKinematics& bk = kin[i];
    IA[i] = tree.body_inertia[i].to_matrix();
    c[i] = bk.c_bias + cross_motion(bk.v, bk.v_joint);
    pA[i] = cross_force(bk.v, tree.body_inertia[i].apply(bk.v));
    if (!external_wrenches.empty()) pA[i] -= wrench_to_body(bk.X_wb, external_wrenches[i]);
  }

  // Pass 2: tip-to-base articulated inertia recursion.
  for (int i = n - 1; i >= 0; --i) {
    const BodyKinematics& bk = kin[i];
    const int nd = static_cast<int>(bk.S.cols());
    const int off = tree.dof_offset[i];
    const int p = tree.parent[i];

    Mat6 Ia;
    Vec6 pa;
    if (presc[i] < 0) {
      U[i] = IA[i] * bk.S;
      MatrixXd D = bk.S.transpose() * U[i];
      D_ldlt[i].compute(D);
      if (D_ldlt[i].info() != Eigen::Success || (D_ldlt[i].vectorD().array() <= 0.0).any())
        throw DynamicsError("singular articulated inertia at joint of '" +
                            tree.segments[i].name + "'");
      u_bias[i] = tau.segment(off, nd) - bk.S.transpose() * pA[i];
      Ia = IA[i] - U[i] * D_ldlt[i].solve(U[i].transpose());
      pa = pA[i] + Ia * c[i] + U[i] * D_ldlt[i].solve(u_bias[i]);
    } else {
      // Prescribed joint: the subtree moves with known joint acceleration, so
      // the full articulated inertia and the imposed acceleration transmit.
      const VectorXd& qdd = prescribed[presc[i]].udot;
      Ia = IA[i];
      pa = pA[i] + IA[i] * (c[i] + bk.S * qdd);
    }

    if (p >= 0) {
      const Mat6 ad = motion_adjoint(bk.X_pb.inverse());
      IA[p] += ad.transpose() * Ia * ad;
      pA[p] += transform_force(bk.X_pb, pa);
    }
  }

  // Pass 3: base-to-tip accelerations.
  VectorXd udot(tree.dof());
  std::vector<Vec6> a(n);
  for (int i = 0; i < n; ++i) {
    const BodyKinematics& bk = kin[i];
    const int nd = static_cast<int>(bk.S.cols());
    const int off = tree.dof_offset[i];
    const int p = tree.parent[i];
    const Vec6 a_parent = (p < 0) ? Vec6::Zero() : inv_transform_motion(bk.X_pb, a[p]);
    const Vec6 a_pre = a_parent + c[i];
    if (presc[i] < 0) {
      udot.segment(off, nd) = D_ldlt[i].solve(u_bias[i] - U[i].transpose() * a_pre);
    } else {
      udot.segment(off, nd) = prescribed[presc[i]].udot;
    }
    a[i] = a_pre;
    for (int k = 0; k < nd; ++k) a[i] += bk.S.col(k) * udot[off + k];
  }
  return udot;
}

VectorXd forward_dynamics_aba(const KinematicTree& tree, const VectorXd& q, const VectorXd& u,
                              const VectorXd& tau, const BodyWrenches& external_wrenches,
                              const std::vector<PrescribedJoint>& prescribed) {
  return forward_dynamics_aba(tree, compute_kinematics(tree, q, u), tau, external_wrenches,
                              prescribed);
}

MatrixXd mass_matrix(const KinematicTree& tree, const std::vector<BodyKinematics>& kin) {
  const int n = tree.body_count();
  MatrixXd M = MatrixXd::Zero(tree.dof(), tree.dof());

  std::vector<Mat6> Ic(n);
  for (int i = 0; i < n; ++i) Ic[i] = tree.body_inertia[i].to_matrix();

  for (int i = n - 1; i >= 0; --i) {
    const int p = tree.parent[i];
    if (p >= 0) {
      const Mat6 ad = motion_adjoint(kin[i].X_pb.inverse());
      Ic[p] += ad.transpose() * Ic[i] * ad;
    }
    const int ni = static_cast<int>(kin[i].S.cols());
    const int oi = tree.dof_offset[i];
    Eigen::Matrix<double, 6, Eigen::Dynamic, Eigen::ColMajor, 6, 6> F = Ic[i] * kin[i].S;
    M.block(oi, oi, ni, ni) = kin[i].S.transpose() * F;

    int j = i;
    while (tree.parent[j] >= 0) {
      // Re-express F in the parent's coordinates, then project on its subspace.
      for (int k = 0; k < ni; ++k) F.col(k) = transform_force(kin[j].X_pb, Vec6(F.col(k)));
      j = tree.parent[j];
      const int nj = static_cast<int>(kin[j].S.cols());
      const int oj = tree.dof_offset[j];
      M.block(oi, oj, ni, nj) = F.transpose() * kin[j].S;
      M.block(oj, oi, nj, ni) = M.block(oi, oj, ni, nj).transpose();
    }
  }
  return M;
}

MatrixXd mass_matrix(const KinematicTree& tree, const VectorXd& q) {
  return mass_matrix(tree, compute_kinematics(tree, q, VectorXd::Zero(tree.dof())));
}

VectorXd bias_forces(const KinematicTree& tree, const std::vector<BodyKinematics>& kin) {
  const int n = tree.body_count();
  // Forward: spatial accelerations with zero joint acceleration.
  std::vector<Vec6> a(n), f(n);
  for (int i = 0; i < n; ++i) {
    const int p = tree.parent[i];
    const Vec6 a_parent = (p < 0) ? Vec6::Zero() : inv_transform_motion(kin[i].X_pb, a[p]);
    a[i] = a_parent + kin[i].c_bias + cross_motion(kin[i].v, kin[i].v_joint);
    f[i] = tree.body_inertia[i].to_matrix() * a[i] +
           cross_force(kin[i].v, tree.body_inertia[i].apply(kin[i].v));
  }
  // Backward: project and fold.
  VectorXd C = VectorXd::Zero(tree.dof());
  for (int i = n - 1; i >= 0; --i) {
    const int nd = static_cast<int>(kin[i].S.cols());
    C.segment(tree.dof_offset[i], nd) = kin[i].S.transpose() * f[i];
    const int p = tree.parent[i];
    if (p >= 0) f[p] += transform_force(kin[i].X_pb, f[i]);
  }
  return C;
}

VectorXd generalized_forces_from_wrenches(const KinematicTree& tree,
                                          const std::vector<BodyKinematics>& kin,
                                          const BodyWrenches& wrenches) {
  const int n = tree.body_count();
  if (static_cast<int>(wrenches.size()) != n)
    throw DynamicsError("wrench list must have one entry per body");
  std::vector<Vec6> f(n);
  for (int i = 0; i < n; ++i) f[i] = wrench_to_body(kin[i].X_wb, wrenches[i]);
  VectorXd tau = VectorXd::Zero(tree.dof());
  for (int i = n - 1; i >= 0; --i) {
    const int nd = static_cast<int>(kin[i].S.cols());
    tau.segment(tree.dof_offset[i], nd) = kin[i].S.transpose() * f[i];
    const int p = tree.parent[i];
    if (p >= 0) f[p] += transform_force(kin[i].X_pb, f[i]);
  }
  return tau;
}

VectorXd forward_dynamics_mass_matrix(const KinematicTree& tree, const VectorXd& q,
                                      const VectorXd& u, const VectorXd& tau,
                                      const BodyWrenches& external_wrenches) {
  const auto kin = compute_kinematics(tree, q, u);
  MatrixXd M = mass_matrix(tree, kin);
  VectorXd rhs = tau - bias_forces(tree, kin);
  if (!external_wrenches.empty())
    rhs += generalized_forces_from_wrenches(tree, kin, external_wrenches);
  Eigen::LDLT<MatrixXd> ldlt(M);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw DynamicsError("mass matrix not positive definite");
  return ldlt.solve(rhs);
}

std::vector<Vec6> body_accelerations(const KinematicTree& tree,
                                     const std::vector<BodyKinematics>& kin,
                                     const VectorXd& udot) {
  const int n = tree.body_count();
  std::vector<Vec6> a(n);
  for (int i = 0; i < n; ++i) {
    const int p = tree.parent[i];
    const int nd = static_cast<int>(kin[i].S.cols());
    const int off = tree.dof_offset[i];
    const Vec6 a_parent = (p < 0) ? Vec6::Zero() : inv_transform_motion(kin[i].X_pb, a[p]);
    a[i] = a_parent + kin[i].c_bias + cross_motion(kin[i].v, kin[i].v_joint);
    for (int k = 0; k < nd; ++k) a[i] += kin[i].S.col(k) * udot[off + k];
  }
  return a;
}

}  // namespace seatsim
