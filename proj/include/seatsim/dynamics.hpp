// Forward dynamics for the kinematic tree.
//
// Two independent routes are provided on purpose:
//   - forward_dynamics_aba: O(n) articulated body algorithm, the production
//     path, with support for kinematically prescribed joints (seat motion).
//   - forward_dynamics_mass_matrix: dense route via the composite rigid body
//     mass matrix and zero-acceleration inverse dynamics bias. Slower, used
//     to cross-check the articulated route.
//
// Neither route knows about gravity; gravity reaches the equations of motion
// as external forces assembled by the forces module.

#pragma once

#include <vector>

#include "seatsim/tree.hpp"

namespace seatsim {

struct DynamicsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A joint whose motion is imposed (known q, u and u̇) rather than solved.
struct PrescribedJoint {
  int body = -1;                 // tree body index whose inboard joint is driven
  VectorXd udot;                 // known joint accelerations, size = joint DoF
};

/// External wrench on one body: [torque; force] in world coordinates about
/// the body frame origin.
using BodyWrenches = std::vector<Vec6>;

/// Articulated body algorithm. `tau` is the full generalized force vector.
/// Prescribed joints get their given u̇ echoed into the result.
VectorXd forward_dynamics_aba(const KinematicTree& tree, const std::vector<BodyKinematics>& kin,
                              const VectorXd& tau, const BodyWrenches& external_wrenches = {},
                              const std::vector<PrescribedJoint>& prescribed = {});

VectorXd forward_dynamics_aba(const KinematicTree& tree, const VectorXd& q, const VectorXd& u,
                              const VectorXd& tau, const BodyWrenches& external_wrenches = {},
                              const std::vector<PrescribedJoint>& prescribed = {});

/// Joint-space mass matrix by the composite rigid body algorithm.
MatrixXd mass_matrix(const KinematicTree& tree, const std::vector<BodyKinematics>& kin);
MatrixXd mass_matrix(const KinematicTree& tree, const VectorXd& q);

/// Velocity-dependent bias C(q,u): inverse dynamics with zero acceleration
/// and no external forces, so that M u̇ + C = tau.
VectorXd bias_forces(const KinematicTree& tree, const std::vector<BodyKinematics>& kin);

/// Generalized forces equivalent to per-body world wrenches (Jacobian
/// transpose, folded tip-to-base in O(n)).
VectorXd generalized_forces_from_wrenches(const KinematicTree& tree,
                                          const std::vector<BodyKinematics>& kin,
                                          const BodyWrenches& wrenches);

/// Dense-route forward dynamics: u̇ = M(q)^{-1} (tau + tau_ext - C(q,u)).
VectorXd forward_dynamics_mass_matrix(const KinematicTree& tree, const VectorXd& q,
                                      const VectorXd& u, const VectorXd& tau,
                                      const BodyWrenches& external_wrenches = {});

/// Body-frame spatial accelerations given joint accelerations (propagation
/// only; used for logging point accelerations).
std::vector<Vec6> body_accelerations(const KinematicTree& tree,
                                     const std::vector<BodyKinematics>& kin, const VectorXd& udot);

}  // namespace seatsim
