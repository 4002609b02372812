#include <doctest.h>

#include <random>

#include "seatsim/tree.hpp"
#include "test_helpers.hpp"

using namespace seatsim;
using namespace seatsim::testutil;

namespace {

SegmentDef plain_segment(const std::string& name, double mass = 1.0) {
  SegmentDef s;
  s.name = name;
  s.mass = mass;
  s.inertia_com = 0.01 * Mat3::Identity();
  return s;
}

JointDef joint(JointKind kind, const std::string& parent, const std::string& child,
               std::vector<Vec3> axes = {}) {
  JointDef j;
  j.kind = kind;
  j.parent = parent;
  j.child = child;
  j.axes = std::move(axes);
  return j;
}

}  // namespace

TEST_CASE("DoF accounting across all joint kinds") {
  std::vector<SegmentDef> segs;
  std::vector<JointDef> joints;
  segs.push_back(plain_segment("a"));
  joints.push_back(joint(JointKind::kFree6, "world", "a"));
  segs.push_back(plain_segment("b"));
  joints.push_back(joint(JointKind::kSpherical3, "a", "b"));
  segs.push_back(plain_segment("c"));
  joints.push_back(joint(JointKind::kUniversal2, "b", "c", {Vec3::UnitX(), Vec3::UnitY()}));
  segs.push_back(plain_segment("d"));
  joints.push_back(joint(JointKind::kRevolute1, "c", "d", {Vec3::UnitZ()}));
  segs.push_back(plain_segment("e"));
  joints.push_back(joint(JointKind::kTranslational1, "d", "e", {Vec3::UnitX()}));
  segs.push_back(plain_segment("f"));
  joints.push_back(joint(JointKind::kSphericalTranslational4, "e", "f", {Vec3::UnitZ()}));

  const KinematicTree tree = build_tree(segs, joints);
  CHECK(tree.dof() == 6 + 3 + 2 + 1 + 1 + 4);
  CHECK(tree.body_count() == 6);
  for (int i = 1; i < tree.body_count(); ++i) {
    CHECK(tree.parent[i] < i);  // topological order
    CHECK(tree.dof_offset[i] == tree.dof_offset[i - 1] + tree.joint_dof_count(i - 1));
  }
  CHECK(tree.body_index("d") >= 0);
  CHECK(tree.has_body("f"));
  CHECK_FALSE(tree.has_body("zz"));
}

TEST_CASE("environment segments are excluded from occupant totals") {
  std::vector<SegmentDef> segs;
  segs.push_back(plain_segment("seat"));
  segs.back().environment = true;
  segs.push_back(plain_segment("pelvis"));
  std::vector<JointDef> joints;
  joints.push_back(joint(JointKind::kFree6, "world", "seat"));
  joints.push_back(joint(JointKind::kFree6, "world", "pelvis"));
  const KinematicTree tree = build_tree(segs, joints);
  CHECK(tree.body_count() == 2);
  CHECK(tree.occupant_segment_count() == 1);
  CHECK(tree.occupant_dof() == 6);
  CHECK(tree.dof() == 12);
}

TEST_CASE("definition order does not matter: children may precede parents") {
  std::vector<SegmentDef> segs;
  segs.push_back(plain_segment("tip"));
  segs.push_back(plain_segment("mid"));
  segs.push_back(plain_segment("root"));
  std::vector<JointDef> joints;
  joints.push_back(joint(JointKind::kRevolute1, "mid", "tip", {Vec3::UnitY()}));
  joints.push_back(joint(JointKind::kRevolute1, "root", "mid", {Vec3::UnitY()}));
  joints.push_back(joint(JointKind::kFree6, "world", "root"));
  const KinematicTree tree = build_tree(segs, joints);
  CHECK(tree.segments[0].name == "root");
  CHECK(tree.parent[tree.body_index("tip")] == tree.body_index("mid"));
  CHECK(tree.parent[tree.body_index("mid")] == tree.body_index("root"));
}

TEST_CASE("structural validation rejects malformed definitions") {
  auto seg = [](const std::string& n) { return plain_segment(n); };

  CHECK_THROWS_WITH_AS(build_tree({}, {}), "no segments", TreeError);

  CHECK_THROWS_WITH_AS(
      build_tree({seg("a"), seg("a")},
                 {joint(JointKind::kFree6, "world", "a"), joint(JointKind::kFree6, "world", "a")}),
      doctest::Contains("duplicate segment name"), TreeError);

  SegmentDef bad_mass = seg("a");
  bad_mass.mass = 0.0;
  CHECK_THROWS_WITH_AS(build_tree({bad_mass}, {joint(JointKind::kFree6, "world", "a")}),
                       doctest::Contains("mass must be positive"), TreeError);

  SegmentDef bad_inertia = seg("a");
  bad_inertia.inertia_com = Mat3::Zero();
  CHECK_THROWS_WITH_AS(build_tree({bad_inertia}, {joint(JointKind::kFree6, "world", "a")}),
                       doctest::Contains("inertia not positive definite"), TreeError);

  CHECK_THROWS_WITH_AS(
      build_tree({seg("a"), seg("b")},
                 {joint(JointKind::kFree6, "world", "a"), joint(JointKind::kFree6, "world", "a")}),
      doctest::Contains("two inboard joints"), TreeError);

  CHECK_THROWS_WITH_AS(
      build_tree({seg("a")}, {joint(JointKind::kFree6, "nope", "a")}),
      doctest::Contains("undefined parent"), TreeError);

  // a <-> b cycle, no path from world.
  CHECK_THROWS_WITH_AS(
      build_tree({seg("a"), seg("b")},
                 {joint(JointKind::kRevolute1, "b", "a", {Vec3::UnitX()}),
                  joint(JointKind::kRevolute1, "a", "b", {Vec3::UnitX()})}),
      doctest::Contains("cycle or detached"), TreeError);

  CHECK_THROWS_WITH_AS(
      build_tree({seg("a")}, {joint(JointKind::kRevolute1, "world", "a", {Vec3(0, 0, 2)})}),
      doctest::Contains("not unit length"), TreeError);

  CHECK_THROWS_WITH_AS(
      build_tree({seg("a")},
                 {joint(JointKind::kUniversal2, "world", "a", {Vec3::UnitX(), Vec3::UnitX()})}),
      doctest::Contains("axes not orthogonal"), TreeError);

  CHECK_THROWS_WITH_AS(build_tree({seg("a"), seg("b")}, {joint(JointKind::kFree6, "world", "a")}),
                       doctest::Contains("one inboard joint per segment"), TreeError);
}

TEST_CASE("revolute joint rotates about the axis through the joint frame") {
  // Joint frame sits 1 m along world x, axis is world z; the child body frame
  // is offset from the joint. Points on the axis must stay put for any angle.
  SegmentDef s = plain_segment("link");
  JointDef j = joint(JointKind::kRevolute1, "world", "link", {Vec3::UnitZ()});
  j.parent_frame = Pose{rot_y(0.3), Vec3(1.0, 0.0, 0.0)};
  j.child_frame = Pose{rot_x(-0.2), Vec3(0.1, 0.2, -0.3)};
  const KinematicTree tree = build_tree({s}, {j});

  const Vec3 axis_world = j.parent_frame.R * Vec3::UnitZ();
  for (double angle : {0.0, 0.4, -1.1, 2.5}) {
    VectorXd q(1);
    q << angle;
    const auto kin = forward_kinematics(tree, q);
    // Joint origin and a second point along the axis are invariant.
    CHECK((kin[0].X_wb * j.child_frame.p - j.parent_frame.p).norm() < 1e-12);
    const Vec3 on_axis_body = j.child_frame * Vec3(0, 0, 0.7);
    CHECK((kin[0].X_wb * on_axis_body - (j.parent_frame.p + 0.7 * axis_world)).norm() < 1e-12);
  }

  // With the joint spinning, points on the axis have zero velocity and
  // off-axis points move at omega x r.
  VectorXd q(1), u(1);
  q << 0.8;
  u << 1.7;
  const auto kin = compute_kinematics(tree, q, u);
  CHECK(point_velocity_world(kin[0], j.child_frame.p).norm() < 1e-12);
  CHECK((kin[0].v_world.head<3>() - 1.7 * axis_world).norm() < 1e-12);
}

TEST_CASE("free joint coordinates are parent-frame translation plus Cardan angles") {
  SegmentDef s = plain_segment("body");
  const KinematicTree tree = build_tree({s}, {joint(JointKind::kFree6, "world", "body")});
  VectorXd q(6), u(6);
  q << 0.3, -0.2, 1.4, 0.2, -0.5, 0.9;
  u << 1.0, -2.0, 0.5, 0.0, 0.0, 0.0;
  const auto kin = compute_kinematics(tree, q, u);
  CHECK((kin[0].X_wb.p - Vec3(0.3, -0.2, 1.4)).norm() < 1e-14);
  CHECK((kin[0].X_wb.R - cardan_to_matrix(q.tail<3>())).norm() < 1e-14);
  // Pure translation rates: the world-frame origin velocity equals them.
  CHECK((kin[0].v_world.tail<3>() - Vec3(1.0, -2.0, 0.5)).norm() < 1e-12);
  CHECK(kin[0].v_world.head<3>().norm() < 1e-14);
}

TEST_CASE("Cardan middle angle near a quarter turn raises the singularity guard") {
  SegmentDef s = plain_segment("body");
  const KinematicTree tree = build_tree({s}, {joint(JointKind::kSpherical3, "world", "body")});
  VectorXd ok(3), bad(3);
  ok << 2.0, 1.1, -2.8;
  bad << 0.0, 1.25, 0.0;
  CHECK_NOTHROW(forward_kinematics(tree, ok));
  CHECK_THROWS_AS(forward_kinematics(tree, bad), SingularityError);
}

TEST_CASE("propagated twists match finite differences of the forward kinematics") {
  Rng rng(2024);
  const double h = 1e-5;
  for (int trial = 0; trial < 60; ++trial) {
    const KinematicTree tree = make_random_tree(rng, 1 + trial % 8);
    VectorXd q, u;
    random_state(tree, rng, q, u);
    const auto kin = compute_kinematics(tree, q, u);
    const auto kp = forward_kinematics(tree, q + h * u);
    const auto km = forward_kinematics(tree, q - h * u);
    for (int i = 0; i < tree.body_count(); ++i) {
      const Mat3& r = kin[i].X_wb.R;
      const Mat3 rdot = (kp[i].X_wb.R - km[i].X_wb.R) / (2 * h);
      const Mat3 wb_skew = r.transpose() * rdot;
      const Vec3 omega_fd(wb_skew(2, 1) - wb_skew(1, 2), wb_skew(0, 2) - wb_skew(2, 0),
                          wb_skew(1, 0) - wb_skew(0, 1));
      const Vec3 lin_fd = r.transpose() * ((kp[i].X_wb.p - km[i].X_wb.p) / (2 * h));
      const double scale = std::max(1.0, kin[i].v.norm());
      CHECK((0.5 * omega_fd - kin[i].v.head<3>()).norm() < 2e-5 * scale);
      CHECK((lin_fd - kin[i].v.tail<3>()).norm() < 2e-5 * scale);
    }
  }
}

TEST_CASE("body-fixed point velocity matches finite differences") {
  Rng rng(77);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const KinematicTree tree = make_random_tree(rng, 1 + trial % 5);
    VectorXd q, u;
    random_state(tree, rng, q, u);
    const auto kin = compute_kinematics(tree, q, u);
    const auto kp = forward_kinematics(tree, q + h * u);
    const auto km = forward_kinematics(tree, q - h * u);
    const int i = tree.body_count() - 1;
    const Vec3 pt(0.11, -0.23, 0.31);
    const Vec3 v_fd = (kp[i].X_wb * pt - km[i].X_wb * pt) / (2 * h);
    const Vec3 v = point_velocity_world(kin[i], pt);
    CHECK((v - v_fd).norm() < 2e-5 * std::max(1.0, v.norm()));
  }
}
