#include <doctest.h>

#include <random>

#include "seatsim/spatial.hpp"
#include "test_helpers.hpp"

using namespace seatsim;
using testutil::Rng;
using testutil::random_pose;
using testutil::uniform;

namespace {

Vec3 rv3(Rng& rng, double s = 1.0) {
  return s * Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
}

Vec6 rv6(Rng& rng, double s = 1.0) {
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = s * uniform(rng, -1, 1);
  return v;
}

}  // namespace

TEST_CASE("skew matrix reproduces the cross product") {
  Rng rng(101);
  for (int it = 0; it < 20; ++it) {
    const Vec3 a = rv3(rng), b = rv3(rng);
    CHECK((skew(a) * b - a.cross(b)).norm() < 1e-14);
    CHECK((skew(a) + skew(a).transpose()).norm() == 0.0);
  }
}

TEST_CASE("elementary rotations match their closed forms") {
  const double a = 0.37;
  Mat3 rx;
  rx << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  CHECK((rot_x(a) - rx).norm() < 1e-15);
  Mat3 ry;
  ry << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  CHECK((rot_y(a) - ry).norm() < 1e-15);
  Mat3 rz;
  rz << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  CHECK((rot_z(a) - rz).norm() < 1e-15);
}

TEST_CASE("Cardan angles round trip while the middle angle is regular") {
  Rng rng(102);
  for (int it = 0; it < 200; ++it) {
    const Vec3 c(uniform(rng, -3.0, 3.0), uniform(rng, -1.4, 1.4), uniform(rng, -3.0, 3.0));
    const Mat3 r = cardan_to_matrix(c);
    CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-13);
    const Vec3 back = matrix_to_cardan(r);
    CHECK((cardan_to_matrix(back) - r).norm() < 1e-12);
    CHECK(back.y() == doctest::Approx(c.y()).epsilon(1e-12));
  }
}

TEST_CASE("pose composition and inverse") {
  Rng rng(103);
  for (int it = 0; it < 20; ++it) {
    const Pose a = random_pose(rng), b = random_pose(rng);
    const Vec3 x = rv3(rng);
    CHECK(((a * b) * x - a * (b * x)).norm() < 1e-13);
    const Pose id = a * a.inverse();
    CHECK((id.R - Mat3::Identity()).norm() < 1e-13);
    CHECK(id.p.norm() < 1e-13);
  }
}

TEST_CASE("motion transforms compose, invert, and agree with the adjoint matrix") {
  Rng rng(104);
  for (int it = 0; it < 20; ++it) {
    const Pose a = random_pose(rng), b = random_pose(rng);
    const Vec6 m = rv6(rng);
    CHECK((transform_motion(a * b, m) - transform_motion(a, transform_motion(b, m))).norm() < 1e-12);
    CHECK((inv_transform_motion(a, transform_motion(a, m)) - m).norm() < 1e-12);
    CHECK((motion_adjoint(a) * m - transform_motion(a, m)).norm() < 1e-12);
    CHECK((inv_transform_force(a, transform_force(a, m)) - m).norm() < 1e-12);
  }
}

TEST_CASE("wrench-twist power is frame invariant") {
  Rng rng(105);
  for (int it = 0; it < 50; ++it) {
    const Pose a = random_pose(rng);
    const Vec6 m = rv6(rng), f = rv6(rng);
    const double p_b = f.dot(m);
    const double p_a = transform_force(a, f).dot(transform_motion(a, m));
    CHECK(p_a == doctest::Approx(p_b).epsilon(1e-12));
  }
}

TEST_CASE("motion and force cross products are dual") {
  Rng rng(106);
  for (int it = 0; it < 50; ++it) {
    const Vec6 v = rv6(rng), f = rv6(rng), m = rv6(rng);
    CHECK(cross_force(v, f).dot(m) == doctest::Approx(-f.dot(cross_motion(v, m))).epsilon(1e-12));
    CHECK(cross_motion(v, v).norm() < 1e-15);
  }
}

TEST_CASE("spatial inertia: matrix form, COM round trip, transform invariants") {
  Rng rng(107);
  for (int it = 0; it < 30; ++it) {
    const double mass = uniform(rng, 0.5, 8.0);
    const Vec3 com = rv3(rng, 0.3);
    const Mat3 ic = testutil::random_inertia(rng, mass);
    const SpatialInertia si = SpatialInertia::from_com(mass, com, ic);
    CHECK((si.com() - com).norm() < 1e-12);

    const Vec6 v = rv6(rng, 2.0);
    CHECK((si.apply(v) - si.to_matrix() * v).norm() < 1e-10);

    const Pose x = random_pose(rng);
    const SpatialInertia sa = si.transform(x);
    const Vec6 va = transform_motion(x, v);
    // Kinetic energy and momentum are frame independent.
    CHECK(0.5 * va.dot(sa.apply(va)) == doctest::Approx(0.5 * v.dot(si.apply(v))).epsilon(1e-10));
    CHECK((sa.apply(va) - transform_force(x, si.apply(v))).norm() < 1e-9);
  }
}
