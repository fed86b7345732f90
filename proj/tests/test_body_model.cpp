#include <doctest.h>

#include <cmath>

#include "mocap/body_model.hpp"
#include "mocap/error.hpp"
#include "test_util.hpp"

using namespace mocap;
using testutil::fd_gradient;
using testutil::random_vec3;
using testutil::rel_err;

namespace {

// Plain recursive FK oracle used to validate the library path.
Points3 oracle_fk(const KinematicTree& tree, const VecX& beta,
                  const PoseFrame& pose) {
  std::vector<Mat3> world(kNumJoints);
  Points3 joints(kNumJoints, 3);
  const VecX s = tree.bone_scales(beta);
  world[0] = axis_angle_to_matrix(pose.global_rot);
  joints.row(0) = pose.trans;
  for (int i = 1; i < kNumJoints; ++i) {
    const int p = tree.parents[i];
    const Mat3 local = rot6d_to_matrix(pose.body6d.segment<6>(6 * (i - 1)));
    world[i] = world[p] * local;
    joints.row(i) =
        joints.row(p) + (world[p] * (s[i] * tree.offsets.row(i).transpose())).transpose();
  }
  return joints;
}

double point_segment_distance(const Vec3& x, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((x - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (x - (a + t * ab)).norm();
}

PoseFrame random_pose(Rng& rng, double rot_scale = 0.6) {
  PoseFrame p = PoseFrame::rest();
  for (int j = 1; j < kNumJoints; ++j) {
    const Mat3 R = axis_angle_to_matrix(random_vec3(rng, rot_scale));
    p.body6d.segment<6>(6 * (j - 1)) = matrix_to_rot6d(R);
  }
  p.global_rot = random_vec3(rng, 0.8);
  p.trans = random_vec3(rng, 1.0);
  return p;
}

VecX pack_all(const PoseFrame& p, const VecX& beta) {
  VecX x(kPoseDim + 6 + kShapeDim);
  x << p.body6d, p.global_rot, p.trans, beta;
  return x;
}

void unpack_all(const VecX& x, PoseFrame* p, VecX* beta) {
  p->body6d = x.head(kPoseDim);
  p->global_rot = x.segment<3>(kPoseDim);
  p->trans = x.segment<3>(kPoseDim + 3);
  *beta = x.tail(kShapeDim);
}

}  // namespace

TEST_CASE("default tree validates and rest FK matches accumulated offsets") {
  const KinematicTree tree = KinematicTree::default_tree();
  tree.validate();

  const VecX beta = VecX::Zero(kShapeDim);
  const FkCache cache = fk_forward(tree, beta, PoseFrame::rest());
  Points3 expect = Points3::Zero(kNumJoints, 3);
  for (int i = 1; i < kNumJoints; ++i)
    expect.row(i) = expect.row(tree.parents[i]) + tree.offsets.row(i);
  CHECK((cache.joints - expect).cwiseAbs().maxCoeff() < 1e-12);

  // Template proportions: pelvis-to-head about 0.85 m, stature about 1.75 m.
  const Vec3 head = expect.row(15).transpose();
  CHECK(std::abs(head.z() - 0.85) < 0.02);
  const double stature = head.z() - expect.row(10).transpose().z();
  CHECK(std::abs(stature - 1.75) < 0.03);
}

TEST_CASE("fk matches the oracle on random poses and shapes") {
  const KinematicTree tree = KinematicTree::default_tree();
  Rng rng(21);
  for (int k = 0; k < 25; ++k) {
    const PoseFrame pose = random_pose(rng);
    const VecX beta = testutil::random_vecx(rng, kShapeDim, 0.5);
    const FkCache cache = fk_forward(tree, beta, pose);
    CHECK((cache.joints - oracle_fk(tree, beta, pose)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("translation moves all joints rigidly") {
  const KinematicTree tree = KinematicTree::default_tree();
  Rng rng(22);
  PoseFrame pose = random_pose(rng);
  const VecX beta = VecX::Zero(kShapeDim);
  pose.trans.setZero();
  const Points3 base = fk_forward(tree, beta, pose).joints;
  pose.trans = Vec3(0.3, -1.2, 2.0);
  const Points3 moved = fk_forward(tree, beta, pose).joints;
  for (int i = 0; i < kNumJoints; ++i) {
    CHECK((moved.row(i) - base.row(i) - pose.trans.transpose()).norm() < 1e-12);
  }
}

TEST_CASE("bone lengths depend on shape only, not pose") {
  const KinematicTree tree = KinematicTree::default_tree();
  Rng rng(23);
  const VecX beta = testutil::random_vecx(rng, kShapeDim, 0.8);
  const VecX s = tree.bone_scales(beta);
  for (int k = 0; k < 10; ++k) {
    const PoseFrame pose = random_pose(rng);
    const FkCache c = fk_forward(tree, beta, pose);
    for (int i = 1; i < kNumJoints; ++i) {
      const double len = (c.joints.row(i) - c.joints.row(tree.parents[i])).norm();
      CHECK(len == doctest::Approx(s[i] * tree.offsets.row(i).norm()).epsilon(1e-10));
      CHECK(len > 0.0);
    }
  }
}

TEST_CASE("beta zero reproduces the template and scales stay clamped") {
  const KinematicTree tree = KinematicTree::default_tree();
  CHECK((tree.bone_scales(VecX::Zero(kShapeDim)) - VecX::Ones(kNumJoints)).cwiseAbs().maxCoeff() == 0.0);
  VecX huge = VecX::Constant(kShapeDim, 100.0);
  const VecX s_hi = tree.bone_scales(huge);
  for (int i = 1; i < kNumJoints; ++i) CHECK(s_hi[i] == tree.scale_max);
  const VecX s_lo = tree.bone_scales(-huge);
  for (int i = 1; i < kNumJoints; ++i) CHECK(s_lo[i] == tree.scale_min);

  // Global component grows stature monotonically.
  VecX b = VecX::Zero(kShapeDim);
  b[0] = 1.0;
  const Points3 tall = tree.rest_joints(b);
  const Points3 base = tree.rest_joints(VecX::Zero(kShapeDim));
  CHECK(tall.row(15).transpose().z() > base.row(15).transpose().z());
}

TEST_CASE("fk backward matches finite differences including capsules") {
  const KinematicTree tree = KinematicTree::default_tree();
  Rng rng(24);
  int probes = 0;
  for (int k = 0; k < 12; ++k) {
    const PoseFrame pose = random_pose(rng, 0.4);
    const VecX beta = testutil::random_vecx(rng, kShapeDim, 0.3);

    Points3 gj(kNumJoints, 3);
    for (int i = 0; i < gj.size(); ++i) gj.data()[i] = rng.normal();
    Points3 gc(kNumBones * kSamplesPerCapsule, 3);
    for (int i = 0; i < gc.size(); ++i) gc.data()[i] = rng.normal();

    auto scalar = [&](const VecX& x) {
      PoseFrame p;
      VecX b;
      unpack_all(x, &p, &b);
      const FkCache c = fk_forward(tree, b, p);
      const CapsuleCloud cloud = capsule_surface_points(tree, c);
      return (gj.array() * c.joints.array()).sum() +
             (gc.array() * cloud.points.array()).sum();
    };

    const FkCache cache = fk_forward(tree, beta, pose);
    FkAdjoint adj;
    adj.d_joints = gj;
    capsule_surface_points_backward(tree, cache, gc, &adj);
    FkGrads grads;
    fk_backward(tree, pose, cache, adj, &grads);

    VecX analytic(kPoseDim + 6 + kShapeDim);
    analytic << grads.d_body6d, grads.d_global_rot, grads.d_trans, grads.d_beta;
    const VecX fd = fd_gradient(scalar, pack_all(pose, beta), 1e-6);
    CHECK(rel_err(analytic, fd) < 1e-6);
    ++probes;
  }
  CHECK(probes == 12);
}

TEST_CASE("capsule samples lie exactly on capsule surfaces") {
  const KinematicTree tree = KinematicTree::default_tree();
  Rng rng(25);
  for (int k = 0; k < 5; ++k) {
    const PoseFrame pose = random_pose(rng);
    const VecX beta = testutil::random_vecx(rng, kShapeDim, 0.5);
    const FkCache c = fk_forward(tree, beta, pose);
    const CapsuleCloud cloud = capsule_surface_points(tree, c);
    CHECK(cloud.points.rows() == kNumBones * kSamplesPerCapsule);
    for (Index i = 0; i < cloud.points.rows(); ++i) {
      const int j = cloud.bone[i];
      const double d = point_segment_distance(
          cloud.points.row(i).transpose(), c.joints.row(tree.parents[j]).transpose(),
          c.joints.row(j).transpose());
      CHECK(std::abs(d - tree.capsule_radius[j]) < 1e-9);
    }
  }
}

TEST_CASE("person_height measures head to ankle midpoint") {
  const KinematicTree tree = KinematicTree::default_tree();
  const FkCache c = fk_forward(tree, VecX::Zero(kShapeDim), PoseFrame::rest());
  const Points3 kp = fk_keypoints(tree, c);
  // Oracle straight from template joint positions.
  const Vec3 head = c.joints.row(15).transpose();
  const Vec3 mid = 0.5 * (c.joints.row(7) + c.joints.row(8)).transpose();
  CHECK(person_height(kp) == doctest::Approx((head - mid).norm()).epsilon(1e-12));

  Points3 bad = kp;
  bad(kKpHead, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(person_height(bad), Error);
}

TEST_CASE("detect_standing accepts rest pose and rejects bent knees") {
  const KinematicTree tree = KinematicTree::default_tree();
  CHECK(detect_standing(tree, PoseFrame::rest()));

  PoseFrame bent = PoseFrame::rest();
  const Mat3 knee = axis_angle_to_matrix(Vec3(EIGEN_PI / 2, 0, 0));
  bent.body6d.segment<6>(6 * (4 - 1)) = matrix_to_rot6d(knee);
  CHECK_FALSE(detect_standing(tree, bent));

  // Arm rotations do not affect the check.
  PoseFrame waving = PoseFrame::rest();
  waving.body6d.segment<6>(6 * (18 - 1)) =
      matrix_to_rot6d(axis_angle_to_matrix(Vec3(0, 1.2, 0.4)));
  CHECK(detect_standing(tree, waving));

  // Just below threshold passes, just above fails.
  PoseFrame slight = PoseFrame::rest();
  slight.body6d.segment<6>(6 * (3 - 1)) =
      matrix_to_rot6d(axis_angle_to_matrix(Vec3(0.25, 0, 0)));
  CHECK(detect_standing(tree, slight));
  slight.body6d.segment<6>(6 * (3 - 1)) =
      matrix_to_rot6d(axis_angle_to_matrix(Vec3(0.27, 0, 0)));
  CHECK_FALSE(detect_standing(tree, slight));
}

TEST_CASE("mirror is an involution and commutes with FK reflection") {
  const KinematicTree tree = KinematicTree::default_tree();
  Rng rng(26);
  const VecX beta = testutil::random_vecx(rng, kShapeDim, 0.4);
  Motion m = Motion::zeros(4);
  for (Index t = 0; t < m.frames(); ++t) m.set_frame(t, random_pose(rng));

  const Motion mm = mirror_motion(tree, mirror_motion(tree, m));
  CHECK((mm.body6d - m.body6d).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((mm.trans - m.trans).cwiseAbs().maxCoeff() < 1e-9);
  for (Index t = 0; t < m.frames(); ++t) {
    const Mat3 a = axis_angle_to_matrix(Vec3(m.global_rot.row(t).transpose()));
    const Mat3 b = axis_angle_to_matrix(Vec3(mm.global_rot.row(t).transpose()));
    CHECK(rotation_geodesic_deg(a, b) < 1e-5);
  }

  const Motion flipped = mirror_motion(tree, m);
  for (Index t = 0; t < m.frames(); ++t) {
    const Points3 orig = fk_forward(tree, beta, m.frame(t)).joints;
    const Points3 mirr = fk_forward(tree, beta, flipped.frame(t)).joints;
    for (int i = 0; i < kNumJoints; ++i) {
      Vec3 want = orig.row(tree.mirror[i]).transpose();
      want.x() = -want.x();
      CHECK((mirr.row(i).transpose() - want).norm() < 1e-9);
    }
  }
}

TEST_CASE("mirroring a left elbow bend yields the right elbow bend") {
  const KinematicTree tree = KinematicTree::default_tree();
  PoseFrame p = PoseFrame::rest();
  const Mat3 bend = axis_angle_to_matrix(Vec3(0, 0.9, 0));
  p.body6d.segment<6>(6 * (18 - 1)) = matrix_to_rot6d(bend);  // left elbow
  const PoseFrame q = mirror_pose(tree, p);
  // Right elbow (19) now carries the reflected rotation; left is identity.
  const Mat3 right = rot6d_to_matrix(q.body6d.segment<6>(6 * (19 - 1)));
  const Mat3 left = rot6d_to_matrix(q.body6d.segment<6>(6 * (18 - 1)));
  CHECK(rotation_angle(left) < 1e-12);
  CHECK(rotation_angle(right) == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("pose_from_joints round trips twist-free poses") {
  const KinematicTree tree = KinematicTree::default_tree();
  Rng rng(27);
  const VecX beta = VecX::Zero(kShapeDim);
  for (int k = 0; k < 10; ++k) {
    // Build a pose from shortest-arc-reachable bends only.
    PoseFrame p = PoseFrame::rest();
    auto bend = [&](int j, const Vec3& target_dir, int child) {
      const Mat3 R = Eigen::Quaterniond::FromTwoVectors(
                         tree.offsets.row(child).transpose().normalized(),
                         target_dir.normalized())
                         .toRotationMatrix();
      p.body6d.segment<6>(6 * (j - 1)) = matrix_to_rot6d(R);
    };
    auto jitter_dir = [&](const Vec3& base) {
      return (base + 0.35 * random_vec3(rng)).normalized();
    };
    bend(1, jitter_dir(Vec3(0, 0, -1)), 4);
    bend(2, jitter_dir(Vec3(0, 0, -1)), 5);
    bend(4, jitter_dir(Vec3(0, 0.3, -1)), 7);
    bend(5, jitter_dir(Vec3(0, 0.3, -1)), 8);
    bend(16, jitter_dir(Vec3(1, 0, -0.3)), 18);
    bend(17, jitter_dir(Vec3(-1, 0, -0.3)), 19);
    bend(18, jitter_dir(Vec3(1, 0.4, 0)), 20);
    bend(19, jitter_dir(Vec3(-1, 0.4, 0)), 21);
    p.global_rot = Vec3(0, 0, rng.uniform(-EIGEN_PI, EIGEN_PI));
    p.trans = random_vec3(rng, 2.0);

    const Points3 kp = fk_keypoints(tree, fk_forward(tree, beta, p));
    const PoseFrame fit = pose_from_joints(tree, kp);
    const Points3 kp_fit = fk_keypoints(tree, fk_forward(tree, beta, fit));
    CHECK((kp - kp_fit).rowwise().norm().maxCoeff() < 2e-2);
  }

  // Rest pose fits with near-identity local rotations.
  const Points3 kp_rest =
      fk_keypoints(tree, fk_forward(tree, beta, PoseFrame::rest()));
  const PoseFrame fit = pose_from_joints(tree, kp_rest);
  for (int j = 1; j < kNumJoints; ++j) {
    const Mat3 R = rot6d_to_matrix(fit.body6d.segment<6>(6 * (j - 1)));
    CHECK(rotation_angle(R) < 1e-6);
  }
  CHECK(detect_standing(tree, fit));
}

TEST_CASE("tree json round trip preserves every field") {
  const KinematicTree tree = KinematicTree::default_tree();
  const KinematicTree back = KinematicTree::from_json(tree.to_json());
  CHECK(back.joint_names == tree.joint_names);
  CHECK(back.parents == tree.parents);
  CHECK((back.offsets - tree.offsets).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.scale_group == tree.scale_group);
  CHECK(back.capsule_radius == tree.capsule_radius);
  CHECK(back.mirror == tree.mirror);
  CHECK(back.keypoint_map == tree.keypoint_map);
  CHECK(back.shape_sensitivity == tree.shape_sensitivity);

  Json bad = tree.to_json();
  bad["parents"][5] = 20;  // not topological
  CHECK_THROWS_AS(KinematicTree::from_json(bad), Error);
}
