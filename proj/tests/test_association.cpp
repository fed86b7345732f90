#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "mocap/association.hpp"
#include "mocap/body_model.hpp"
#include "mocap/camera.hpp"
#include "mocap/error.hpp"
#include "mocap/rng.hpp"
#include "mocap/synth.hpp"
#include "test_util.hpp"

using mocap::AssociationOptions;
using mocap::Camera;
using mocap::CameraExtrinsics;
using mocap::CameraIntrinsics;
using mocap::Detection;
using mocap::ErrorCode;
using mocap::FrameAssociation;
using mocap::FrameDetection;
using mocap::MatchMatrix;
using mocap::Mat3;
using mocap::MatX;
using mocap::Points3;
using mocap::Rng;
using mocap::TrackState;
using mocap::Vec2;
using mocap::Vec3;
using mocap::VecX;
using testutil::rel_err;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const mocap::Error& e) {
    return e.code();
  }
  REQUIRE(false);
  return ErrorCode::InputNotFound;
}

Points3 random_pose(Rng& rng, double scale = 0.4) {
  Points3 p(mocap::kNumKeypoints, 3);
  for (int i = 0; i < mocap::kNumKeypoints; ++i)
    p.row(i) = Vec3(rng.normal(), rng.normal(), rng.normal() + 2.5).transpose() * scale;
  return p;
}

// World keypoints of a rest-pose person standing at `spot`.
Points3 standing_person(const mocap::KinematicTree& tree, const VecX& betas,
                        const Vec3& spot) {
  const mocap::FkCache cache =
      mocap::fk_forward(tree, betas, mocap::PoseFrame::rest());
  Points3 kp = mocap::fk_keypoints(tree, cache);
  const double foot = kp.col(2).minCoeff();
  for (int i = 0; i < kp.rows(); ++i)
    kp.row(i) += (spot - Vec3(0, 0, foot)).transpose();
  return kp;
}

// Projects world keypoints into a clean detection: exact pixels, confidence
// one everywhere, root-relative camera-frame initialization.
Detection observe_person(const Camera& cam, const Points3& world) {
  Detection det;
  det.conf = VecX::Ones(mocap::kNumKeypoints);
  const Mat3 r = cam.extr.R();
  const Vec3 pelvis = world.row(0).transpose();
  for (int k = 0; k < mocap::kNumKeypoints; ++k) {
    const Vec3 x = world.row(k).transpose();
    det.joints2d.row(k) = mocap::project(cam.intr, cam.extr, x).transpose();
    det.joints3d_init.row(k) = (r * (x - pelvis)).transpose();
  }
  return det;
}

Camera make_camera(const Vec3& position, double f = 1000.0) {
  Camera cam;
  cam.intr = CameraIntrinsics{f, f, 1000, 800};
  cam.extr = mocap::look_at_extrinsics(position, Vec3(0, 0, 0.9));
  return cam;
}

// Exhaustive optimum of the pairwise-affinity score over all partitions of
// the detections into groups holding at most one detection per view. This is
// the search space of cycle-consistent assignments: any such partition is
// consistent around every view cycle, and every consistent multi-matching is
// such a partition.
double brute_force_score(const MatX& a, const std::vector<int>& view_of) {
  const int d = static_cast<int>(view_of.size());
  std::vector<std::vector<int>> groups;
  double best = 0.0;
  std::function<void(int, double)> rec = [&](int i, double score) {
    if (i == d) {
      best = std::max(best, score);
      return;
    }
    for (auto& g : groups) {
      bool clash = false;
      double gain = 0.0;
      for (int m : g) {
        if (view_of[m] == view_of[i]) {
          clash = true;
          break;
        }
        gain += a(m, i);
      }
      if (!clash) {
        g.push_back(i);
        rec(i + 1, score + gain);
        g.pop_back();
      }
    }
    groups.push_back({i});
    rec(i + 1, score);
    groups.pop_back();
  };
  rec(0, 0.0);
  return best;
}

double extracted_score(const MatX& a, const FrameAssociation& fa) {
  double s = 0.0;
  for (const auto& g : fa.groups)
    for (size_t x = 0; x < g.members.size(); ++x)
      for (size_t y = x + 1; y < g.members.size(); ++y)
        s += a(g.members[x], g.members[y]);
  return s;
}

struct Instance {
  MatX geo;
  MatX pose;
  std::vector<int> view_of;
};

// Random symmetric cross-view affinities in [0, 1); same-view entries zero.
Instance random_instance(Rng& rng, const std::vector<int>& counts) {
  Instance inst;
  for (size_t v = 0; v < counts.size(); ++v)
    for (int k = 0; k < counts[v]; ++k) inst.view_of.push_back(static_cast<int>(v));
  const int d = static_cast<int>(inst.view_of.size());
  inst.geo = MatX::Zero(d, d);
  inst.pose = MatX::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      if (inst.view_of[i] == inst.view_of[j]) continue;
      inst.geo(i, j) = inst.geo(j, i) = rng.uniform();
      inst.pose(i, j) = inst.pose(j, i) = rng.uniform();
    }
  return inst;
}

void check_match_invariants(const MatchMatrix& mm) {
  const MatX& m = mm.m;
  const int d = static_cast<int>(mm.view_of.size());
  REQUIRE(m.rows() == d);
  REQUIRE(m.cols() == d);
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(m.minCoeff() > -1e-8);
  CHECK(m.maxCoeff() < 1.0 + 1e-8);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (mm.view_of[i] == mm.view_of[j])
        CHECK(std::abs(m(i, j) - (i == j ? 1.0 : 0.0)) < 1e-8);
  if (d > 0) {
    const Eigen::SelfAdjointEigenSolver<MatX> eig(m);
    CHECK(eig.eigenvalues().minCoeff() > -1e-6);
  }
  const int views = d == 0 ? 0 : 1 + *std::max_element(mm.view_of.begin(), mm.view_of.end());
  for (int v = 0; v < views; ++v)
    for (int w = 0; w < views; ++w) {
      if (v == w) continue;
      for (int i = 0; i < d; ++i) {
        if (mm.view_of[i] != v) continue;
        double row_sum = 0.0;
        for (int j = 0; j < d; ++j)
          if (mm.view_of[j] == w) row_sum += m(i, j);
        CHECK(row_sum < 1.0 + 1e-6);
      }
    }
}

void check_groups_consistent(const FrameAssociation& fa, const std::vector<int>& view_of) {
  std::vector<int> seen(view_of.size(), 0);
  for (const auto& g : fa.groups) {
    std::vector<int> views;
    for (int m : g.members) {
      views.push_back(view_of[m]);
      ++seen[m];
    }
    std::sort(views.begin(), views.end());
    CHECK(std::adjacent_find(views.begin(), views.end()) == views.end());
    CHECK(g.members.size() >= 2);
  }
  for (int m : fa.rejected) ++seen[m];
  for (int s : seen) CHECK(s == 1);
}

}  // namespace

TEST_CASE("pose distance costs") {
  Rng rng(71);
  const Points3 a = random_pose(rng);

  SUBCASE("identical poses cost nothing") {
    CHECK(mocap::temporal_cost(a, a) == 0.0);
    CHECK(mocap::spatial_cost(a, a) == 0.0);
  }

  SUBCASE("a rigid half-meter shift costs half a meter") {
    Points3 b = a;
    b.col(0).array() += 0.5;
    CHECK(rel_err(mocap::temporal_cost(a, b), 0.5) < 1e-12);
    CHECK(rel_err(mocap::spatial_cost(a, b), 0.5) < 1e-12);
  }

  SUBCASE("symmetric in the arguments") {
    const Points3 b = random_pose(rng);
    CHECK(mocap::spatial_cost(a, b) == mocap::spatial_cost(b, a));
    CHECK(mocap::temporal_cost(a, b) == mocap::temporal_cost(b, a));
  }

  SUBCASE("triangle inequality holds") {
    for (int trial = 0; trial < 20; ++trial) {
      const Points3 x = random_pose(rng);
      const Points3 y = random_pose(rng);
      const Points3 z = random_pose(rng);
      CHECK(mocap::spatial_cost(x, z) <=
            mocap::spatial_cost(x, y) + mocap::spatial_cost(y, z) + 1e-12);
    }
  }

  SUBCASE("joint count mismatch is rejected") {
    Points3 few(3, 3);
    few.setZero();
    CHECK(code_of([&] { mocap::temporal_cost(a, few); }) == ErrorCode::JointSetMismatch);
  }
}

TEST_CASE("detections lift into world coordinates") {
  const mocap::KinematicTree tree = mocap::KinematicTree::default_tree();
  const Points3 world = standing_person(tree, VecX::Zero(mocap::kShapeDim), Vec3(0.4, -0.2, 0));
  const Camera cam = make_camera(Vec3(3.5, 1.0, 2.6));
  const Detection det = observe_person(cam, world);

  SUBCASE("a clean detection reproduces its world pose") {
    const FrameDetection fd = mocap::lift_detection(cam, det, 2, 5);
    CHECK(fd.view == 2);
    CHECK(fd.det_index == 5);
    CHECK((fd.world - world).rowwise().norm().maxCoeff() < 1e-8);
  }

  SUBCASE("rays pass through the true joints") {
    const FrameDetection fd = mocap::lift_detection(cam, det, 0, 0);
    for (int k = 0; k < mocap::kNumKeypoints; ++k) {
      const Vec3 p = world.row(k).transpose();
      CHECK((p.cross(fd.rays[k].l) - fd.rays[k].n).norm() < 1e-9);
    }
  }

  SUBCASE("too few confident keypoints cannot be placed") {
    Detection starved = det;
    starved.conf.setZero();
    starved.conf(0) = 1.0;
    CHECK(code_of([&] { mocap::lift_detection(cam, starved, 0, 0); }) ==
          ErrorCode::DegenerateConfiguration);
  }
}

TEST_CASE("ray coplanarity cost separates people") {
  const mocap::KinematicTree tree = mocap::KinematicTree::default_tree();
  const Points3 person_a = standing_person(tree, VecX::Zero(mocap::kShapeDim), Vec3(0.3, 0.1, 0));
  VecX betas_b = VecX::Zero(mocap::kShapeDim);
  betas_b(0) = 1.2;
  const Points3 person_b = standing_person(tree, betas_b, Vec3(-0.4, -0.5, 0));
  const Camera cam0 = make_camera(Vec3(3.5, 1.0, 2.6));
  const Camera cam1 = make_camera(Vec3(-2.8, 2.2, 2.9), 1150.0);

  const FrameDetection a0 = mocap::lift_detection(cam0, observe_person(cam0, person_a), 0, 0);
  const FrameDetection a1 = mocap::lift_detection(cam1, observe_person(cam1, person_a), 1, 0);
  const FrameDetection b1 = mocap::lift_detection(cam1, observe_person(cam1, person_b), 1, 1);

  SUBCASE("the same person seen twice is coplanar") {
    CHECK(mocap::geometric_cost(a0, a1, 0.3) < 1e-10);
  }

  SUBCASE("different people are not") {
    CHECK(mocap::geometric_cost(a0, b1, 0.3) > 1e-4);
  }

  SUBCASE("focal scaling keeps true matches at zero") {
    Camera wide0 = cam0;
    wide0.intr.fx *= 1.5;
    wide0.intr.fy *= 1.5;
    Camera wide1 = cam1;
    wide1.intr.fx *= 1.5;
    wide1.intr.fy *= 1.5;
    const FrameDetection wa0 =
        mocap::lift_detection(wide0, observe_person(wide0, person_a), 0, 0);
    const FrameDetection wa1 =
        mocap::lift_detection(wide1, observe_person(wide1, person_a), 1, 0);
    CHECK(mocap::geometric_cost(wa0, wa1, 0.3) < 1e-10);
  }

  SUBCASE("low-confidence joints do not contribute") {
    Detection noisy = observe_person(cam0, person_a);
    noisy.joints2d.row(3) << 12.0, 780.0;
    noisy.conf(3) = 0.2;
    const FrameDetection fd = mocap::lift_detection(cam0, noisy, 0, 0);
    CHECK(mocap::geometric_cost(fd, a1, 0.3) < 1e-10);
  }

  SUBCASE("no mutually confident joint means no evidence") {
    Detection left = observe_person(cam0, person_a);
    Detection right = observe_person(cam1, person_a);
    for (int k = 0; k < mocap::kNumKeypoints; ++k) {
      if (k % 2 == 0) left.conf(k) = 0.1;
      else right.conf(k) = 0.1;
    }
    const FrameDetection fl = mocap::lift_detection(cam0, left, 0, 0);
    const FrameDetection fr = mocap::lift_detection(cam1, right, 1, 0);
    CHECK(mocap::geometric_cost(fl, fr, 0.3) ==
          std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("costs turn into affinities") {
  SUBCASE("zero cost is full affinity") {
    MatX c(1, 1);
    c(0, 0) = 0.0;
    CHECK(mocap::build_affinity(c, 0.25)(0, 0) == 1.0);
  }

  SUBCASE("cost equal to the scale decays to 1/e") {
    MatX c(1, 1);
    c(0, 0) = 0.25;
    CHECK(rel_err(mocap::build_affinity(c, 0.25)(0, 0), std::exp(-1.0)) < 1e-12);
  }

  SUBCASE("monotone decreasing in cost") {
    MatX c(1, 5);
    c << 0.0, 0.1, 0.5, 1.0, 3.0;
    const MatX a = mocap::build_affinity(c, 0.25);
    for (int i = 1; i < 5; ++i) CHECK(a(0, i) < a(0, i - 1));
  }

  SUBCASE("masked and infinite costs vanish") {
    MatX c(1, 2);
    c(0, 0) = std::numeric_limits<double>::quiet_NaN();
    c(0, 1) = std::numeric_limits<double>::infinity();
    const MatX a = mocap::build_affinity(c, 0.25);
    CHECK(a(0, 0) == 0.0);
    CHECK(a(0, 1) == 0.0);
  }
}

TEST_CASE("pose cost matrix assembly") {
  Rng rng(5);
  const Points3 base = random_pose(rng);
  Points3 near = base;
  near.col(0).array() += 0.1;
  Points3 far = base;
  far.col(1).array() += 0.8;

  FrameDetection di;
  di.view = 0;
  di.world = near;
  FrameDetection dj;
  dj.view = 1;
  dj.world = far;
  AssociationOptions opts;

  SUBCASE("first frame uses spatial similarity only") {
    const mocap::CostMatrices c = mocap::build_costs({di, dj}, {}, opts);
    const double expect = mocap::spatial_cost(near, far);
    CHECK(rel_err(c.pose(0, 1), expect) < 1e-12);
    CHECK(c.pose(1, 0) == c.pose(0, 1));
    CHECK(std::isnan(c.pose(0, 0)));
  }

  SUBCASE("tracked frames add both temporal terms") {
    TrackState track;
    track.pose = base;
    const mocap::CostMatrices c = mocap::build_costs({di, dj}, {track}, opts);
    const double expect =
        mocap::temporal_cost(base, near) + mocap::temporal_cost(base, far) +
        mocap::spatial_cost(near, far);
    CHECK(rel_err(c.pose(0, 1), expect) < 1e-12);
  }

  SUBCASE("each detection measures against its nearest track") {
    TrackState t0;
    t0.pose = base;
    Points3 other = base;
    other.col(2).array() += 5.0;
    TrackState t1;
    t1.pose = other;
    const mocap::CostMatrices c = mocap::build_costs({di, dj}, {t0, t1}, opts);
    const double expect =
        mocap::temporal_cost(base, near) + mocap::temporal_cost(base, far) +
        mocap::spatial_cost(near, far);
    CHECK(rel_err(c.pose(0, 1), expect) < 1e-12);
  }
}

TEST_CASE("consensus matching") {
  AssociationOptions opts;

  SUBCASE("two views with one person each must pair") {
    Instance inst;
    inst.view_of = {0, 1};
    inst.geo = inst.pose = MatX::Zero(2, 2);
    inst.geo(0, 1) = inst.geo(1, 0) = 0.8;
    inst.pose(0, 1) = inst.pose(1, 0) = 0.6;
    const MatchMatrix mm = mocap::admm_match(inst.geo, inst.pose, inst.view_of, opts);
    check_match_invariants(mm);
    CHECK(mm.m(0, 1) > 0.99);
    const FrameAssociation fa = mocap::extract_identities(mm, opts);
    REQUIRE(fa.groups.size() == 1);
    CHECK(fa.groups[0].members == std::vector<int>{0, 1});
    CHECK(fa.rejected.empty());
  }

  SUBCASE("a clear affinity gap recovers the permutation") {
    Instance inst;
    inst.view_of = {0, 0, 1, 1};
    inst.geo = inst.pose = MatX::Zero(4, 4);
    auto set = [&](int i, int j, double v) {
      inst.geo(i, j) = inst.geo(j, i) = v;
      inst.pose(i, j) = inst.pose(j, i) = v;
    };
    set(0, 2, 0.9);
    set(1, 3, 0.9);
    set(0, 3, 0.1);
    set(1, 2, 0.1);
    const MatchMatrix mm = mocap::admm_match(inst.geo, inst.pose, inst.view_of, opts);
    check_match_invariants(mm);
    const FrameAssociation fa = mocap::extract_identities(mm, opts);
    const MatX a = opts.c_g * inst.geo + opts.c_p * inst.pose;
    CHECK(extracted_score(a, fa) >=
          (1.0 - 1e-6) * brute_force_score(a, inst.view_of));
    REQUIRE(fa.groups.size() == 2);
    check_groups_consistent(fa, inst.view_of);
  }

  SUBCASE("pairwise-greedy-inconsistent affinities still reach the optimum") {
    // The strongest 0-2 and 2-4 links pull detections 0, 2, 4 into one
    // group, but 0 and 4 barely agree; the direct chains through the second
    // detections compete. Whatever wins must equal exhaustive search.
    Instance inst;
    inst.view_of = {0, 0, 1, 1, 2, 2};
    inst.geo = inst.pose = MatX::Zero(6, 6);
    auto set = [&](int i, int j, double v) {
      inst.geo(i, j) = inst.geo(j, i) = v;
      inst.pose(i, j) = inst.pose(j, i) = v;
    };
    set(0, 2, 0.95);
    set(2, 4, 0.90);
    set(0, 4, 0.05);
    set(1, 3, 0.60);
    set(3, 5, 0.55);
    set(1, 5, 0.50);
    set(0, 3, 0.20);
    set(1, 2, 0.15);
    set(2, 5, 0.25);
    set(3, 4, 0.10);
    set(1, 4, 0.30);
    set(0, 5, 0.12);
    const MatchMatrix mm = mocap::admm_match(inst.geo, inst.pose, inst.view_of, opts);
    check_match_invariants(mm);
    const FrameAssociation fa = mocap::extract_identities(mm, opts);
    check_groups_consistent(fa, inst.view_of);
    const MatX a = opts.c_g * inst.geo + opts.c_p * inst.pose;
    CHECK(extracted_score(a, fa) >=
          (1.0 - 1e-6) * brute_force_score(a, inst.view_of));
  }

  SUBCASE("random small instances match exhaustive search") {
    Rng rng(917);
    const std::vector<std::vector<int>> shapes = {
        {1, 1},    {2, 2},    {3, 3},    {2, 3},    {1, 2, 3}, {2, 2, 2},
        {3, 3, 3}, {1, 1, 1}, {3, 2, 1}, {2, 0, 2}, {3, 1, 3}, {1, 3, 1}};
    int solved = 0;
    for (int trial = 0; trial < 60; ++trial) {
      const Instance inst = random_instance(rng, shapes[trial % shapes.size()]);
      const MatchMatrix mm = mocap::admm_match(inst.geo, inst.pose, inst.view_of, opts);
      check_match_invariants(mm);
      const FrameAssociation fa = mocap::extract_identities(mm, opts);
      check_groups_consistent(fa, inst.view_of);
      const MatX a = opts.c_g * inst.geo + opts.c_p * inst.pose;
      CHECK(extracted_score(a, fa) >=
            (1.0 - 1e-6) * brute_force_score(a, inst.view_of));
      ++solved;
    }
    CHECK(solved == 60);
  }

  SUBCASE("objective of the reported iterate never increases") {
    Rng rng(411);
    for (int trial = 0; trial < 10; ++trial) {
      const Instance inst = random_instance(rng, {3, 3, 3});
      const MatchMatrix mm = mocap::admm_match(inst.geo, inst.pose, inst.view_of, opts);
      for (size_t k = 1; k < mm.objective_trace.size(); ++k)
        CHECK(mm.objective_trace[k] <= mm.objective_trace[k - 1] + 1e-9);
    }
  }

  SUBCASE("permuting detections within a view permutes the match") {
    Rng rng(333);
    const Instance inst = random_instance(rng, {2, 3, 2});
    const int d = 7;
    // Swap view-1 detections 2 and 4 (indices within the flat list).
    std::vector<int> perm = {0, 1, 4, 3, 2, 5, 6};
    MatX p = MatX::Zero(d, d);
    for (int i = 0; i < d; ++i) p(i, perm[i]) = 1.0;
    Instance permuted;
    permuted.view_of = inst.view_of;
    permuted.geo = p.transpose() * inst.geo * p;
    permuted.pose = p.transpose() * inst.pose * p;
    const MatchMatrix mm = mocap::admm_match(inst.geo, inst.pose, inst.view_of, opts);
    const MatchMatrix mp =
        mocap::admm_match(permuted.geo, permuted.pose, permuted.view_of, opts);
    CHECK((p.transpose() * mm.m * p - mp.m).cwiseAbs().maxCoeff() < 1e-6);
    const FrameAssociation fa = mocap::extract_identities(mm, opts);
    const FrameAssociation fp = mocap::extract_identities(mp, opts);
    auto canon = [&](const FrameAssociation& f, const std::vector<int>& map) {
      std::vector<std::vector<int>> gs;
      for (const auto& g : f.groups) {
        std::vector<int> m;
        for (int x : g.members) m.push_back(map[x]);
        std::sort(m.begin(), m.end());
        gs.push_back(m);
      }
      std::sort(gs.begin(), gs.end());
      return gs;
    };
    std::vector<int> identity = {0, 1, 2, 3, 4, 5, 6};
    std::vector<int> inverse(d);
    for (int i = 0; i < d; ++i) inverse[perm[i]] = i;
    CHECK(canon(fa, identity) == canon(fp, perm));
  }

  SUBCASE("invariants hold on a stress batch") {
    Rng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<int> counts(2 + trial % 3);
      int total = 0;
      for (auto& c : counts) {
        c = static_cast<int>(rng.below(4));
        total += c;
      }
      if (total == 0) counts[0] = 1;
      const Instance inst = random_instance(rng, counts);
      const MatchMatrix mm = mocap::admm_match(inst.geo, inst.pose, inst.view_of, opts);
      check_match_invariants(mm);
    }
  }
}

TEST_CASE("identity extraction from a match matrix") {
  AssociationOptions opts;

  SUBCASE("clean blocks give clean groups") {
    MatchMatrix mm;
    mm.view_of = {0, 0, 1, 1};
    mm.m = MatX::Identity(4, 4);
    mm.m(0, 2) = mm.m(2, 0) = 1.0;
    mm.m(1, 3) = mm.m(3, 1) = 1.0;
    const FrameAssociation fa = mocap::extract_identities(mm, opts);
    REQUIRE(fa.groups.size() == 2);
    CHECK(fa.groups[0].members == std::vector<int>{0, 2});
    CHECK(fa.groups[1].members == std::vector<int>{1, 3});
    CHECK(fa.rejected.empty());
  }

  SUBCASE("a detection nobody supports is rejected") {
    MatchMatrix mm;
    mm.view_of = {0, 0, 1, 1};
    mm.m = MatX::Identity(4, 4);
    mm.m(0, 2) = mm.m(2, 0) = 0.9;
    mm.m(1, 3) = mm.m(3, 1) = 0.42;
    const FrameAssociation fa = mocap::extract_identities(mm, opts);
    REQUIRE(fa.groups.size() == 1);
    CHECK(fa.groups[0].members == std::vector<int>{0, 2});
    REQUIRE(fa.rejected.size() == 2);
    CHECK(fa.rejected == std::vector<int>{1, 3});
  }

  SUBCASE("each view contributes at most one detection") {
    MatchMatrix mm;
    mm.view_of = {0, 1, 1};
    mm.m = MatX::Identity(3, 3);
    // Both view-1 detections claim the view-0 one; the stronger wins.
    mm.m(0, 1) = mm.m(1, 0) = 0.9;
    mm.m(0, 2) = mm.m(2, 0) = 0.7;
    const FrameAssociation fa = mocap::extract_identities(mm, opts);
    REQUIRE(fa.groups.size() == 1);
    CHECK(fa.groups[0].members == std::vector<int>{0, 1});
    CHECK(fa.rejected == std::vector<int>{2});
  }
}

TEST_CASE("frame association maintains tracks") {
  const mocap::KinematicTree tree = mocap::KinematicTree::default_tree();
  const std::vector<Camera> cams = {make_camera(Vec3(3.5, 0.5, 2.6)),
                                    make_camera(Vec3(-1.5, 3.2, 2.9), 1100.0),
                                    make_camera(Vec3(-2.0, -2.8, 2.4), 950.0)};
  AssociationOptions opts;

  auto lift_all = [&](const std::vector<Points3>& people,
                      const std::vector<int>& views) {
    std::vector<FrameDetection> dets;
    std::vector<int> counter(cams.size(), 0);
    for (size_t p = 0; p < people.size(); ++p)
      for (int v : views)
        dets.push_back(mocap::lift_detection(
            cams[v], observe_person(cams[v], people[p]), v, counter[v]++));
    return dets;
  };

  SUBCASE("first frame builds one group and one track") {
    const Points3 person = standing_person(tree, VecX::Zero(mocap::kShapeDim), Vec3(0.2, 0.3, 0));
    std::vector<TrackState> tracks;
    int next_id = 0;
    const FrameAssociation fa =
        mocap::associate_frame(lift_all({person}, {0, 1, 2}), &tracks, 0, &next_id, opts);
    REQUIRE(fa.groups.size() == 1);
    CHECK(fa.groups[0].members.size() == 3);
    CHECK(fa.groups[0].person_id == 0);
    REQUIRE(tracks.size() == 1);
    CHECK(tracks[0].last_seen == 0);
    CHECK(mocap::temporal_cost(tracks[0].pose, person) < 0.05);
  }

  SUBCASE("a silent view leaves the others to pair up") {
    const Points3 person = standing_person(tree, VecX::Zero(mocap::kShapeDim), Vec3(0, 0, 0));
    std::vector<TrackState> tracks;
    int next_id = 0;
    const FrameAssociation fa =
        mocap::associate_frame(lift_all({person}, {0, 2}), &tracks, 0, &next_id, opts);
    REQUIRE(fa.groups.size() == 1);
    CHECK(fa.groups[0].members.size() == 2);
  }

  SUBCASE("crossing people keep their identities") {
    VecX tall = VecX::Zero(mocap::kShapeDim);
    tall(0) = 1.5;
    Rng rng(88);
    std::vector<TrackState> tracks;
    int next_id = 0;
    int id_a = -1, id_b = -1;
    for (int f = 0; f < 20; ++f) {
      const double s = f / 19.0;
      Points3 pa = standing_person(tree, VecX::Zero(mocap::kShapeDim),
                                   Vec3(-1.0 + 2.0 * s, 0.3, 0));
      Points3 pb = standing_person(tree, tall, Vec3(1.0 - 2.0 * s, -0.3, 0));
      for (int k = 0; k < mocap::kNumKeypoints; ++k) {
        pa.row(k) += 0.02 * Vec3(rng.normal(), rng.normal(), rng.normal()).transpose();
        pb.row(k) += 0.02 * Vec3(rng.normal(), rng.normal(), rng.normal()).transpose();
      }
      const FrameAssociation fa =
          mocap::associate_frame(lift_all({pa, pb}, {0, 1, 2}), &tracks, f, &next_id, opts);
      REQUIRE(fa.groups.size() == 2);
      // Detections alternate person-major: pa fills indices 0..2, pb 3..5.
      int got_a = -1, got_b = -1;
      for (const auto& g : fa.groups)
        for (int m : g.members) {
          if (m == 0) got_a = g.person_id;
          if (m == 3) got_b = g.person_id;
        }
      REQUIRE(got_a >= 0);
      REQUIRE(got_b >= 0);
      CHECK(got_a != got_b);
      if (f == 0) {
        id_a = got_a;
        id_b = got_b;
      } else {
        CHECK(got_a == id_a);
        CHECK(got_b == id_b);
      }
    }
  }

  SUBCASE("tracks survive short gaps and expire after long ones") {
    const Points3 person = standing_person(tree, VecX::Zero(mocap::kShapeDim), Vec3(0.5, 0.2, 0));
    std::vector<TrackState> tracks;
    int next_id = 0;
    const FrameAssociation f0 =
        mocap::associate_frame(lift_all({person}, {0, 1, 2}), &tracks, 0, &next_id, opts);
    const int original = f0.groups[0].person_id;
    for (int f = 1; f <= 5; ++f)
      mocap::associate_frame({}, &tracks, f, &next_id, opts);
    CHECK(tracks.size() == 1);
    const FrameAssociation back =
        mocap::associate_frame(lift_all({person}, {0, 1, 2}), &tracks, 6, &next_id, opts);
    CHECK(back.groups[0].person_id == original);

    for (int f = 7; f <= 18; ++f)
      mocap::associate_frame({}, &tracks, f, &next_id, opts);
    CHECK(tracks.empty());
    const FrameAssociation fresh =
        mocap::associate_frame(lift_all({person}, {0, 1, 2}), &tracks, 19, &next_id, opts);
    CHECK(fresh.groups[0].person_id != original);
  }
}

TEST_CASE("scene association under clutter") {
  const mocap::KinematicTree tree = mocap::KinematicTree::default_tree();
  mocap::SynthConfig cfg;
  cfg.views = 4;
  cfg.actors = 3;
  cfg.frames = 12;
  cfg.motion_source = "rest";
  cfg.pixel_sigma = 1.0;
  cfg.init3d_sigma = 0.02;
  cfg.beta_sigma = 0.3;
  cfg.spawn_radius = 1.0;
  cfg.false_positive_rate = 0.1;
  cfg.shuffle_prob = 1.0;
  cfg.seed = 4;
  const mocap::SynthResult sr = mocap::synth_generate(tree, cfg);

  AssociationOptions opts;
  const mocap::AssocFile assoc = mocap::associate_scene(sr.scene, sr.gt.cameras, opts);

  REQUIRE(assoc.person.size() == static_cast<size_t>(cfg.frames));
  long correct_pairs = 0, total_pairs = 0, ghosts = 0, ghosts_rejected = 0;
  for (int f = 0; f < cfg.frames; ++f) {
    struct Entry {
      int gt;
      int got;
      int view;
    };
    std::vector<Entry> entries;
    for (int v = 0; v < cfg.views; ++v) {
      const auto& dets = sr.scene.detections[v][f];
      for (size_t d = 0; d < dets.size(); ++d) {
        const int gt = sr.gt.det_person[v][f][d];
        const int got = assoc.person[f][v][d];
        if (gt < 0) {
          ++ghosts;
          if (got < 0) ++ghosts_rejected;
        } else {
          entries.push_back({gt, got, v});
        }
      }
    }
    for (size_t i = 0; i < entries.size(); ++i)
      for (size_t j = i + 1; j < entries.size(); ++j) {
        if (entries[i].view == entries[j].view) continue;
        ++total_pairs;
        const bool same_gt = entries[i].gt == entries[j].gt;
        const bool same_got = entries[i].got >= 0 && entries[i].got == entries[j].got;
        if (same_gt == same_got) ++correct_pairs;
      }
  }
  CHECK(total_pairs > 0);
  CHECK(ghosts > 0);
  const double accuracy = static_cast<double>(correct_pairs) / total_pairs;
  const double rejection = static_cast<double>(ghosts_rejected) / ghosts;
  CHECK(accuracy >= 0.95);
  CHECK(rejection >= 0.90);
}
