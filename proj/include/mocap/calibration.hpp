#pragma once

#include <cstdint>
#include <vector>

#include "mocap/body_model.hpp"
#include "mocap/camera.hpp"
#include "mocap/rng.hpp"
#include "mocap/scene_io.hpp"
#include "mocap/types.hpp"

namespace mocap {

// One upright-standing person observed in one frame: head, pelvis and both
// ankle pixels plus the metric height of the head above the 3D ankle
// midpoint. All points are homogeneous pixels with the principal point
// subtracted, so the calibration equations see K-hat = diag(fx, fy, 1).
// Head and pelvis are images of points on the body's vertical axis; the 2D
// ankle midpoint is not (the midpoint of two projections is not the
// projection of the 3D midpoint), which is why the ankles stay separate.
struct StandingCandidate {
  Vec3 head = Vec3::UnitZ();
  Vec3 pelvis = Vec3::UnitZ();
  Vec3 ankle_left = Vec3::UnitZ();
  Vec3 ankle_right = Vec3::UnitZ();
  double height = 0.0;  // m, head above the 3D ankle midpoint
  int frame = -1;
  int view = -1;

  Vec3 ankle_mid() const { return 0.5 * (ankle_left + ankle_right); }
};

struct CalibrationOptions {
  double theta_stand = 0.26;   // rad, max spine/hip/knee bend of a standing pose
  double gamma_max_deg = 2.0;  // line agreement threshold for consensus
  int ransac_iters = 200;
  double min_line_px = 20.0;   // reject shorter head-ankle image segments
  double match_gate = 0.15;    // m, max aligned joint rms for a cross-view match
  std::uint64_t seed = 0;
};

// Harvests standing people from one view's per-detection 3d initializations,
// across all frames. Requires head, pelvis and both ankles detected.
std::vector<StandingCandidate> standing_candidates(const KinematicTree& tree,
                                                   const SceneFile& scene, int view,
                                                   const CalibrationOptions& opts);

// Vertical vanishing point: the unit vector orthogonal to every head-pelvis
// image line, from the SVD of the stacked line coordinates. Sign fixed to a
// positive third component (or largest leading one for points at infinity).
// Throws DegenerateLines when the lines share a pencil, leaving v ambiguous.
Vec3 solve_vertical_vp(const std::vector<StandingCandidate>& cands);

struct RansacVp {
  Vec3 v = Vec3::UnitZ();
  std::vector<int> inliers;
};

// Two-line hypotheses; a candidate agrees when its own segment and the
// direction from its midpoint toward the vanishing point differ by less than
// gamma_max_deg. The winner is refit on its inliers.
// Throws InsufficientCandidates (<2) or NoConsensus (best support < 2).
RansacVp ransac_vertical_lines(const std::vector<StandingCandidate>& cands,
                               double gamma_max_deg, int iters, Rng& rng);

// Per-candidate depths, up to one global scale shared with the vanishing
// point norm (normalized out as mu = 1). lambda_ankle is the mean depth of
// the two ankles, which is exactly the depth of their 3D midpoint, and
// scaled_ankle holds that midpoint in K-scaled camera coordinates (the form
// the focal equations consume). v_used is +-v flipped so that depths come
// out positive.
struct DepthSolution {
  VecX lambda_head;
  VecX lambda_ankle;
  Points3 scaled_ankle;
  Vec3 v_used = Vec3::UnitZ();
};

DepthSolution solve_depths(const Vec3& v, const std::vector<StandingCandidate>& cands);

struct FocalSolution {
  double fx = 0.0;
  double fy = 0.0;
  bool shared = false;  // two-focal system replaced by a single shared focal
};

// Focal lengths from the ground-plane orthogonality of depth-scaled ankle
// midpoints (DepthSolution::scaled_ankle rows). Falls back to one shared
// focal when the two-focal system is ill-conditioned, degenerate in one
// axis, or yields non-positive squares; throws NegativeSolution when even
// that is non-positive, and InsufficientCandidates below 3 points.
FocalSolution solve_focal(const Vec3& v, const Points3& scaled_ankles);

// Single-view intrinsics: standing candidates -> consensus vanishing point
// -> depths -> focals, principal point fixed at the image center. Stage
// failures are wrapped into CalibrationFailed. Deterministic per view given
// opts.seed.
CameraIntrinsics estimate_intrinsics(const KinematicTree& tree, const SceneFile& scene,
                                     int view, const CalibrationOptions& opts);

// Initial extrinsics from cross-view rigid alignment of the per-detection 3d
// poses: pairwise matches by aligned joint rms (gated Hungarian), relative
// rotations averaged over matches, translations regressed from pixels of
// points lifted through already-localized views. View 0 anchors the world.
// Throws InsufficientOverlap when a view cannot be connected to view 0.
std::vector<Camera> estimate_extrinsics_init(const KinematicTree& tree,
                                             const SceneFile& scene,
                                             const std::vector<CameraIntrinsics>& intrinsics,
                                             const CalibrationOptions& opts);

// Full camera bootstrap: per-view intrinsics, then joint extrinsics.
std::vector<Camera> calibrate_cameras(const KinematicTree& tree, const SceneFile& scene,
                                      const CalibrationOptions& opts);

}  // namespace mocap
