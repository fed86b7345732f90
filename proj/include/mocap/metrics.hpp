#pragma once

#include <vector>

#include "mocap/scene_io.hpp"

namespace mocap {

// Joint-set metrics. Inputs are meters; results are millimeters (Accel in
// mm/s^2). Sequences are per-frame point sets of identical shape; a shape
// mismatch raises JointSetMismatch.
double metric_mpjpe(const std::vector<Points3>& pred, const std::vector<Points3>& gt);

// MPJPE after per-frame similarity alignment of the prediction onto the
// ground truth (Procrustes with scale).
double metric_pa_mpjpe(const std::vector<Points3>& pred, const std::vector<Points3>& gt);

// Mean norm of the difference of second temporal differences, scaled by
// fps^2. Needs at least 3 frames (TooShort otherwise).
double metric_accel(const std::vector<Points3>& pred, const std::vector<Points3>& gt,
                    double fps);

struct Limb {
  int a, b;  // keypoint indices
};

// The ten scored limbs of the canonical keypoint set: torso, head and the
// left/right upper/lower arms and legs.
const std::vector<Limb>& keypoint_limbs();

// Fraction of limbs whose endpoints both land within half the true limb length.
double metric_pcp(const Points3& pred15, const Points3& gt15);
double metric_pcp(const std::vector<Points3>& pred, const std::vector<Points3>& gt);

// Camera errors after removing the global gauge: with >= 3 views the
// predicted centers are similarity-aligned onto the truth; with 2 views the
// gauge is pinned to view 0 and the scale to the baseline ratio.
struct CameraErrors {
  double focal_pct = 0.0;
  double position_mm = 0.0;
  double angle_deg = 0.0;
  RigidAlign gt_to_pred;  // world map x_pred = s R x_gt + t
};

CameraErrors metric_cameras(const std::vector<Camera>& pred,
                            const std::vector<Camera>& gt);

// Mean pixel distance between detected joints (conf > 0, true detections
// only) and the ground-truth joints projected through the predicted
// cameras, with the gauge map applied.
double metric_reprojection(const SceneFile& scene, const GroundTruth& gt,
                           const std::vector<Camera>& pred_cams);

struct EvalReport {
  std::vector<double> pcp_per_actor;
  double mpjpe_mm = 0.0;
  double pa_mpjpe_mm = 0.0;
  double accel_mm_s2 = 0.0;
  double reproj_px = 0.0;
  double focal_err_pct = 0.0;
  double cam_pos_mm = 0.0;
  double cam_angle_deg = 0.0;

  Json to_json() const;
};

// Full evaluation: matches predicted persons to ground-truth actors, maps
// predictions into the ground-truth frame and aggregates all metrics.
EvalReport evaluate(const KinematicTree& tree, const SceneFile& scene,
                    const GroundTruth& gt, const std::vector<Camera>& pred_cams,
                    std::vector<PersonMotion> pred_persons);

}  // namespace mocap
