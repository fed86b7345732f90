#pragma once

#include <vector>

#include "mocap/camera.hpp"
#include "mocap/scene_io.hpp"
#include "mocap/types.hpp"

namespace mocap {

struct AssociationOptions {
  double sigma_pose = 0.25;     // m, pose cost scale in the affinity kernel
  double sigma_geo = 0.02;      // coplanarity residual scale
  double c_g = 0.7;             // geometric affinity weight
  double c_p = 0.3;             // pose affinity weight
  double rho = 1.0;             // initial consensus penalty
  double tol = 1e-4;            // per-entry primal/dual residual threshold
  int max_iters = 500;
  double binarize = 0.5;        // correspondence threshold on match entries
  double track_gate = 1.0;      // m, max fused-pose distance to inherit a track
  int track_grace = 10;         // frames an unseen track stays alive
  double min_joint_conf = 0.3;  // joints below this skip the geometric cost
};

// One detection lifted into the world: the root-relative 3D pose is placed
// absolutely by fitting the camera-frame translation that best reprojects
// onto the detected pixels, then transformed by the camera extrinsics.
// Rays go from the camera center through each detected keypoint pixel.
struct FrameDetection {
  int view = 0;
  int det_index = 0;      // position in the view's per-frame detection list
  Points3 world;          // kNumKeypoints x 3, absolute
  std::vector<Ray> rays;  // one per keypoint, meaningless where conf == 0
  VecX conf;
};

// Pairwise costs over all detections of one frame across views. Same-view
// pairs carry no evidence and are masked with NaN.
struct CostMatrices {
  MatX pose;                // D x D, symmetric, meters
  MatX geo;                 // D x D, symmetric, coplanarity residual
  std::vector<int> view_of; // D entries
};

// Relaxed cycle-consistent correspondence matrix. Entries live in [0, 1],
// same-view blocks are pinned to identity, every view-pair block is doubly
// substochastic, and the whole matrix is positive semidefinite.
struct MatchMatrix {
  MatX m;
  std::vector<int> view_of;
  bool converged = true;
  int iters = 0;
  // Objective of the reported (best feasible) iterate after each iteration;
  // non-increasing by construction of the best-iterate selection.
  std::vector<double> objective_trace;
};

struct DetectionGroup {
  int person_id = -1;        // assigned by associate_frame, -1 before tracking
  std::vector<int> members;  // indices into the frame's detection list
};

struct TrackState {
  int id = 0;
  Points3 pose;  // fused world pose, kNumKeypoints x 3
  int last_seen = -1;
};

struct FrameAssociation {
  std::vector<DetectionGroup> groups;
  std::vector<int> rejected;  // detection indices with no cross-view support
};

// Mean per-joint Euclidean distance in meters. Zero iff identical.
// Throws JointSetMismatch when the row counts differ.
double temporal_cost(const Points3& track_pose, const Points3& det_world);
double spatial_cost(const Points3& a, const Points3& b);

// Mean absolute ray-pair coplanarity over joints both detections see with
// confidence >= min_conf. Infinity when no joint qualifies, so the affinity
// of an evidence-free pair is exactly zero.
double geometric_cost(const FrameDetection& a, const FrameDetection& b,
                      double min_conf);

// Places a detection absolutely in the world (see FrameDetection). Throws
// DegenerateConfiguration when too few confident keypoints pin it down.
FrameDetection lift_detection(const Camera& cam, const Detection& det, int view,
                              int det_index);

// Pose cost couples both detections' agreement with the nearest track and
// with each other; the temporal part is dropped when `tracks` is empty.
CostMatrices build_costs(const std::vector<FrameDetection>& dets,
                         const std::vector<TrackState>& tracks,
                         const AssociationOptions& opts);

// exp(-cost / sigma) elementwise; masked (NaN) and infinite costs become 0.
MatX build_affinity(const MatX& cost, double sigma);

// Maximizes c_g <G, M> + c_p <P, M> over relaxed cycle-consistent matrices
// by consensus splitting: one copy is projected onto the positive
// semidefinite cone, one onto the box/affine constraints, with an adaptive
// penalty. Returns the best feasible iterate, polished until it satisfies
// every MatchMatrix invariant; `converged` is false when the residuals never
// met the tolerance within max_iters.
MatchMatrix admm_match(const MatX& geo_affinity, const MatX& pose_affinity,
                       const std::vector<int>& view_of,
                       const AssociationOptions& opts);

// Greedy identity extraction: repeatedly claim the unassigned detection with
// the most cross-view partners above the binarization threshold, one
// detection per view. Groups seen from a single view are rejections.
FrameAssociation extract_identities(const MatchMatrix& match,
                                    const AssociationOptions& opts);

// Full per-frame step: costs, affinities, matching, extraction, then track
// bookkeeping. Groups inherit the nearest live track id within the gate or
// start a new one; tracks unseen for more than track_grace frames expire.
// Detections that fail to lift are rejected up front.
FrameAssociation associate_frame(const std::vector<FrameDetection>& dets,
                                 std::vector<TrackState>* tracks, int frame,
                                 int* next_person_id,
                                 const AssociationOptions& opts);

// Runs associate_frame over a whole scene in temporal order.
AssocFile associate_scene(const SceneFile& scene, const std::vector<Camera>& cameras,
                          const AssociationOptions& opts);

}  // namespace mocap
