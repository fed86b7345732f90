#pragma once

#include <array>
#include <string>
#include <vector>

#include "mocap/json_util.hpp"
#include "mocap/rotation.hpp"
#include "mocap/types.hpp"

namespace mocap {

constexpr int kNumJoints = 24;
constexpr int kNumBones = 23;      // non-root joints, one bone each
constexpr int kPoseDim = 138;      // 23 joint rotations x 6d
constexpr int kShapeDim = 10;
constexpr int kNumKeypoints = 15;  // canonical detection joint set
constexpr int kSamplesPerCapsule = 6;

// Canonical detection keypoint order shared by detections, triangulation and
// metrics.
enum Keypoint : int {
  kKpPelvis = 0,
  kKpLHip, kKpRHip,
  kKpLKnee, kKpRKnee,
  kKpLAnkle, kKpRAnkle,
  kKpNeck, kKpHead,
  kKpLShoulder, kKpRShoulder,
  kKpLElbow, kKpRElbow,
  kKpLWrist, kKpRWrist,
};

const std::vector<std::string>& keypoint_names();

// Articulated skeleton description. Conventions: world z is up (gravity
// points along -z), the rest pose stands along +z facing +y with the left
// side of the body on +x; mirroring reflects across the x = 0 plane.
struct KinematicTree {
  int version = 1;
  std::vector<std::string> joint_names;  // kNumJoints
  std::vector<int> parents;              // parents[0] == -1, parents[i] < i
  Points3 offsets;                       // kNumJoints x 3, bone vectors from parent
  std::vector<int> scale_group;          // per joint, 1..9 for bones (0 for root)
  std::vector<double> capsule_radius;    // per joint, radius of bone capsule (root 0)
  std::vector<int> mirror;               // left/right pairing, self for center joints
  std::vector<int> keypoint_map;         // kNumKeypoints -> joint index
  double shape_sensitivity = 0.1;        // bone scale change per unit beta
  double scale_min = 0.5;
  double scale_max = 2.0;

  static KinematicTree default_tree();

  // Throws ConfigInvalid on any structural violation.
  void validate() const;

  Json to_json() const;
  static KinematicTree from_json(const Json& j);

  // Rest-pose joint positions at given beta, root at origin.
  Points3 rest_joints(const VecX& beta) const;

  // Per-bone scale factors for beta; scale[0] is unused (root).
  VecX bone_scales(const VecX& beta) const;

  // d scale[j] / d beta contributions: returns mask (1 when the clamp is
  // inactive) alongside scales.
  VecX bone_scales(const VecX& beta, VecX* clamp_mask) const;
};

// One body pose: 23 local joint rotations in 6d, plus the global rigid
// transform. body6d lays out joint j (1-based) at [6*(j-1), 6*j).
struct PoseFrame {
  VecX body6d = VecX::Zero(kPoseDim);
  Vec3 global_rot = Vec3::Zero();  // axis-angle
  Vec3 trans = Vec3::Zero();

  static PoseFrame rest();
};

// A motion is per-frame poses at a fixed rate.
struct Motion {
  MatX body6d;      // T x 138
  MatX global_rot;  // T x 3
  MatX trans;       // T x 3
  double fps = 25.0;

  Index frames() const { return body6d.rows(); }
  PoseFrame frame(Index t) const;
  void set_frame(Index t, const PoseFrame& p);
  static Motion zeros(Index t, double fps = 25.0);
};

// Forward-kinematics intermediates cached for the backward pass.
struct FkCache {
  std::array<Mat3, kNumJoints> local_rot;
  std::array<Mat3, kNumJoints> world_rot;
  Points3 joints{kNumJoints, 3};
  VecX bone_scale{kNumJoints};
  VecX clamp_mask{kNumJoints};
};

// Adjoint buffers fed into fk_backward. Callers accumulate into these from
// every consumer of FK outputs (joints, world frames, scales).
struct FkAdjoint {
  Points3 d_joints = Points3::Zero(kNumJoints, 3);
  std::array<Mat3, kNumJoints> d_world_rot{};
  VecX d_scale = VecX::Zero(kNumJoints);

  FkAdjoint() {
    for (auto& m : d_world_rot) m.setZero();
  }
};

struct FkGrads {
  VecX d_body6d = VecX::Zero(kPoseDim);
  Vec3 d_global_rot = Vec3::Zero();
  Vec3 d_trans = Vec3::Zero();
  VecX d_beta = VecX::Zero(kShapeDim);
};

FkCache fk_forward(const KinematicTree& tree, const VecX& beta,
                   const PoseFrame& pose);

// Propagates adjoints on FK outputs back to pose and shape parameters.
// Results are accumulated into *out.
void fk_backward(const KinematicTree& tree, const PoseFrame& pose,
                 const FkCache& cache, const FkAdjoint& adj, FkGrads* out);

// Canonical keypoints extracted from FK joints.
Points3 fk_keypoints(const KinematicTree& tree, const FkCache& cache);

// Capsule surface sample cloud. Fixed layout: bone order, kSamplesPerCapsule
// points each, so clouds from two calls correspond elementwise.
struct CapsuleCloud {
  Points3 points;             // S x 3
  std::vector<int> bone;      // child joint per sample
  std::vector<double> axis_t; // fraction along the bone core segment
};

CapsuleCloud capsule_surface_points(const KinematicTree& tree,
                                    const FkCache& cache);

// Adjoint of capsule_surface_points into FK adjoint buffers.
void capsule_surface_points_backward(const KinematicTree& tree,
                                     const FkCache& cache,
                                     const Points3& d_points, FkAdjoint* adj);

// Head-to-ankle-midpoint distance of a canonical keypoint set.
// Throws MissingKeypoint when a needed row is non-finite.
double person_height(const Points3& keypoints15);

// True when every spine, hip and knee local rotation stays below
// theta_stand radians.
bool detect_standing(const KinematicTree& tree, const PoseFrame& pose,
                     double theta_stand = 0.26);

// Reflects a motion across the sagittal plane, swapping left/right joints.
// Involution: mirror(mirror(m)) == m.
Motion mirror_motion(const KinematicTree& tree, const Motion& m);
PoseFrame mirror_pose(const KinematicTree& tree, const PoseFrame& p);

// Fits local joint rotations to a canonical 15-keypoint cloud (per-bone
// shortest-arc rotations, minimal twist; unobserved joints stay identity).
// Used to bridge detection-space 3d poses into pose space.
PoseFrame pose_from_joints(const KinematicTree& tree, const Points3& kp15);

}  // namespace mocap
