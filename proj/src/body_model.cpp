#include "mocap/body_model.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "mocap/error.hpp"

namespace mocap {

namespace {

const Mat3 kSagittalFlip = Vec3(-1.0, 1.0, 1.0).asDiagonal();

Vec3 safe_dir(const Vec3& v) {
  const double n = v.norm();
  if (n < 1e-10) return Vec3::Zero();
  return v / n;
}

Mat3 shortest_arc(const Vec3& from, const Vec3& to) {
  const Vec3 f = safe_dir(from);
  const Vec3 t = safe_dir(to);
  if (f.isZero() || t.isZero()) return Mat3::Identity();
  return Eigen::Quaterniond::FromTwoVectors(f, t).toRotationMatrix();
}

}  // namespace

const std::vector<std::string>& keypoint_names() {
  static const std::vector<std::string> names = {
      "pelvis",     "left_hip",      "right_hip",   "left_knee",
      "right_knee", "left_ankle",    "right_ankle", "neck",
      "head",       "left_shoulder", "right_shoulder",
      "left_elbow", "right_elbow",   "left_wrist",  "right_wrist"};
  return names;
}

KinematicTree KinematicTree::default_tree() {
  KinematicTree t;
  t.version = 1;
  t.joint_names = {
      "pelvis",        "left_hip",      "right_hip",   "spine1",
      "left_knee",     "right_knee",    "spine2",      "left_ankle",
      "right_ankle",   "spine3",        "left_foot",   "right_foot",
      "neck",          "left_collar",   "right_collar", "head",
      "left_shoulder", "right_shoulder", "left_elbow",  "right_elbow",
      "left_wrist",    "right_wrist",   "left_hand",   "right_hand"};
  t.parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
               9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};

  t.offsets = Points3::Zero(kNumJoints, 3);
  auto set = [&](int j, double x, double y, double z) {
    t.offsets.row(j) = Vec3(x, y, z);
  };
  // Rest pose: standing along +z, facing +y, left side on +x.
  set(1, 0.09, 0.0, -0.06);    // left hip
  set(2, -0.09, 0.0, -0.06);   // right hip
  set(3, 0.0, 0.0, 0.13);      // spine1
  set(4, 0.0, 0.0, -0.40);     // left knee
  set(5, 0.0, 0.0, -0.40);     // right knee
  set(6, 0.0, 0.0, 0.14);      // spine2
  set(7, 0.0, 0.0, -0.40);     // left ankle
  set(8, 0.0, 0.0, -0.40);     // right ankle
  set(9, 0.0, 0.0, 0.15);      // spine3
  set(10, 0.0, 0.12, -0.04);   // left foot
  set(11, 0.0, 0.12, -0.04);   // right foot
  set(12, 0.0, 0.0, 0.19);     // neck
  set(13, 0.06, 0.0, 0.10);    // left collar
  set(14, -0.06, 0.0, 0.10);   // right collar
  set(15, 0.0, 0.0, 0.24);     // head
  set(16, 0.10, 0.0, 0.02);    // left shoulder
  set(17, -0.10, 0.0, 0.02);   // right shoulder
  set(18, 0.27, 0.0, 0.0);     // left elbow
  set(19, -0.27, 0.0, 0.0);    // right elbow
  set(20, 0.25, 0.0, 0.0);     // left wrist
  set(21, -0.25, 0.0, 0.0);    // right wrist
  set(22, 0.08, 0.0, 0.0);     // left hand
  set(23, -0.08, 0.0, 0.0);    // right hand

  // Shape groups: 1 torso, 2 head/neck, 3 upper arms, 4 forearms, 5 hands,
  // 6 thighs, 7 shins, 8 feet, 9 shoulder girdle.
  t.scale_group = {0, 1, 1, 1, 6, 6, 1, 7, 7, 1, 8, 8,
                   2, 1, 1, 2, 9, 9, 3, 3, 4, 4, 5, 5};

  t.capsule_radius = {0.0,   0.08,  0.08,  0.10,  0.07,  0.07,  0.11,  0.055,
                      0.055, 0.11,  0.035, 0.035, 0.05,  0.06,  0.06,  0.09,
                      0.05,  0.05,  0.045, 0.045, 0.04,  0.04,  0.035, 0.035};

  t.mirror = {0, 2, 1, 3, 5, 4, 6, 8, 7, 9, 11, 10,
              12, 14, 13, 15, 17, 16, 19, 18, 21, 20, 23, 22};

  t.keypoint_map = {0, 1, 2, 4, 5, 7, 8, 12, 15, 16, 17, 18, 19, 20, 21};
  return t;
}

void KinematicTree::validate() const {
  auto fail = [](const std::string& m) { raise(ErrorCode::ConfigInvalid, m); };
  if (joint_names.size() != kNumJoints) fail("joint_names must have 24 entries");
  if (parents.size() != kNumJoints) fail("parents must have 24 entries");
  if (offsets.rows() != kNumJoints) fail("offsets must have 24 rows");
  if (scale_group.size() != kNumJoints) fail("scale_group must have 24 entries");
  if (capsule_radius.size() != kNumJoints) fail("capsule_radius must have 24 entries");
  if (mirror.size() != kNumJoints) fail("mirror must have 24 entries");
  if (keypoint_map.size() != kNumKeypoints) fail("keypoint_map must have 15 entries");
  if (parents[0] != -1) fail("joint 0 must be the root");
  for (int i = 1; i < kNumJoints; ++i) {
    if (parents[i] < 0 || parents[i] >= i) fail("parents must be topological");
    if (offsets.row(i).norm() < 1e-9) fail("bone offsets must be non-zero");
    if (capsule_radius[i] <= 0.0) fail("capsule radii must be positive");
    if (scale_group[i] < 1 || scale_group[i] >= kShapeDim)
      fail("scale groups must lie in [1, 9]");
  }
  for (int i = 0; i < kNumJoints; ++i) {
    const int m = mirror[i];
    if (m < 0 || m >= kNumJoints || mirror[m] != i) fail("mirror must be an involution");
    if (i > 0) {
      if (m > 0 && parents[m] != mirror[parents[i]]) fail("mirror must respect topology");
      if (scale_group[m] != scale_group[i]) fail("mirrored bones must share scale groups");
      if (std::abs(capsule_radius[m] - capsule_radius[i]) > 1e-12)
        fail("mirrored bones must share capsule radii");
      const Vec3 want = kSagittalFlip * offsets.row(i).transpose();
      if ((offsets.row(m).transpose() - want).norm() > 1e-9)
        fail("offsets of mirrored joints must reflect across x = 0");
    }
  }
  for (int k = 0; k < kNumKeypoints; ++k) {
    if (keypoint_map[k] < 0 || keypoint_map[k] >= kNumJoints)
      fail("keypoint_map entries must be joint indices");
  }
  if (shape_sensitivity <= 0.0) fail("shape_sensitivity must be positive");
  if (!(scale_min > 0.0 && scale_min < 1.0 && scale_max > 1.0))
    fail("scale clamp must bracket 1");
}

Json KinematicTree::to_json() const {
  Json j;
  j["schema"] = "mocap-body/v1";
  j["version"] = version;
  j["joint_names"] = joint_names;
  j["parents"] = parents;
  j["offsets"] = mocap::to_json(MatX(offsets));
  j["scale_group"] = scale_group;
  j["capsule_radius"] = capsule_radius;
  j["mirror"] = mirror;
  j["keypoint_map"] = keypoint_map;
  j["shape_sensitivity"] = shape_sensitivity;
  j["scale_min"] = scale_min;
  j["scale_max"] = scale_max;
  return j;
}

KinematicTree KinematicTree::from_json(const Json& j) {
  require_schema(j, "mocap-body/v1", "body model");
  KinematicTree t;
  t.version = require_field(j, "version", "body model").get<int>();
  t.joint_names = require_field(j, "joint_names", "body model").get<std::vector<std::string>>();
  t.parents = require_field(j, "parents", "body model").get<std::vector<int>>();
  t.offsets = matx_from_json(require_field(j, "offsets", "body model"), 3);
  t.scale_group = require_field(j, "scale_group", "body model").get<std::vector<int>>();
  t.capsule_radius = require_field(j, "capsule_radius", "body model").get<std::vector<double>>();
  t.mirror = require_field(j, "mirror", "body model").get<std::vector<int>>();
  t.keypoint_map = require_field(j, "keypoint_map", "body model").get<std::vector<int>>();
  t.shape_sensitivity = require_field(j, "shape_sensitivity", "body model").get<double>();
  t.scale_min = require_field(j, "scale_min", "body model").get<double>();
  t.scale_max = require_field(j, "scale_max", "body model").get<double>();
  t.validate();
  return t;
}

VecX KinematicTree::bone_scales(const VecX& beta, VecX* clamp_mask) const {
  if (beta.size() != kShapeDim)
    raise(ErrorCode::JointSetMismatch, "beta must have 10 components");
  VecX s = VecX::Ones(kNumJoints);
  if (clamp_mask) *clamp_mask = VecX::Zero(kNumJoints);
  for (int i = 1; i < kNumJoints; ++i) {
    const double raw = 1.0 + shape_sensitivity * (beta[0] + beta[scale_group[i]]);
    const bool inside = raw > scale_min && raw < scale_max;
    s[i] = std::clamp(raw, scale_min, scale_max);
    if (clamp_mask && inside) (*clamp_mask)[i] = 1.0;
  }
  return s;
}

VecX KinematicTree::bone_scales(const VecX& beta) const {
  return bone_scales(beta, nullptr);
}

Points3 KinematicTree::rest_joints(const VecX& beta) const {
  const VecX s = bone_scales(beta);
  Points3 p = Points3::Zero(kNumJoints, 3);
  for (int i = 1; i < kNumJoints; ++i)
    p.row(i) = p.row(parents[i]) + s[i] * offsets.row(i);
  return p;
}

PoseFrame PoseFrame::rest() {
  PoseFrame p;
  for (int i = 0; i < kNumBones; ++i) {
    p.body6d[6 * i + 0] = 1.0;  // identity: columns (1,0,0) and (0,1,0)
    p.body6d[6 * i + 4] = 1.0;
  }
  return p;
}

Motion Motion::zeros(Index t, double fps) {
  Motion m;
  const PoseFrame rest = PoseFrame::rest();
  m.body6d = rest.body6d.transpose().replicate(t, 1);
  m.global_rot = MatX::Zero(t, 3);
  m.trans = MatX::Zero(t, 3);
  m.fps = fps;
  return m;
}

PoseFrame Motion::frame(Index t) const {
  PoseFrame p;
  p.body6d = body6d.row(t).transpose();
  p.global_rot = global_rot.row(t).transpose();
  p.trans = trans.row(t).transpose();
  return p;
}

void Motion::set_frame(Index t, const PoseFrame& p) {
  body6d.row(t) = p.body6d.transpose();
  global_rot.row(t) = p.global_rot.transpose();
  trans.row(t) = p.trans.transpose();
}

FkCache fk_forward(const KinematicTree& tree, const VecX& beta,
                   const PoseFrame& pose) {
  if (pose.body6d.size() != kPoseDim)
    raise(ErrorCode::JointSetMismatch, "body6d must have 138 components");
  FkCache c;
  c.bone_scale = tree.bone_scales(beta, &c.clamp_mask);
  c.local_rot[0] = axis_angle_to_matrix(pose.global_rot);
  c.world_rot[0] = c.local_rot[0];
  c.joints.row(0) = pose.trans;
  for (int i = 1; i < kNumJoints; ++i) {
    const int par = tree.parents[i];
    c.local_rot[i] = rot6d_to_matrix(pose.body6d.segment<6>(6 * (i - 1)));
    c.world_rot[i] = c.world_rot[par] * c.local_rot[i];
    c.joints.row(i) = c.joints.row(par) +
                      (c.world_rot[par] * (c.bone_scale[i] * tree.offsets.row(i).transpose())).transpose();
  }
  return c;
}

void fk_backward(const KinematicTree& tree, const PoseFrame& pose,
                 const FkCache& cache, const FkAdjoint& adj, FkGrads* out) {
  Points3 gp = adj.d_joints;
  std::array<Mat3, kNumJoints> gw = adj.d_world_rot;
  VecX gs = adj.d_scale;

  for (int i = kNumJoints - 1; i >= 1; --i) {
    const int par = tree.parents[i];
    const Vec3 gpi = gp.row(i).transpose();
    const Vec3 o = tree.offsets.row(i).transpose();
    // p_i = p_par + W_par * (s_i * o_i)
    gw[par].noalias() += gpi * (cache.bone_scale[i] * o).transpose();
    gp.row(par) += gp.row(i);
    gs[i] += gpi.dot(cache.world_rot[par] * o);
    // W_i = W_par * L_i
    gw[par].noalias() += gw[i] * cache.local_rot[i].transpose();
    const Mat3 gl = cache.world_rot[par].transpose() * gw[i];
    out->d_body6d.segment<6>(6 * (i - 1)) +=
        rot6d_to_matrix_backward(pose.body6d.segment<6>(6 * (i - 1)), gl);
  }
  out->d_trans += gp.row(0).transpose();
  out->d_global_rot += axis_angle_to_matrix_backward(pose.global_rot, gw[0]);
  for (int i = 1; i < kNumJoints; ++i) {
    if (cache.clamp_mask[i] == 0.0) continue;
    const double g = tree.shape_sensitivity * gs[i];
    out->d_beta[0] += g;
    out->d_beta[tree.scale_group[i]] += g;
  }
}

Points3 fk_keypoints(const KinematicTree& tree, const FkCache& cache) {
  Points3 kp(kNumKeypoints, 3);
  for (int k = 0; k < kNumKeypoints; ++k)
    kp.row(k) = cache.joints.row(tree.keypoint_map[k]);
  return kp;
}

namespace {

// Fixed radial frame per bone, derived from the template offset direction.
void bone_radial_frame(const KinematicTree& tree, int j, Vec3* e1, Vec3* e2) {
  const Vec3 axis = tree.offsets.row(j).transpose().normalized();
  const Vec3 ref = std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  *e1 = axis.cross(ref).normalized();
  *e2 = axis.cross(*e1).normalized();
}

constexpr double kAxisFrac[2] = {0.25, 0.75};

}  // namespace

CapsuleCloud capsule_surface_points(const KinematicTree& tree,
                                    const FkCache& cache) {
  CapsuleCloud cloud;
  cloud.points.resize(kNumBones * kSamplesPerCapsule, 3);
  cloud.bone.reserve(cloud.points.rows());
  cloud.axis_t.reserve(cloud.points.rows());
  Index row = 0;
  for (int j = 1; j < kNumJoints; ++j) {
    const int par = tree.parents[j];
    Vec3 e1, e2;
    bone_radial_frame(tree, j, &e1, &e2);
    const Vec3 o = tree.offsets.row(j).transpose();
    const double r = tree.capsule_radius[j];
    for (int a = 0; a < 2; ++a) {
      for (int p = 0; p < 3; ++p) {
        const double phi = 2.0 * EIGEN_PI * p / 3.0;
        const Vec3 local = kAxisFrac[a] * cache.bone_scale[j] * o +
                           r * (std::cos(phi) * e1 + std::sin(phi) * e2);
        cloud.points.row(row) =
            cache.joints.row(par) + (cache.world_rot[par] * local).transpose();
        cloud.bone.push_back(j);
        cloud.axis_t.push_back(kAxisFrac[a]);
        ++row;
      }
    }
  }
  return cloud;
}

void capsule_surface_points_backward(const KinematicTree& tree,
                                     const FkCache& cache,
                                     const Points3& d_points, FkAdjoint* adj) {
  Index row = 0;
  for (int j = 1; j < kNumJoints; ++j) {
    const int par = tree.parents[j];
    Vec3 e1, e2;
    bone_radial_frame(tree, j, &e1, &e2);
    const Vec3 o = tree.offsets.row(j).transpose();
    const double r = tree.capsule_radius[j];
    const Vec3 wo = cache.world_rot[par] * o;
    for (int a = 0; a < 2; ++a) {
      for (int p = 0; p < 3; ++p, ++row) {
        const Vec3 g = d_points.row(row).transpose();
        if (g.isZero()) continue;
        const double phi = 2.0 * EIGEN_PI * p / 3.0;
        const Vec3 local = kAxisFrac[a] * cache.bone_scale[j] * o +
                           r * (std::cos(phi) * e1 + std::sin(phi) * e2);
        adj->d_joints.row(par) += g.transpose();
        adj->d_world_rot[par].noalias() += g * local.transpose();
        adj->d_scale[j] += kAxisFrac[a] * g.dot(wo);
      }
    }
  }
}

double person_height(const Points3& kp15) {
  if (kp15.rows() != kNumKeypoints)
    raise(ErrorCode::JointSetMismatch, "expected 15 canonical keypoints");
  const Vec3 head = kp15.row(kKpHead).transpose();
  const Vec3 la = kp15.row(kKpLAnkle).transpose();
  const Vec3 ra = kp15.row(kKpRAnkle).transpose();
  if (!head.allFinite() || !la.allFinite() || !ra.allFinite())
    raise(ErrorCode::MissingKeypoint, "head or ankle keypoint is not finite");
  return (head - 0.5 * (la + ra)).norm();
}

bool detect_standing(const KinematicTree& tree, const PoseFrame& pose,
                     double theta_stand) {
  (void)tree;
  // Hips, knees and the spine chain; arm and neck rotations do not bend the
  // head-ankle line.
  static constexpr int kChecked[] = {1, 2, 4, 5, 3, 6, 9};
  for (const int j : kChecked) {
    const Mat3 R = rot6d_to_matrix(pose.body6d.segment<6>(6 * (j - 1)));
    if (rotation_angle(R) >= theta_stand) return false;
  }
  return true;
}

PoseFrame mirror_pose(const KinematicTree& tree, const PoseFrame& p) {
  const Mat3& S = kSagittalFlip;
  PoseFrame out;
  for (int i = 1; i < kNumJoints; ++i) {
    const int m = tree.mirror[i];
    const Mat3 R = rot6d_to_matrix(p.body6d.segment<6>(6 * (m - 1)));
    out.body6d.segment<6>(6 * (i - 1)) = matrix_to_rot6d(S * R * S);
  }
  out.global_rot = matrix_to_axis_angle(S * axis_angle_to_matrix(p.global_rot) * S);
  out.trans = S * p.trans;
  return out;
}

Motion mirror_motion(const KinematicTree& tree, const Motion& m) {
  Motion out = m;
  for (Index t = 0; t < m.frames(); ++t)
    out.set_frame(t, mirror_pose(tree, m.frame(t)));
  return out;
}

PoseFrame pose_from_joints(const KinematicTree& tree, const Points3& kp) {
  if (kp.rows() != kNumKeypoints)
    raise(ErrorCode::JointSetMismatch, "expected 15 canonical keypoints");
  if (!kp.allFinite())
    raise(ErrorCode::NonFiniteInput, "keypoints contain non-finite values");

  const Vec3 pelvis = kp.row(kKpPelvis).transpose();
  const Vec3 spine_chain = (tree.offsets.row(3) + tree.offsets.row(6) +
                            tree.offsets.row(9) + tree.offsets.row(12))
                               .transpose();

  // Pelvis orientation from hip directions plus the pelvis-neck axis.
  Mat3 M = Mat3::Zero();
  auto accumulate = [&M](double w, const Vec3& temp_dir, const Vec3& obs_dir) {
    const Vec3 t = safe_dir(temp_dir);
    const Vec3 o = safe_dir(obs_dir);
    if (t.isZero() || o.isZero()) return;
    M.noalias() += w * o * t.transpose();
  };
  accumulate(1.0, tree.offsets.row(1).transpose(), kp.row(kKpLHip).transpose() - pelvis);
  accumulate(1.0, tree.offsets.row(2).transpose(), kp.row(kKpRHip).transpose() - pelvis);
  accumulate(2.0, spine_chain, kp.row(kKpNeck).transpose() - pelvis);
  const Mat3 W0 = project_to_rotation(M);

  PoseFrame out = PoseFrame::rest();
  auto set_local = [&out](int j, const Mat3& R) {
    out.body6d.segment<6>(6 * (j - 1)) = matrix_to_rot6d(R);
  };

  // Spine bend measured at spine1; spine2/spine3 stay identity.
  const Vec3 spine1_pos = pelvis + W0 * tree.offsets.row(3).transpose();
  const Vec3 chain_rest = (tree.offsets.row(6) + tree.offsets.row(9) +
                           tree.offsets.row(12)).transpose();
  const Mat3 Rs1 = shortest_arc(
      chain_rest, W0.transpose() * (kp.row(kKpNeck).transpose() - spine1_pos));
  set_local(3, Rs1);
  const Mat3 Wtorso = W0 * Rs1;  // spine2, spine3 and collars ride along

  const Mat3 Rneck = shortest_arc(
      tree.offsets.row(15).transpose(),
      Wtorso.transpose() * (kp.row(kKpHead).transpose() - kp.row(kKpNeck).transpose()));
  set_local(12, Rneck);

  const struct {
    int hip_j, knee_j;
    Keypoint hip, knee, ankle;
  } legs[2] = {{1, 4, kKpLHip, kKpLKnee, kKpLAnkle},
               {2, 5, kKpRHip, kKpRKnee, kKpRAnkle}};
  for (const auto& leg : legs) {
    const Mat3 Rh = shortest_arc(
        tree.offsets.row(leg.knee_j).transpose(),
        W0.transpose() * (kp.row(leg.knee).transpose() - kp.row(leg.hip).transpose()));
    set_local(leg.hip_j, Rh);
    const Mat3 Wh = W0 * Rh;
    const int ankle_j = leg.knee_j + 3;  // knee joints 4/5 parent ankles 7/8
    const Mat3 Rk = shortest_arc(
        tree.offsets.row(ankle_j).transpose(),
        Wh.transpose() * (kp.row(leg.ankle).transpose() - kp.row(leg.knee).transpose()));
    set_local(leg.knee_j, Rk);
  }

  const struct {
    int shoulder_j, elbow_j;
    Keypoint shoulder, elbow, wrist;
  } arms[2] = {{16, 18, kKpLShoulder, kKpLElbow, kKpLWrist},
               {17, 19, kKpRShoulder, kKpRElbow, kKpRWrist}};
  for (const auto& arm : arms) {
    const Mat3 Rsh = shortest_arc(
        tree.offsets.row(arm.elbow_j).transpose(),
        Wtorso.transpose() *
            (kp.row(arm.elbow).transpose() - kp.row(arm.shoulder).transpose()));
    set_local(arm.shoulder_j, Rsh);
    const Mat3 Wsh = Wtorso * Rsh;
    const int wrist_j = arm.elbow_j + 2;
    const Mat3 Rel = shortest_arc(
        tree.offsets.row(wrist_j).transpose(),
        Wsh.transpose() * (kp.row(arm.wrist).transpose() - kp.row(arm.elbow).transpose()));
    set_local(arm.elbow_j, Rel);
  }

  out.global_rot = matrix_to_axis_angle(W0);
  out.trans = pelvis;
  return out;
}

}  // namespace mocap
