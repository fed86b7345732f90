#include "mocap/metrics.hpp"

#include <cmath>

#include "mocap/hungarian.hpp"

namespace mocap {

namespace {

void check_shapes(const std::vector<Points3>& pred, const std::vector<Points3>& gt) {
  if (pred.size() != gt.size())
    raise(ErrorCode::JointSetMismatch, "sequence length mismatch");
  for (std::size_t t = 0; t < pred.size(); ++t)
    if (pred[t].rows() != gt[t].rows())
      raise(ErrorCode::JointSetMismatch, "joint count mismatch");
}

double mean_joint_distance(const Points3& a, const Points3& b) {
  return (a - b).rowwise().norm().mean();
}

}  // namespace

double metric_mpjpe(const std::vector<Points3>& pred, const std::vector<Points3>& gt) {
  check_shapes(pred, gt);
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t)
    sum += mean_joint_distance(pred[t], gt[t]);
  return 1000.0 * sum / std::max<std::size_t>(1, pred.size());
}

double metric_pa_mpjpe(const std::vector<Points3>& pred, const std::vector<Points3>& gt) {
  check_shapes(pred, gt);
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const RigidAlign a = align_rigid(pred[t], gt[t], true);
    Points3 mapped(pred[t].rows(), 3);
    for (Index i = 0; i < pred[t].rows(); ++i)
      mapped.row(i) = (a.s * (a.R * pred[t].row(i).transpose()) + a.t).transpose();
    sum += mean_joint_distance(mapped, gt[t]);
  }
  return 1000.0 * sum / std::max<std::size_t>(1, pred.size());
}

double metric_accel(const std::vector<Points3>& pred, const std::vector<Points3>& gt,
                    double fps) {
  check_shapes(pred, gt);
  if (pred.size() < 3) raise(ErrorCode::TooShort, "acceleration needs >= 3 frames");
  double sum = 0.0;
  Index count = 0;
  for (std::size_t t = 1; t + 1 < pred.size(); ++t) {
    const Points3 dp = pred[t + 1] - 2.0 * pred[t] + pred[t - 1];
    const Points3 dg = gt[t + 1] - 2.0 * gt[t] + gt[t - 1];
    sum += (dp - dg).rowwise().norm().sum();
    count += dp.rows();
  }
  return 1000.0 * fps * fps * sum / std::max<Index>(1, count);
}

const std::vector<Limb>& keypoint_limbs() {
  static const std::vector<Limb> limbs = {
      {kKpPelvis, kKpNeck},      {kKpNeck, kKpHead},
      {kKpLShoulder, kKpLElbow}, {kKpLElbow, kKpLWrist},
      {kKpRShoulder, kKpRElbow}, {kKpRElbow, kKpRWrist},
      {kKpLHip, kKpLKnee},       {kKpLKnee, kKpLAnkle},
      {kKpRHip, kKpRKnee},       {kKpRKnee, kKpRAnkle},
  };
  return limbs;
}

double metric_pcp(const Points3& pred15, const Points3& gt15) {
  if (pred15.rows() != kNumKeypoints || gt15.rows() != kNumKeypoints)
    raise(ErrorCode::JointSetMismatch, "PCP expects the canonical keypoint set");
  int correct = 0;
  const auto& limbs = keypoint_limbs();
  for (const Limb& limb : limbs) {
    const double len = (gt15.row(limb.a) - gt15.row(limb.b)).norm();
    const double da = (pred15.row(limb.a) - gt15.row(limb.a)).norm();
    const double db = (pred15.row(limb.b) - gt15.row(limb.b)).norm();
    if (da <= 0.5 * len && db <= 0.5 * len) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(limbs.size());
}

double metric_pcp(const std::vector<Points3>& pred, const std::vector<Points3>& gt) {
  check_shapes(pred, gt);
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) sum += metric_pcp(pred[t], gt[t]);
  return sum / std::max<std::size_t>(1, pred.size());
}

CameraErrors metric_cameras(const std::vector<Camera>& pred,
                            const std::vector<Camera>& gt) {
  if (pred.size() != gt.size() || gt.size() < 2)
    raise(ErrorCode::ViewCountMismatch, "camera sets must match and have >= 2 views");
  const int V = static_cast<int>(gt.size());

  CameraErrors e;
  for (int v = 0; v < V; ++v) {
    e.focal_pct += 50.0 * (std::abs(pred[v].intr.fx - gt[v].intr.fx) / gt[v].intr.fx +
                           std::abs(pred[v].intr.fy - gt[v].intr.fy) / gt[v].intr.fy);
  }
  e.focal_pct /= V;

  if (V >= 3) {
    Points3 src(V, 3), dst(V, 3);
    for (int v = 0; v < V; ++v) {
      src.row(v) = gt[v].extr.center().transpose();
      dst.row(v) = pred[v].extr.center().transpose();
    }
    e.gt_to_pred = align_rigid(src, dst, true);
  } else {
    // Two views: pin the gauge to view 0, scale from the baseline ratio.
    RigidAlign a;
    a.R = pred[0].extr.R().transpose() * gt[0].extr.R();
    const double base_gt = (gt[1].extr.center() - gt[0].extr.center()).norm();
    const double base_pred = (pred[1].extr.center() - pred[0].extr.center()).norm();
    a.s = base_gt > 1e-12 ? base_pred / base_gt : 1.0;
    a.t = pred[0].extr.center() - a.s * (a.R * gt[0].extr.center());
    e.gt_to_pred = a;
  }

  const RigidAlign& g = e.gt_to_pred;
  for (int v = 0; v < V; ++v) {
    const Vec3 mapped_center =
        (g.R.transpose() * (pred[v].extr.center() - g.t)) / g.s;
    e.position_mm += 1000.0 * (mapped_center - gt[v].extr.center()).norm();
    e.angle_deg += rotation_geodesic_deg(pred[v].extr.R() * g.R, gt[v].extr.R());
  }
  e.position_mm /= V;
  e.angle_deg /= V;
  return e;
}

double metric_reprojection(const SceneFile& scene, const GroundTruth& gt,
                           const std::vector<Camera>& pred_cams) {
  if (pred_cams.size() != gt.cameras.size() ||
      static_cast<int>(pred_cams.size()) != scene.meta.num_views)
    raise(ErrorCode::ViewCountMismatch, "camera/view counts disagree");
  const RigidAlign g = metric_cameras(pred_cams, gt.cameras).gt_to_pred;
  static const KinematicTree tree = KinematicTree::default_tree();

  double sum = 0.0;
  Index count = 0;
  for (std::size_t v = 0; v < pred_cams.size(); ++v) {
    const PosedCamera pc = PosedCamera::from(pred_cams[v].intr, pred_cams[v].extr);
    for (std::size_t t = 0; t < scene.detections[v].size(); ++t) {
      const auto& dets = scene.detections[v][t];
      const auto& ids = gt.det_person[v][t];
      for (std::size_t d = 0; d < dets.size(); ++d) {
        if (ids[d] < 0) continue;
        const Points3 kp15 = select_keypoints(
            tree, gt.actors[static_cast<std::size_t>(ids[d])].joints[t]);
        for (Index k = 0; k < kNumKeypoints; ++k) {
          if (dets[d].conf[k] <= 0.0) continue;
          const Vec3 mapped = g.s * (g.R * kp15.row(k).transpose()) + g.t;
          Vec2 pix;
          if (!project_point(pc, mapped, &pix)) continue;
          sum += (pix - dets[d].joints2d.row(k).transpose()).norm();
          ++count;
        }
      }
    }
  }
  return count > 0 ? sum / count : 0.0;
}

Json EvalReport::to_json() const {
  Json j;
  j["schema"] = "mocap-eval/v1";
  j["pcp_per_actor"] = pcp_per_actor;
  j["mpjpe_mm"] = mpjpe_mm;
  j["pa_mpjpe_mm"] = pa_mpjpe_mm;
  j["accel_mm_s2"] = accel_mm_s2;
  j["reproj_px"] = reproj_px;
  j["focal_err_pct"] = focal_err_pct;
  j["cam_pos_mm"] = cam_pos_mm;
  j["cam_angle_deg"] = cam_angle_deg;
  return j;
}

EvalReport evaluate(const KinematicTree& tree, const SceneFile& scene,
                    const GroundTruth& gt, const std::vector<Camera>& pred_cams,
                    std::vector<PersonMotion> pred_persons) {
  EvalReport rep;
  const CameraErrors ce = metric_cameras(pred_cams, gt.cameras);
  rep.focal_err_pct = ce.focal_pct;
  rep.cam_pos_mm = ce.position_mm;
  rep.cam_angle_deg = ce.angle_deg;
  rep.reproj_px = metric_reprojection(scene, gt, pred_cams);

  // Predictions live in the predicted world frame; pull them back into the
  // ground-truth frame so person metrics are in true metric units.
  const RigidAlign& g = ce.gt_to_pred;
  for (PersonMotion& p : pred_persons) {
    if (p.joints.empty()) p.compute_joints(tree);
    for (Points3& frame : p.joints)
      for (Index i = 0; i < frame.rows(); ++i)
        frame.row(i) =
            ((g.R.transpose() * (frame.row(i).transpose() - Vec3(g.t))) / g.s)
                .transpose();
  }

  const std::size_t na = gt.actors.size();
  const std::size_t np = pred_persons.size();
  rep.pcp_per_actor.assign(na, 0.0);
  if (np == 0 || na == 0) return rep;

  const Index T = static_cast<Index>(gt.actors[0].joints.size());
  MatX cost(np, na);
  for (std::size_t i = 0; i < np; ++i)
    for (std::size_t j = 0; j < na; ++j) {
      double c = 0.0;
      const Index Tp = std::min<Index>(T, static_cast<Index>(pred_persons[i].joints.size()));
      for (Index t = 0; t < Tp; ++t)
        c += mean_joint_distance(pred_persons[i].joints[static_cast<std::size_t>(t)],
                                 gt.actors[j].joints[static_cast<std::size_t>(t)]);
      cost(static_cast<Index>(i), static_cast<Index>(j)) = c / std::max<Index>(1, Tp);
    }
  const std::vector<int> match = hungarian_min_cost(cost);

  double mpjpe = 0.0, pa = 0.0, accel = 0.0;
  int matched = 0;
  for (std::size_t i = 0; i < np; ++i) {
    if (match[i] < 0) continue;
    const PersonMotion& p = pred_persons[i];
    const PersonMotion& a = gt.actors[static_cast<std::size_t>(match[i])];
    if (p.joints.size() != a.joints.size())
      raise(ErrorCode::JointSetMismatch, "prediction frame count mismatch");
    mpjpe += metric_mpjpe(p.joints, a.joints);
    pa += metric_pa_mpjpe(p.joints, a.joints);
    if (p.joints.size() >= 3)
      accel += metric_accel(p.joints, a.joints, gt.meta.fps);

    std::vector<Points3> kp_pred, kp_gt;
    for (std::size_t t = 0; t < p.joints.size(); ++t) {
      kp_pred.push_back(select_keypoints(tree, p.joints[t]));
      kp_gt.push_back(select_keypoints(tree, a.joints[t]));
    }
    rep.pcp_per_actor[static_cast<std::size_t>(match[i])] = metric_pcp(kp_pred, kp_gt);
    ++matched;
  }
  if (matched > 0) {
    rep.mpjpe_mm = mpjpe / matched;
    rep.pa_mpjpe_mm = pa / matched;
    rep.accel_mm_s2 = accel / matched;
  }
  return rep;
}

}  // namespace mocap
