#include "mocap/overlay.hpp"

#include <cstdio>

#include "mocap/metrics.hpp"

namespace mocap {

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void draw_skeleton(std::string* svg, const Points2& pts, const VecX& visible,
                   const std::string& stroke, bool dashed) {
  const std::string dash = dashed ? " stroke-dasharray=\"6,4\"" : "";
  for (const Limb& limb : keypoint_limbs()) {
    if (visible[limb.a] <= 0.0 || visible[limb.b] <= 0.0) continue;
    *svg += "<line x1=\"" + fmt(pts(limb.a, 0)) + "\" y1=\"" + fmt(pts(limb.a, 1)) +
            "\" x2=\"" + fmt(pts(limb.b, 0)) + "\" y2=\"" + fmt(pts(limb.b, 1)) +
            "\" stroke=\"" + stroke + "\" stroke-width=\"2\"" + dash + "/>\n";
  }
  for (Index k = 0; k < pts.rows(); ++k) {
    if (visible[k] <= 0.0) continue;
    *svg += "<circle cx=\"" + fmt(pts(k, 0)) + "\" cy=\"" + fmt(pts(k, 1)) +
            "\" r=\"3\" fill=\"" + stroke + "\"/>\n";
  }
}

}  // namespace

std::string export_overlay(const SceneFile& scene, const std::vector<Camera>& cameras,
                           const std::vector<PersonMotion>& motions, Index frame,
                           Index view, const AssocFile* assoc) {
  if (view < 0 || view >= static_cast<Index>(scene.detections.size()))
    raise(ErrorCode::FrameOutOfRange, "view index out of range");
  if (frame < 0 ||
      frame >= static_cast<Index>(scene.detections[static_cast<std::size_t>(view)].size()))
    raise(ErrorCode::FrameOutOfRange, "frame index out of range");
  if (view >= static_cast<Index>(cameras.size()))
    raise(ErrorCode::ViewCountMismatch, "camera missing for view");

  static const KinematicTree tree = KinematicTree::default_tree();
  const int w = scene.meta.width, h = scene.meta.height;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) +
         " " + std::to_string(h) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" fill=\"#ffffff\" stroke=\"#000000\"/>\n";

  const auto& dets =
      scene.detections[static_cast<std::size_t>(view)][static_cast<std::size_t>(frame)];
  for (std::size_t d = 0; d < dets.size(); ++d) {
    bool rejected = false;
    if (assoc != nullptr) {
      const auto& ids = assoc->person[static_cast<std::size_t>(frame)]
                                     [static_cast<std::size_t>(view)];
      rejected = d < ids.size() && ids[d] < 0;
    }
    draw_skeleton(&svg, dets[d].joints2d, dets[d].conf,
                  rejected ? "#999999" : "#1f77b4", rejected);
  }

  const Camera& cam = cameras[static_cast<std::size_t>(view)];
  const PosedCamera pc = PosedCamera::from(cam.intr, cam.extr);
  for (const PersonMotion& person : motions) {
    Points3 joints;
    if (static_cast<Index>(person.joints.size()) > frame) {
      joints = person.joints[static_cast<std::size_t>(frame)];
    } else if (person.motion.frames() > frame) {
      joints = fk_forward(tree, person.betas, person.motion.frame(frame)).joints;
    } else {
      raise(ErrorCode::FrameOutOfRange, "motion has no such frame");
    }
    const Points3 kp15 = select_keypoints(tree, joints);
    Points2 pts(kNumKeypoints, 2);
    VecX vis = VecX::Zero(kNumKeypoints);
    pts.setZero();
    for (Index k = 0; k < kNumKeypoints; ++k) {
      Vec2 pix;
      if (!project_point(pc, kp15.row(k).transpose(), &pix)) continue;
      pts.row(k) = pix.transpose();
      vis[k] = 1.0;
    }
    draw_skeleton(&svg, pts, vis, "#d62728", false);
    if (vis[kKpHead] > 0.0)
      svg += "<text x=\"" + fmt(pts(kKpHead, 0) + 6.0) + "\" y=\"" +
             fmt(pts(kKpHead, 1) - 6.0) + "\" font-size=\"14\" fill=\"#d62728\">" +
             std::to_string(person.person_id) + "</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace mocap
