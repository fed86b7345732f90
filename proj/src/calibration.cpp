#include "mocap/calibration.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <utility>

#include "mocap/error.hpp"
#include "mocap/hungarian.hpp"

namespace mocap {

namespace {

// Line coordinates of the head-ankle segment, unit-normalized so the rank
// thresholds below are scale-free in pixels.
// Raw cross products weight every line by its squared pixel length in the
// vanishing point fit, which is inverse-variance: a longer segment has
// proportionally less angular noise. Unit-normalized rows would instead
// weight lines by the inverse square of their distance from the image
// center, letting central lines dominate even though they say nothing
// about how far away the vanishing point lies.
Vec3 line_row(const StandingCandidate& c) { return c.head.cross(c.pelvis); }

Vec3 fix_vp_sign(Vec3 v) {
  if (std::abs(v(2)) > 1e-12) return v(2) > 0.0 ? v : Vec3(-v);
  if (std::abs(v(1)) >= std::abs(v(0))) return v(1) >= 0.0 ? v : Vec3(-v);
  return v(0) >= 0.0 ? v : Vec3(-v);
}

// True when the candidate's own segment points at the vanishing point to
// within gamma. Lines are unoriented, hence the absolute cosine.
bool vp_agrees(const Vec3& v, const StandingCandidate& c, double cos_gamma) {
  const Vec2 dir = (c.head - c.pelvis).head<2>();
  Vec2 to_vp;
  if (std::abs(v(2)) > 1e-12) {
    const Vec2 mid = 0.5 * (c.head + c.pelvis).head<2>();
    to_vp = Vec2(v(0) / v(2), v(1) / v(2)) - mid;
  } else {
    to_vp = v.head<2>();
  }
  const double denom = dir.norm() * to_vp.norm();
  if (denom < 1e-9) return true;  // vanishing point on the segment itself
  return std::abs(dir.dot(to_vp)) / denom > cos_gamma;
}

double median_of(std::vector<double> vals) {
  const size_t mid = vals.size() / 2;
  std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
  return vals[mid];
}

}  // namespace

std::vector<StandingCandidate> standing_candidates(const KinematicTree& tree,
                                                   const SceneFile& scene, int view,
                                                   const CalibrationOptions& opts) {
  if (view < 0 || view >= scene.meta.num_views)
    raise(ErrorCode::FrameOutOfRange, "view index out of range");
  const Vec2 pp(0.5 * scene.meta.width, 0.5 * scene.meta.height);

  std::vector<StandingCandidate> out;
  const auto& frames = scene.detections[view];
  for (int f = 0; f < static_cast<int>(frames.size()); ++f) {
    for (const Detection& det : frames[f]) {
      if (det.conf(kKpHead) <= 0.0 || det.conf(kKpPelvis) <= 0.0 ||
          det.conf(kKpLAnkle) <= 0.0 || det.conf(kKpRAnkle) <= 0.0)
        continue;
      const PoseFrame pose = pose_from_joints(tree, det.joints3d_init);
      if (!detect_standing(tree, pose, opts.theta_stand)) continue;

      const Vec2 head = det.joints2d.row(kKpHead).transpose() - pp;
      const Vec2 pelvis = det.joints2d.row(kKpPelvis).transpose() - pp;
      const Vec2 ankle_l = det.joints2d.row(kKpLAnkle).transpose() - pp;
      const Vec2 ankle_r = det.joints2d.row(kKpRAnkle).transpose() - pp;
      if ((head - 0.5 * (ankle_l + ankle_r)).norm() <= opts.min_line_px) continue;

      StandingCandidate c;
      c.head = Vec3(head(0), head(1), 1.0);
      c.pelvis = Vec3(pelvis(0), pelvis(1), 1.0);
      c.ankle_left = Vec3(ankle_l(0), ankle_l(1), 1.0);
      c.ankle_right = Vec3(ankle_r(0), ankle_r(1), 1.0);
      c.height = person_height(det.joints3d_init);
      c.frame = f;
      c.view = view;
      out.push_back(c);
    }
  }
  return out;
}

Vec3 solve_vertical_vp(const std::vector<StandingCandidate>& cands) {
  if (cands.size() < 2)
    raise(ErrorCode::DegenerateLines, "need at least 2 lines for a vanishing point");
  MatX a(cands.size(), 3);
  for (size_t i = 0; i < cands.size(); ++i) a.row(i) = line_row(cands[i]).transpose();

  Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeFullV);
  const VecX& sv = svd.singularValues();
  if (sv(1) < 1e-10 * sv(0))
    raise(ErrorCode::DegenerateLines, "head-pelvis lines share a pencil");
  return fix_vp_sign(svd.matrixV().col(2));
}

RansacVp ransac_vertical_lines(const std::vector<StandingCandidate>& cands,
                               double gamma_max_deg, int iters, Rng& rng) {
  const int n = static_cast<int>(cands.size());
  if (n < 2)
    raise(ErrorCode::InsufficientCandidates, "ransac needs at least 2 standing lines");
  const double cos_gamma = std::cos(gamma_max_deg * std::numbers::pi / 180.0);

  std::vector<int> best;
  for (int it = 0; it < iters; ++it) {
    const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
    if (j >= i) ++j;
    Vec3 v;
    try {
      v = solve_vertical_vp({cands[i], cands[j]});
    } catch (const Error&) {
      continue;  // coincident pair spans no model
    }
    std::vector<int> inliers;
    for (int k = 0; k < n; ++k)
      if (vp_agrees(v, cands[k], cos_gamma)) inliers.push_back(k);
    if (inliers.size() > best.size()) best = std::move(inliers);
  }
  if (best.size() < 2) raise(ErrorCode::NoConsensus, "no vertical line consensus");

  std::vector<StandingCandidate> support;
  support.reserve(best.size());
  for (int k : best) support.push_back(cands[k]);
  return RansacVp{solve_vertical_vp(support), std::move(best)};
}

DepthSolution solve_depths(const Vec3& v, const std::vector<StandingCandidate>& cands) {
  const int n = static_cast<int>(cands.size());
  if (n < 1) raise(ErrorCode::RankDeficient, "no candidates to solve depths for");

  // Rows per candidate: lambda_head x_head - s x_mid - u x_half_delta = mu h v
  // with s the mean and u the difference of the two ankle depths, plus one
  // shared scale mu tying the unit vanishing point to metric heights. The
  // split term makes the recovered midpoint the image of the 3D ankle
  // midpoint; without it, feet at different distances bias every depth. It
  // is dropped when the ankles land on nearly the same pixel, where a split
  // carries no signal.
  std::vector<int> offset(static_cast<size_t>(n) + 1, 0);
  std::vector<bool> split(static_cast<size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    const Vec3 delta = 0.5 * (cands[i].ankle_left - cands[i].ankle_right);
    split[i] = delta.head<2>().norm() > 2.0;
    offset[i + 1] = offset[i] + (split[i] ? 3 : 2);
  }
  const int cols = offset[static_cast<size_t>(n)] + 1;

  MatX a = MatX::Zero(3 * n, cols);
  for (int i = 0; i < n; ++i) {
    a.block<3, 1>(3 * i, offset[i]) = cands[i].head;
    a.block<3, 1>(3 * i, offset[i] + 1) = -cands[i].ankle_mid();
    if (split[i])
      a.block<3, 1>(3 * i, offset[i] + 2) =
          -0.5 * (cands[i].ankle_left - cands[i].ankle_right);
    a.block<3, 1>(3 * i, cols - 1) = -cands[i].height * v;
  }

  Eigen::BDCSVD<MatX> svd(a, Eigen::ComputeFullV);
  const VecX& sv = svd.singularValues();
  if (sv(cols - 2) < 1e-12 * sv(0))
    raise(ErrorCode::RankDeficient, "depth system has a multidimensional nullspace");

  VecX xi = svd.matrixV().col(cols - 1);
  if (std::abs(xi(cols - 1)) < 1e-12)
    raise(ErrorCode::RankDeficient, "shared height scale vanished");
  xi /= xi(cols - 1);

  DepthSolution sol;
  sol.lambda_head.resize(n);
  sol.lambda_ankle.resize(n);
  sol.scaled_ankle.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    sol.lambda_head(i) = xi(offset[i]);
    sol.lambda_ankle(i) = xi(offset[i] + 1);
    Vec3 scaled = xi(offset[i] + 1) * cands[i].ankle_mid();
    if (split[i])
      scaled += xi(offset[i] + 2) * 0.5 * (cands[i].ankle_left - cands[i].ankle_right);
    sol.scaled_ankle.row(i) = scaled.transpose();
  }
  std::vector<double> ankles(sol.lambda_ankle.data(), sol.lambda_ankle.data() + n);
  if (median_of(std::move(ankles)) < 0.0) {
    sol.lambda_head = -sol.lambda_head;
    sol.lambda_ankle = -sol.lambda_ankle;
    sol.scaled_ankle = -sol.scaled_ankle;
    sol.v_used = -v;
  } else {
    sol.v_used = v;
  }
  return sol;
}

FocalSolution solve_focal(const Vec3& v, const Points3& scaled_ankles) {
  const int n = static_cast<int>(scaled_ankles.rows());
  if (n < 3)
    raise(ErrorCode::InsufficientCandidates, "focal solve needs 3 scaled ankle points");

  // Per pair, ground-plane orthogonality expands to
  //   v1 d1 / fx^2 + v2 d2 / fy^2 + v3 d3 = 0,  d = p_i - p_j.
  std::vector<Vec2> rows;
  std::vector<double> rhs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Vec3 d = (scaled_ankles.row(i) - scaled_ankles.row(j)).transpose();
      if (d.norm() < 1e-9) continue;  // duplicate point, no constraint
      rows.emplace_back(v(0) * d(0), v(1) * d(1));
      rhs.push_back(-v(2) * d(2));
    }
  }
  if (rows.size() < 2)
    raise(ErrorCode::InsufficientCandidates, "too few distinct ankle pairs");

  MatX a(rows.size(), 2);
  VecX b(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    a.row(r) = rows[r].transpose();
    b(r) = rhs[r];
  }

  // A vanishing direction on (or estimated within noise of) an image axis
  // leaves the other axis' focal without signal: v1 = 0 drops fx from every
  // equation. Conditioning alone misses that case, because an estimation
  // error of 1e-3 in v1 still yields a numerically solvable system whose fx
  // is garbage. Roll-free cameras sit exactly on this degeneracy.
  const double axis_ratio =
      std::min(std::abs(v(0)), std::abs(v(1))) /
      std::max({std::abs(v(0)), std::abs(v(1)), 1e-30});
  Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecX& sv = svd.singularValues();
  if (axis_ratio > 0.01 && sv(1) > 1e-6 * sv(0)) {
    const Vec2 p = svd.solve(b);
    if (p(0) > 0.0 && p(1) > 0.0)
      return FocalSolution{1.0 / std::sqrt(p(0)), 1.0 / std::sqrt(p(1)), false};
  }

  // Shared-focal fallback: fx = fy = f collapses each row to one coefficient.
  double num = 0.0, den = 0.0;
  for (size_t r = 0; r < rows.size(); ++r) {
    const double coeff = rows[r](0) + rows[r](1);
    num += coeff * rhs[r];
    den += coeff * coeff;
  }
  if (!(den > 0.0) || !(num > 0.0))
    raise(ErrorCode::NegativeSolution, "shared focal square is non-positive");
  const double f = 1.0 / std::sqrt(num / den);
  return FocalSolution{f, f, true};
}

CameraIntrinsics estimate_intrinsics(const KinematicTree& tree, const SceneFile& scene,
                                     int view, const CalibrationOptions& opts) {
  const std::string tag = "view " + std::to_string(view) + ": ";
  const std::vector<StandingCandidate> cands = standing_candidates(tree, scene, view, opts);
  if (cands.size() < 3)
    raise(ErrorCode::CalibrationFailed,
          tag + "only " + std::to_string(cands.size()) + " standing candidates");

  try {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(view)));
    const RansacVp vp = ransac_vertical_lines(cands, opts.gamma_max_deg,
                                              opts.ransac_iters, rng);
    if (vp.inliers.size() < 3)
      raise(ErrorCode::InsufficientCandidates, "fewer than 3 consensus lines");

    std::vector<StandingCandidate> support;
    support.reserve(vp.inliers.size());
    for (int k : vp.inliers) support.push_back(cands[k]);

    const DepthSolution depths = solve_depths(vp.v, support);
    const FocalSolution focal = solve_focal(depths.v_used, depths.scaled_ankle);

    CameraIntrinsics intr{focal.fx, focal.fy, scene.meta.width, scene.meta.height};
    intr.validate();
    return intr;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CalibrationFailed) throw;
    raise(ErrorCode::CalibrationFailed, tag + e.what());
  }
}

namespace {

// Pelvis position in the camera frame, regressed from the root-relative 3d
// pose and the detected pixels. Empty when too few joints are usable.
std::optional<Vec3> detection_root(const CameraIntrinsics& k, const Detection& det) {
  std::vector<int> rows;
  for (int j = 0; j < kNumKeypoints; ++j)
    if (det.conf(j) > 0.0) rows.push_back(j);
  if (rows.size() < 4) return std::nullopt;

  Points3 p(rows.size(), 3);
  Points2 px(rows.size(), 2);
  for (size_t r = 0; r < rows.size(); ++r) {
    p.row(r) = det.joints3d_init.row(rows[r]);
    px.row(r) = det.joints2d.row(rows[r]);
  }
  try {
    return regress_translation(k, Mat3::Identity(), p, px);
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct PairMatch {
  int frame;
  int det_a;
  int det_b;
  Mat3 rotation;  // camera-b directions into camera-a directions
};

// Chordal mean with one trimming pass: far outliers (ghost matches with an
// arbitrary yaw) are dropped before the final mean.
std::optional<Mat3> trimmed_rotation_mean(const std::vector<Mat3>& rots) {
  try {
    const Mat3 mean = rotation_mean(rots);
    std::vector<Mat3> kept;
    for (const Mat3& r : rots)
      if (rotation_angle(mean.transpose() * r) < 0.5) kept.push_back(r);
    if (kept.empty() || kept.size() == rots.size()) return mean;
    return rotation_mean(kept);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<Camera> estimate_extrinsics_init(const KinematicTree& tree,
                                             const SceneFile& scene,
                                             const std::vector<CameraIntrinsics>& intrinsics,
                                             const CalibrationOptions& opts) {
  (void)tree;
  const int num_views = scene.meta.num_views;
  if (static_cast<int>(intrinsics.size()) != num_views)
    raise(ErrorCode::ViewCountMismatch, "one intrinsics entry per view required");
  if (num_views < 2)
    raise(ErrorCode::InsufficientOverlap, "extrinsics need at least 2 views");

  // Pairwise cross-view matches over all frames, keyed (a, b) with a < b.
  std::map<std::pair<int, int>, std::vector<PairMatch>> matches;
  for (int f = 0; f < scene.meta.num_frames; ++f) {
    for (int a = 0; a < num_views; ++a) {
      for (int b = a + 1; b < num_views; ++b) {
        const auto& da = scene.detections[a][f];
        const auto& db = scene.detections[b][f];
        if (da.empty() || db.empty()) continue;

        MatX cost(da.size(), db.size());
        std::vector<Mat3> rot(da.size() * db.size());
        for (size_t i = 0; i < da.size(); ++i) {
          for (size_t j = 0; j < db.size(); ++j) {
            try {
              const RigidAlign al =
                  align_rigid(db[j].joints3d_init, da[i].joints3d_init, false);
              cost(i, j) = al.rms <= opts.match_gate ? al.rms : kAssignInfeasible;
              rot[i * db.size() + j] = al.R;
            } catch (const Error&) {
              cost(i, j) = kAssignInfeasible;
            }
          }
        }
        const std::vector<int> assign = hungarian_min_cost(cost);
        for (size_t i = 0; i < assign.size(); ++i) {
          if (assign[i] < 0) continue;
          matches[{a, b}].push_back(
              PairMatch{f, static_cast<int>(i), assign[i], rot[i * db.size() + assign[i]]});
        }
      }
    }
  }

  // Relative rotations per connected pair, then a breadth-first chain of
  // absolute rotations anchored at view 0.
  std::map<std::pair<int, int>, Mat3> rel;
  for (const auto& [key, ms] : matches) {
    std::vector<Mat3> rots;
    rots.reserve(ms.size());
    for (const PairMatch& m : ms) rots.push_back(m.rotation);
    if (const auto mean = trimmed_rotation_mean(rots)) rel[key] = *mean;
  }

  std::vector<Mat3> rotation(num_views);
  std::vector<Vec3> translation(num_views, Vec3::Zero());
  std::vector<bool> localized(num_views, false);
  rotation[0] = Mat3::Identity();
  localized[0] = true;

  std::queue<int> frontier;
  frontier.push(0);
  std::vector<int> order{0};
  while (!frontier.empty()) {
    const int p = frontier.front();
    frontier.pop();
    for (int c = 0; c < num_views; ++c) {
      if (localized[c]) continue;
      const auto key = std::minmax(p, c);
      const auto it = rel.find({key.first, key.second});
      if (it == rel.end()) continue;
      // Stored mean maps camera-max directions into camera-min directions.
      rotation[c] = p < c ? Mat3(it->second.transpose() * rotation[p])
                          : Mat3(it->second * rotation[p]);
      localized[c] = true;
      order.push_back(c);
      frontier.push(c);
    }
  }
  for (int v = 0; v < num_views; ++v)
    if (!localized[v])
      raise(ErrorCode::InsufficientOverlap,
            "view " + std::to_string(v) + " shares no matched person with view 0");

  // Translations in breadth-first order: anchor points lifted through every
  // already-localized view, then a per-view pixel regression.
  std::vector<bool> placed(num_views, false);
  placed[0] = true;
  for (size_t oi = 1; oi < order.size(); ++oi) {
    const int c = order[oi];
    std::vector<Vec3> world;
    std::vector<Vec2> pixels;
    for (const auto& [key, ms] : matches) {
      const auto [a, b] = key;
      if (a != c && b != c) continue;
      const int other = a == c ? b : a;
      if (!placed[other]) continue;
      for (const PairMatch& m : ms) {
        const Detection& det_o =
            scene.detections[other][m.frame][other == a ? m.det_a : m.det_b];
        const Detection& det_c =
            scene.detections[c][m.frame][other == a ? m.det_b : m.det_a];
        const auto root = detection_root(intrinsics[other], det_o);
        if (!root) continue;
        for (int j = 0; j < kNumKeypoints; ++j) {
          if (det_o.conf(j) <= 0.0 || det_c.conf(j) <= 0.0) continue;
          const Vec3 in_other = det_o.joints3d_init.row(j).transpose() + *root;
          world.push_back(rotation[other].transpose() * (in_other - translation[other]));
          pixels.push_back(det_c.joints2d.row(j).transpose());
        }
      }
    }
    if (world.size() < 3)
      raise(ErrorCode::InsufficientOverlap,
            "view " + std::to_string(c) + " has no usable translation anchors");
    Points3 w(world.size(), 3);
    Points2 px(world.size(), 2);
    for (size_t r = 0; r < world.size(); ++r) {
      w.row(r) = world[r].transpose();
      px.row(r) = pixels[r].transpose();
    }
    translation[c] = regress_translation(intrinsics[c], rotation[c], w, px);
    placed[c] = true;
  }

  std::vector<Camera> cams(num_views);
  for (int v = 0; v < num_views; ++v) {
    cams[v].view_id = v;
    cams[v].intr = intrinsics[v];
    cams[v].extr.rotation = matrix_to_axis_angle(rotation[v]);
    cams[v].extr.translation = translation[v];
  }
  return cams;
}

std::vector<Camera> calibrate_cameras(const KinematicTree& tree, const SceneFile& scene,
                                      const CalibrationOptions& opts) {
  std::vector<CameraIntrinsics> intr;
  intr.reserve(scene.meta.num_views);
  for (int v = 0; v < scene.meta.num_views; ++v)
    intr.push_back(estimate_intrinsics(tree, scene, v, opts));
  return estimate_extrinsics_init(tree, scene, intr, opts);
}

}  // namespace mocap
