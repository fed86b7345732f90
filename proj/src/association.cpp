#include "mocap/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "mocap/body_model.hpp"
#include "mocap/error.hpp"
#include "mocap/hungarian.hpp"
#include "mocap/parallel.hpp"

namespace mocap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mean_joint_distance(const Points3& a, const Points3& b) {
  if (a.rows() != b.rows())
    raise(ErrorCode::JointSetMismatch, "pose joint counts differ");
  return (a - b).rowwise().norm().mean();
}

// Projection onto {w : 0 <= w_k <= 1, sum w <= 1}. When the clamped vector
// already fits the budget it is the answer; otherwise the optimum is
// clamp(v - tau, 0, 1) for the unique tau making the sum exactly one.
VecX project_capped_simplex(const VecX& v) {
  VecX w = v.cwiseMax(0.0).cwiseMin(1.0);
  if (w.sum() <= 1.0) return w;
  double lo = 0.0, hi = v.maxCoeff();
  for (int it = 0; it < 80; ++it) {
    const double tau = 0.5 * (lo + hi);
    const double s = (v.array() - tau).cwiseMax(0.0).cwiseMin(1.0).sum();
    (s > 1.0 ? lo : hi) = tau;
  }
  const double tau = 0.5 * (lo + hi);
  return (v.array() - tau).cwiseMax(0.0).cwiseMin(1.0).matrix();
}

struct ViewIndex {
  std::vector<std::vector<int>> members;  // detection indices per view
  int views = 0;
};

ViewIndex index_views(const std::vector<int>& view_of) {
  ViewIndex vi;
  for (int v : view_of) vi.views = std::max(vi.views, v + 1);
  vi.members.resize(static_cast<size_t>(vi.views));
  for (size_t i = 0; i < view_of.size(); ++i)
    vi.members[static_cast<size_t>(view_of[i])].push_back(static_cast<int>(i));
  return vi;
}

// Symmetrize and pin same-view entries to the identity pattern.
void project_pinned(MatX* m, const std::vector<int>& view_of) {
  *m = 0.5 * (*m + m->transpose()).eval();
  const int d = static_cast<int>(view_of.size());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (view_of[i] == view_of[j]) (*m)(i, j) = i == j ? 1.0 : 0.0;
}

void project_block_rows(MatX* m, const ViewIndex& vi, const std::vector<int>& view_of) {
  const int d = static_cast<int>(view_of.size());
  for (int i = 0; i < d; ++i)
    for (int w = 0; w < vi.views; ++w) {
      if (w == view_of[i]) continue;
      const auto& cols = vi.members[static_cast<size_t>(w)];
      if (cols.empty()) continue;
      VecX sub(cols.size());
      for (size_t k = 0; k < cols.size(); ++k) sub(k) = (*m)(i, cols[k]);
      sub = project_capped_simplex(sub);
      for (size_t k = 0; k < cols.size(); ++k) (*m)(i, cols[k]) = sub(k);
    }
}

// Dykstra's alternating projections onto the intersection of the pinned
// symmetric set and the per-block row/column capped simplices. The
// intersection holds the same-view identity pattern, so it is nonempty. The
// final cycle ends on the pinned set, leaving symmetry and the identity
// blocks exact and the box constraints within the stopping tolerance.
MatX project_box_affine(const MatX& z, const ViewIndex& vi,
                        const std::vector<int>& view_of) {
  MatX m = z;
  MatX p1 = MatX::Zero(z.rows(), z.cols());
  MatX p2 = p1, p3 = p1;
  for (int cycle = 0; cycle < 300; ++cycle) {
    const MatX before = m;

    MatX t = m + p2;
    project_block_rows(&t, vi, view_of);
    p2 = m + p2 - t;
    m = t;

    t = (m + p3).transpose();
    project_block_rows(&t, vi, view_of);
    t.transposeInPlace();
    p3 = m + p3 - t;
    m = t;

    t = m + p1;
    project_pinned(&t, view_of);
    p1 = m + p1 - t;
    m = t;

    if ((m - before).cwiseAbs().maxCoeff() < 1e-13) break;
  }
  return m;
}

MatX project_psd(const MatX& z) {
  const MatX sym = 0.5 * (z + z.transpose());
  Eigen::SelfAdjointEigenSolver<MatX> eig(sym);
  const VecX lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

double min_eigenvalue(const MatX& m) {
  Eigen::SelfAdjointEigenSolver<MatX> eig(0.5 * (m + m.transpose()),
                                          Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

// Total affinity collected by a grouping, counting each cross-view pair once.
double partition_score(const MatX& a, const std::vector<std::vector<int>>& groups) {
  double s = 0.0;
  for (const auto& g : groups)
    for (size_t x = 0; x < g.size(); ++x)
      for (size_t y = x + 1; y < g.size(); ++y) s += a(g[x], g[y]);
  return s;
}

}  // namespace

double temporal_cost(const Points3& track_pose, const Points3& det_world) {
  return mean_joint_distance(track_pose, det_world);
}

double spatial_cost(const Points3& a, const Points3& b) {
  return mean_joint_distance(a, b);
}

double geometric_cost(const FrameDetection& a, const FrameDetection& b,
                      double min_conf) {
  double sum = 0.0;
  int used = 0;
  for (int k = 0; k < kNumKeypoints; ++k) {
    if (a.conf(k) < min_conf || b.conf(k) < min_conf) continue;
    sum += std::abs(ray_coplanarity(a.rays[static_cast<size_t>(k)],
                                    b.rays[static_cast<size_t>(k)]));
    ++used;
  }
  return used == 0 ? kInf : sum / used;
}

FrameDetection lift_detection(const Camera& cam, const Detection& det, int view,
                              int det_index) {
  std::vector<int> keep;
  for (int k = 0; k < kNumKeypoints; ++k)
    if (det.conf(k) > 0.0) keep.push_back(k);
  if (keep.size() < 3)
    raise(ErrorCode::DegenerateConfiguration,
          "too few confident keypoints to place the detection");

  Points3 rel(keep.size(), 3);
  Points2 px(keep.size(), 2);
  for (size_t k = 0; k < keep.size(); ++k) {
    rel.row(k) = det.joints3d_init.row(keep[k]);
    px.row(k) = det.joints2d.row(keep[k]);
  }
  // joints3d_init already carries the camera-frame orientation, so the
  // placement reduces to a translation fit in that frame.
  const Vec3 t_cam = regress_translation(cam.intr, Mat3::Identity(), rel, px);

  FrameDetection fd;
  fd.view = view;
  fd.det_index = det_index;
  fd.conf = det.conf;
  fd.world.resize(kNumKeypoints, 3);
  const Mat3 r = cam.extr.R();
  fd.rays.resize(kNumKeypoints);
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Vec3 cam_pt = det.joints3d_init.row(k).transpose() + t_cam;
    fd.world.row(k) = (r.transpose() * (cam_pt - cam.extr.translation)).transpose();
    fd.rays[static_cast<size_t>(k)] =
        pixel_ray(cam.intr, cam.extr, det.joints2d.row(k).transpose());
  }
  return fd;
}

CostMatrices build_costs(const std::vector<FrameDetection>& dets,
                         const std::vector<TrackState>& tracks,
                         const AssociationOptions& opts) {
  const int d = static_cast<int>(dets.size());
  CostMatrices c;
  c.view_of.resize(dets.size());
  for (int i = 0; i < d; ++i) c.view_of[static_cast<size_t>(i)] = dets[static_cast<size_t>(i)].view;
  c.pose = MatX::Constant(d, d, std::numeric_limits<double>::quiet_NaN());
  c.geo = c.pose;

  VecX track_term = VecX::Zero(d);
  if (!tracks.empty()) {
    for (int i = 0; i < d; ++i) {
      double best = kInf;
      for (const auto& t : tracks)
        best = std::min(best, temporal_cost(t.pose, dets[static_cast<size_t>(i)].world));
      track_term(i) = best;
    }
  }

  parallel_for(d, [&](Index i) {
    for (int j = 0; j < d; ++j) {
      if (j == i || dets[static_cast<size_t>(i)].view == dets[static_cast<size_t>(j)].view)
        continue;
      c.pose(i, j) = track_term(i) + track_term(j) +
                     spatial_cost(dets[static_cast<size_t>(i)].world,
                                  dets[static_cast<size_t>(j)].world);
      c.geo(i, j) = geometric_cost(dets[static_cast<size_t>(i)],
                                   dets[static_cast<size_t>(j)], opts.min_joint_conf);
    }
  });
  return c;
}

MatX build_affinity(const MatX& cost, double sigma) {
  return cost.unaryExpr([sigma](double c) {
    return std::isfinite(c) ? std::exp(-c / sigma) : 0.0;
  });
}

MatchMatrix admm_match(const MatX& geo_affinity, const MatX& pose_affinity,
                       const std::vector<int>& view_of,
                       const AssociationOptions& opts) {
  MatchMatrix out;
  out.view_of = view_of;
  const int d = static_cast<int>(view_of.size());
  if (d == 0) {
    out.m.resize(0, 0);
    return out;
  }
  const ViewIndex vi = index_views(view_of);
  const MatX a = opts.c_g * geo_affinity + opts.c_p * pose_affinity;
  auto objective = [&](const MatX& m) {
    return -(opts.c_g * geo_affinity.cwiseProduct(m).sum() +
             opts.c_p * pose_affinity.cwiseProduct(m).sum());
  };

  // Consensus splitting of max <A, x> over the PSD cone intersected with the
  // box/affine matching constraints: two constraint copies, scaled duals.
  MatX x = MatX::Zero(d, d);
  project_pinned(&x, view_of);
  MatX y1 = x, y2 = x;
  MatX u1 = MatX::Zero(d, d), u2 = u1;
  double rho = opts.rho;
  MatX best;
  double best_score = -kInf;
  out.converged = false;

  for (int it = 0; it < opts.max_iters; ++it) {
    x = 0.5 * (y1 + y2 - u1 - u2) + a / (2.0 * rho);
    const MatX y1_prev = y1, y2_prev = y2;
    y1 = project_psd(x + u1);
    y2 = project_box_affine(x + u2, vi, view_of);
    u1 += x - y1;
    u2 += x - y2;
    out.iters = it + 1;

    // y2 meets the box constraints by construction; admit it as the reported
    // iterate once it is also spectrally feasible and improves the score.
    if (min_eigenvalue(y2) >= -1e-6) {
      const double score = a.cwiseProduct(y2).sum();
      if (score > best_score) {
        best_score = score;
        best = y2;
      }
    }
    out.objective_trace.push_back(best_score == -kInf ? 0.0 : objective(best));

    const double r = std::sqrt((x - y1).squaredNorm() + (x - y2).squaredNorm()) / d;
    const double s =
        rho * std::sqrt((y1 - y1_prev).squaredNorm() + (y2 - y2_prev).squaredNorm()) / d;
    if (r < opts.tol && s < opts.tol) {
      out.converged = true;
      break;
    }
    if (r > 10.0 * s) {
      rho *= 2.0;
      u1 *= 0.5;
      u2 *= 0.5;
    } else if (s > 10.0 * r) {
      rho *= 0.5;
      u1 *= 2.0;
      u2 *= 2.0;
    }
  }

  if (best_score == -kInf) best = y2;

  // Polish until every invariant holds with margin: alternate the exact
  // feasibility projections, which only matters for the fallback iterate.
  for (int it = 0; it < 200; ++it) {
    if (min_eigenvalue(best) >= -1e-8) break;
    best = project_psd(best);
    best = project_box_affine(best, vi, view_of);
  }
  out.m = best;
  return out;
}

FrameAssociation extract_identities(const MatchMatrix& match,
                                    const AssociationOptions& opts) {
  const int d = static_cast<int>(match.view_of.size());
  FrameAssociation fa;
  if (d == 0) return fa;
  const ViewIndex vi = index_views(match.view_of);

  std::vector<char> taken(static_cast<size_t>(d), 0);
  // The seed detection's group takes its strongest unassigned partner above
  // the binarization threshold from every other view.
  auto group_of = [&](int seed) {
    std::vector<int> g = {seed};
    for (int w = 0; w < vi.views; ++w) {
      if (w == match.view_of[static_cast<size_t>(seed)]) continue;
      int pick = -1;
      double pick_v = opts.binarize;
      for (int j : vi.members[static_cast<size_t>(w)]) {
        if (taken[static_cast<size_t>(j)]) continue;
        if (match.m(seed, j) > pick_v) {
          pick_v = match.m(seed, j);
          pick = j;
        }
      }
      if (pick >= 0) g.push_back(pick);
    }
    std::sort(g.begin(), g.end());
    return g;
  };
  auto score_of = [&](const std::vector<int>& g) {
    double s = 0.0;
    for (size_t x = 0; x < g.size(); ++x)
      for (size_t y = x + 1; y < g.size(); ++y) s += match.m(g[x], g[y]);
    return s;
  };

  while (true) {
    std::vector<int> best;
    double best_score = 0.0;
    for (int i = 0; i < d; ++i) {
      if (taken[static_cast<size_t>(i)]) continue;
      const std::vector<int> g = group_of(i);
      if (g.size() < 2) continue;
      const double s = score_of(g);
      if (g.size() > best.size() || (g.size() == best.size() && s > best_score)) {
        best = g;
        best_score = s;
      }
    }
    if (best.empty()) break;
    for (int m : best) taken[static_cast<size_t>(m)] = 1;
    DetectionGroup grp;
    grp.members = best;
    fa.groups.push_back(std::move(grp));
  }
  for (int i = 0; i < d; ++i)
    if (!taken[static_cast<size_t>(i)]) fa.rejected.push_back(i);
  return fa;
}

FrameAssociation associate_frame(const std::vector<FrameDetection>& dets,
                                 std::vector<TrackState>* tracks, int frame,
                                 int* next_person_id,
                                 const AssociationOptions& opts) {
  tracks->erase(std::remove_if(tracks->begin(), tracks->end(),
                               [&](const TrackState& t) {
                                 return frame - t.last_seen > opts.track_grace;
                               }),
                tracks->end());

  const CostMatrices costs = build_costs(dets, *tracks, opts);
  const MatX geo_aff = build_affinity(costs.geo, opts.sigma_geo);
  const MatX pose_aff = build_affinity(costs.pose, opts.sigma_pose);
  const MatchMatrix match = admm_match(geo_aff, pose_aff, costs.view_of, opts);
  FrameAssociation fa = extract_identities(match, opts);

  std::vector<Points3> fused(fa.groups.size());
  for (size_t g = 0; g < fa.groups.size(); ++g) {
    Points3 mean = Points3::Zero(kNumKeypoints, 3);
    for (int m : fa.groups[g].members) mean += dets[static_cast<size_t>(m)].world;
    fused[g] = mean / static_cast<double>(fa.groups[g].members.size());
  }

  // Jointly assign groups to live tracks by temporal pose distance; a group
  // farther than the gate from every track starts a new identity.
  MatX assign_cost(fa.groups.size(), tracks->size());
  for (size_t g = 0; g < fa.groups.size(); ++g)
    for (size_t t = 0; t < tracks->size(); ++t) {
      const double c = temporal_cost((*tracks)[t].pose, fused[g]);
      assign_cost(g, t) = c <= opts.track_gate ? c : kAssignInfeasible;
    }
  const std::vector<int> to_track =
      fa.groups.empty() ? std::vector<int>{} : hungarian_min_cost(assign_cost);

  for (size_t g = 0; g < fa.groups.size(); ++g) {
    if (to_track[g] >= 0) {
      TrackState& t = (*tracks)[static_cast<size_t>(to_track[g])];
      t.pose = fused[g];
      t.last_seen = frame;
      fa.groups[g].person_id = t.id;
    } else {
      TrackState t;
      t.id = (*next_person_id)++;
      t.pose = fused[g];
      t.last_seen = frame;
      fa.groups[g].person_id = t.id;
      tracks->push_back(std::move(t));
    }
  }
  return fa;
}

AssocFile associate_scene(const SceneFile& scene, const std::vector<Camera>& cameras,
                          const AssociationOptions& opts) {
  if (cameras.size() != static_cast<size_t>(scene.meta.views))
    raise(ErrorCode::Schema, "camera count does not match the scene");
  AssocFile out;
  out.person.resize(static_cast<size_t>(scene.meta.frames));
  std::vector<TrackState> tracks;
  int next_person_id = 0;

  for (int f = 0; f < scene.meta.frames; ++f) {
    auto& frame_ids = out.person[static_cast<size_t>(f)];
    frame_ids.resize(static_cast<size_t>(scene.meta.views));
    std::vector<FrameDetection> dets;
    for (int v = 0; v < scene.meta.views; ++v) {
      const auto& raw = scene.detections[static_cast<size_t>(v)][static_cast<size_t>(f)];
      frame_ids[static_cast<size_t>(v)].assign(raw.size(), -1);
      for (size_t i = 0; i < raw.size(); ++i) {
        try {
          dets.push_back(lift_detection(cameras[static_cast<size_t>(v)], raw[i], v,
                                        static_cast<int>(i)));
        } catch (const Error&) {
          // A detection that cannot be placed carries no usable evidence;
          // it stays unassigned.
        }
      }
    }
    const FrameAssociation fa =
        associate_frame(dets, &tracks, f, &next_person_id, opts);
    for (const auto& g : fa.groups)
      for (int m : g.members)
        frame_ids[static_cast<size_t>(dets[static_cast<size_t>(m)].view)]
                 [static_cast<size_t>(dets[static_cast<size_t>(m)].det_index)] =
                     g.person_id;
  }
  return out;
}

}  // namespace mocap
