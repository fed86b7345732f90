#include "mocap/synth.hpp"

#include <algorithm>
#include <cmath>

namespace mocap {

namespace {

constexpr double kTau = 6.283185307179586476925286766559;

// Sum of three sinusoids, frequencies capped by fmax: band-limited by
// construction so resampled variants stay smooth.
struct Curve {
  double a[3] = {0, 0, 0};
  double f[3] = {0, 0, 0};
  double ph[3] = {0, 0, 0};

  static Curve random(Rng& rng, double amp, double fmax) {
    Curve c;
    for (int k = 0; k < 3; ++k) {
      c.a[k] = amp * rng.uniform(0.3, 1.0) / (k + 1);
      c.f[k] = rng.uniform(0.1, fmax);
      c.ph[k] = rng.uniform(0.0, kTau);
    }
    return c;
  }

  double eval(double t) const {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += a[k] * std::sin(kTau * f[k] * t + ph[k]);
    return s;
  }
};

void set_local(Motion* m, Index t, int joint, const Mat3& R) {
  m->body6d.block<1, 6>(t, 6 * (joint - 1)) = matrix_to_rot6d(R).transpose();
}

// Height of the pelvis over the lowest rest-pose joint; puts feet near z=0.
double stand_height(const KinematicTree& tree, const VecX& beta) {
  const Points3 rest = tree.rest_joints(beta);
  return -rest.col(2).minCoeff();
}

// Joints animated by the idle sway and their amplitudes. Hip/knee/spine
// amplitudes stay far below the standing threshold.
struct JointCurve {
  int joint;
  Vec3 axis;
  Curve curve;
};

std::vector<JointCurve> idle_curves(Rng& rng) {
  std::vector<JointCurve> out;
  // Legs and trunk barely move (a person standing still sways centimeters,
  // and head-ankle verticality is what standing-person calibration taps);
  // arms are free to fidget.
  const int joints[] = {3, 6, 9, 12, 16, 17, 18, 19, 1, 2, 4, 5};
  for (int j : joints) {
    const bool leg = j == 1 || j == 2 || j == 4 || j == 5;
    const bool arm = j >= 16;
    const double amp = leg ? 0.01 : (arm ? 0.04 : 0.015);
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    out.push_back({j, axis, Curve::random(rng, amp, 0.8)});
  }
  return out;
}

Motion base_motion(Index frames, double fps, double pelvis_z) {
  Motion m = Motion::zeros(frames, fps);
  PoseFrame rest = PoseFrame::rest();
  rest.trans = Vec3(0, 0, pelvis_z);
  for (Index t = 0; t < frames; ++t) m.set_frame(t, rest);
  return m;
}

void apply_idle(Motion* m, const std::vector<JointCurve>& curves, double fps) {
  for (Index t = 0; t < m->frames(); ++t) {
    const double time = t / fps;
    for (const JointCurve& jc : curves)
      set_local(m, t, jc.joint, axis_angle_to_matrix(jc.axis * jc.curve.eval(time)));
  }
}

Motion make_idle(Index frames, double fps, double pelvis_z, Rng& rng) {
  Motion m = base_motion(frames, fps, pelvis_z);
  const auto curves = idle_curves(rng);
  const Curve sway_x = Curve::random(rng, 0.01, 0.4);
  const Curve sway_y = Curve::random(rng, 0.01, 0.4);
  const Curve sway_h = Curve::random(rng, 0.05, 0.3);
  apply_idle(&m, curves, fps);
  for (Index t = 0; t < frames; ++t) {
    const double time = t / fps;
    m.trans(t, 0) = sway_x.eval(time);
    m.trans(t, 1) = sway_y.eval(time);
    m.global_rot.row(t) = Vec3(0, 0, sway_h.eval(time)).transpose();
  }
  return m;
}

Motion make_wave(Index frames, double fps, double pelvis_z, Rng& rng) {
  Motion m = make_idle(frames, fps, pelvis_z, rng);
  const double lift = rng.uniform(1.1, 1.4);
  const double wob_f = rng.uniform(1.0, 1.6);
  const double wob_a = rng.uniform(0.3, 0.5);
  const double ph = rng.uniform(0.0, kTau);
  for (Index t = 0; t < frames; ++t) {
    const double time = t / fps;
    // Right shoulder raises the arm; the forearm does the waving.
    const double raise = lift * (0.7 + 0.3 * std::sin(kTau * 0.25 * time + ph));
    set_local(&m, t, 17, axis_angle_to_matrix(Vec3(0, raise, 0)));
    set_local(&m, t, 19,
              axis_angle_to_matrix(Vec3(0, wob_a * std::sin(kTau * wob_f * time), 0)));
  }
  return m;
}

Motion make_squat(Index frames, double fps, double pelvis_z, Rng& rng) {
  Motion m = base_motion(frames, fps, pelvis_z);
  const auto curves = idle_curves(rng);
  apply_idle(&m, curves, fps);
  const double f = rng.uniform(0.3, 0.45);
  const double depth = rng.uniform(0.7, 1.0);
  const double ph = rng.uniform(0.0, kTau);
  for (Index t = 0; t < frames; ++t) {
    const double time = t / fps;
    const double d = depth * (0.5 - 0.5 * std::cos(kTau * f * time + ph));
    set_local(&m, t, 1, axis_angle_to_matrix(Vec3(0.9 * d, 0, 0)));
    set_local(&m, t, 2, axis_angle_to_matrix(Vec3(0.9 * d, 0, 0)));
    set_local(&m, t, 4, axis_angle_to_matrix(Vec3(-1.3 * d, 0, 0)));
    set_local(&m, t, 5, axis_angle_to_matrix(Vec3(-1.3 * d, 0, 0)));
    set_local(&m, t, 7, axis_angle_to_matrix(Vec3(0.4 * d, 0, 0)));
    set_local(&m, t, 8, axis_angle_to_matrix(Vec3(0.4 * d, 0, 0)));
    set_local(&m, t, 3, axis_angle_to_matrix(Vec3(-0.25 * d, 0, 0)));
    m.trans(t, 2) = pelvis_z - 0.3 * d;
  }
  return m;
}

Motion make_walk(Index frames, double fps, double pelvis_z, Rng& rng) {
  Motion m = base_motion(frames, fps, pelvis_z);
  const double fs = rng.uniform(0.7, 1.0);
  const double hip_a = rng.uniform(0.3, 0.45);
  const double knee_a = rng.uniform(0.4, 0.6);
  const double arm_a = rng.uniform(0.15, 0.3);
  const double ph = rng.uniform(0.0, kTau);
  const double rx = rng.uniform(0.8, 1.4), ry = rng.uniform(0.8, 1.4);
  const double speed = rng.uniform(0.5, 0.9);
  const double omega = speed / std::sqrt(0.5 * (rx * rx + ry * ry));
  const double path_ph = rng.uniform(0.0, kTau);
  for (Index t = 0; t < frames; ++t) {
    const double time = t / fps;
    const double g = kTau * fs * time + ph;
    set_local(&m, t, 1, axis_angle_to_matrix(Vec3(hip_a * std::sin(g), 0, 0)));
    set_local(&m, t, 2, axis_angle_to_matrix(Vec3(-hip_a * std::sin(g), 0, 0)));
    set_local(&m, t, 4,
              axis_angle_to_matrix(Vec3(-knee_a * (0.5 - 0.5 * std::cos(g - 0.9)), 0, 0)));
    set_local(&m, t, 5,
              axis_angle_to_matrix(Vec3(-knee_a * (0.5 - 0.5 * std::cos(g - 0.9 + kTau / 2)), 0, 0)));
    set_local(&m, t, 16, axis_angle_to_matrix(Vec3(-arm_a * std::sin(g), 0, 0)));
    set_local(&m, t, 17, axis_angle_to_matrix(Vec3(arm_a * std::sin(g), 0, 0)));

    const double a = omega * time + path_ph;
    m.trans(t, 0) = rx * std::cos(a);
    m.trans(t, 1) = ry * std::sin(a);
    m.trans(t, 2) = pelvis_z - 0.02 + 0.02 * std::cos(2.0 * g);
    const double vx = -rx * omega * std::sin(a), vy = ry * omega * std::cos(a);
    m.global_rot.row(t) = Vec3(0, 0, std::atan2(-vx, vy)).transpose();
  }
  return m;
}

Motion make_mix(Index frames, double fps, double pelvis_z, Rng& rng) {
  Motion m = base_motion(frames, fps, pelvis_z);
  std::vector<JointCurve> curves;
  const double amps[kNumJoints] = {0,    0.3,  0.3,  0.1, 0.35, 0.35, 0.1, 0.15,
                                   0.15, 0.1,  0.1,  0.1, 0.1,  0.05, 0.05, 0.1,
                                   0.35, 0.35, 0.45, 0.45, 0.2, 0.2,  0.15, 0.15};
  for (int j = 1; j < kNumJoints; ++j) {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    curves.push_back({j, axis, Curve::random(rng, amps[j], 2.0)});
  }
  const Curve wx = Curve::random(rng, 0.3, 0.3);
  const Curve wy = Curve::random(rng, 0.3, 0.3);
  const Curve wz = Curve::random(rng, 0.02, 0.5);
  const Curve wh = Curve::random(rng, 0.4, 0.3);
  for (Index t = 0; t < frames; ++t) {
    const double time = t / fps;
    for (const JointCurve& jc : curves)
      set_local(&m, t, jc.joint, axis_angle_to_matrix(jc.axis * jc.curve.eval(time)));
    m.trans(t, 0) = wx.eval(time);
    m.trans(t, 1) = wy.eval(time);
    m.trans(t, 2) = pelvis_z + wz.eval(time);
    m.global_rot.row(t) = Vec3(0, 0, wh.eval(time)).transpose();
  }
  return m;
}

}  // namespace

Motion procedural_motion(const KinematicTree& tree, const VecX& beta,
                         const std::string& style, Index frames, double fps,
                         Rng& rng) {
  const double pelvis_z = stand_height(tree, beta);
  if (style == "idle") return make_idle(frames, fps, pelvis_z, rng);
  if (style == "wave") return make_wave(frames, fps, pelvis_z, rng);
  if (style == "squat") return make_squat(frames, fps, pelvis_z, rng);
  if (style == "walk") return make_walk(frames, fps, pelvis_z, rng);
  if (style == "mix") return make_mix(frames, fps, pelvis_z, rng);
  raise(ErrorCode::ConfigInvalid, "unknown motion style: " + style);
}

void place_motion(Motion* motion, const Vec3& offset, double heading) {
  const Mat3 Rz = axis_angle_to_matrix(Vec3(0, 0, heading));
  for (Index t = 0; t < motion->frames(); ++t) {
    motion->trans.row(t) =
        (Rz * Vec3(motion->trans.row(t).transpose()) + offset).transpose();
    const Mat3 Rg = axis_angle_to_matrix(Vec3(motion->global_rot.row(t).transpose()));
    motion->global_rot.row(t) = matrix_to_axis_angle(Rz * Rg).transpose();
  }
}

void SynthConfig::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (views < 2) raise(ErrorCode::ConfigInvalid, "need at least 2 views");
  if (actors < 1 || frames < 2 || fps <= 0 || width <= 0 || height <= 0)
    raise(ErrorCode::ConfigInvalid, "actors/frames/fps/size must be positive");
  if (!(ring_radius_min > 0) || ring_radius_max < ring_radius_min)
    raise(ErrorCode::ConfigInvalid, "bad camera ring radius range");
  if (cam_height_max < cam_height_min)
    raise(ErrorCode::ConfigInvalid, "bad camera height range");
  if (!(focal_min > 0) || focal_max < focal_min)
    raise(ErrorCode::ConfigInvalid, "bad focal range");
  if (!prob(dropout) || !prob(shuffle_prob) || !prob(false_positive_rate))
    raise(ErrorCode::ConfigInvalid, "probabilities must be in [0,1]");
  if (pixel_sigma < 0 || init3d_sigma < 0 || beta_sigma < 0 || spawn_radius < 0)
    raise(ErrorCode::ConfigInvalid, "sigmas must be nonnegative");
  if (motion_source != "procedural" && motion_source != "rest" &&
      motion_source != "external")
    raise(ErrorCode::ConfigInvalid, "unknown motion source: " + motion_source);
  if (motion_source == "procedural" && styles.empty())
    raise(ErrorCode::ConfigInvalid, "procedural motion needs styles");
}

Json SynthConfig::to_json() const {
  Json j;
  j["views"] = views;
  j["actors"] = actors;
  j["frames"] = frames;
  j["fps"] = fps;
  j["width"] = width;
  j["height"] = height;
  j["ring_radius_min"] = ring_radius_min;
  j["ring_radius_max"] = ring_radius_max;
  j["cam_height_min"] = cam_height_min;
  j["cam_height_max"] = cam_height_max;
  j["focal_min"] = focal_min;
  j["focal_max"] = focal_max;
  j["motion_source"] = motion_source;
  j["styles"] = styles;
  j["beta_sigma"] = beta_sigma;
  j["spawn_radius"] = spawn_radius;
  j["pixel_sigma"] = pixel_sigma;
  j["dropout"] = dropout;
  j["shuffle_prob"] = shuffle_prob;
  j["false_positive_rate"] = false_positive_rate;
  j["init3d_sigma"] = init3d_sigma;
  j["seed"] = seed;
  return j;
}

SynthConfig SynthConfig::from_json(const Json& j) {
  SynthConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("views", c.views);
  get("actors", c.actors);
  get("frames", c.frames);
  get("fps", c.fps);
  get("width", c.width);
  get("height", c.height);
  get("ring_radius_min", c.ring_radius_min);
  get("ring_radius_max", c.ring_radius_max);
  get("cam_height_min", c.cam_height_min);
  get("cam_height_max", c.cam_height_max);
  get("focal_min", c.focal_min);
  get("focal_max", c.focal_max);
  get("motion_source", c.motion_source);
  get("styles", c.styles);
  get("beta_sigma", c.beta_sigma);
  get("spawn_radius", c.spawn_radius);
  get("pixel_sigma", c.pixel_sigma);
  get("dropout", c.dropout);
  get("shuffle_prob", c.shuffle_prob);
  get("false_positive_rate", c.false_positive_rate);
  get("init3d_sigma", c.init3d_sigma);
  get("seed", c.seed);
  c.validate();
  return c;
}

SynthResult synth_generate(const KinematicTree& tree, const SynthConfig& cfg,
                           const std::vector<Motion>* external_motions) {
  cfg.validate();
  if (cfg.motion_source == "external") {
    if (external_motions == nullptr ||
        static_cast<int>(external_motions->size()) != cfg.actors)
      raise(ErrorCode::ConfigInvalid, "external motion source needs one motion per actor");
    for (const Motion& m : *external_motions)
      if (m.frames() != cfg.frames)
        raise(ErrorCode::ConfigInvalid, "external motion frame count mismatch");
  }

  Rng root(cfg.seed);
  Rng rng_cam = root.fork(1);
  Rng rng_actor = root.fork(2);
  Rng rng_noise = root.fork(3);
  Rng rng_ghost = root.fork(4);

  SynthResult out;
  SceneMeta meta;
  meta.fps = cfg.fps;
  meta.width = cfg.width;
  meta.height = cfg.height;
  meta.num_views = cfg.views;
  meta.num_frames = cfg.frames;
  out.scene.meta = meta;
  out.scene.config = cfg.to_json();
  out.gt.meta = meta;

  const Vec3 center(0, 0, 1.0);
  for (int v = 0; v < cfg.views; ++v) {
    Camera cam;
    cam.view_id = v;
    // Square pixels: one focal per camera. An upright camera puts the
    // vertical vanishing point on the image y axis, where separate focals
    // would not both be observable.
    cam.intr.fx = rng_cam.uniform(cfg.focal_min, cfg.focal_max);
    cam.intr.fy = cam.intr.fx;
    cam.intr.width = cfg.width;
    cam.intr.height = cfg.height;
    const double az = kTau * v / cfg.views + rng_cam.uniform(-0.15, 0.15);
    const double r = rng_cam.uniform(cfg.ring_radius_min, cfg.ring_radius_max);
    const Vec3 pos(r * std::cos(az), r * std::sin(az),
                   rng_cam.uniform(cfg.cam_height_min, cfg.cam_height_max));
    cam.extr = look_at_extrinsics(pos, center);
    out.gt.cameras.push_back(cam);
  }

  const double spawn_r =
      cfg.spawn_radius > 0 ? cfg.spawn_radius
                           : std::max(0.8, 0.35 * cfg.actors);
  for (int i = 0; i < cfg.actors; ++i) {
    PersonMotion actor;
    actor.person_id = i;
    for (int b = 0; b < kShapeDim; ++b)
      actor.betas[b] = std::clamp(rng_actor.normal(0.0, cfg.beta_sigma), -1.5, 1.5);
    if (cfg.motion_source == "external") {
      actor.motion = (*external_motions)[static_cast<std::size_t>(i)];
    } else if (cfg.motion_source == "rest") {
      actor.motion = base_motion(cfg.frames, cfg.fps, stand_height(tree, actor.betas));
      const double az = kTau * i / cfg.actors;
      place_motion(&actor.motion, Vec3(spawn_r * std::cos(az), spawn_r * std::sin(az), 0),
                   rng_actor.uniform(0.0, kTau));
    } else {
      const std::string style = cfg.styles[static_cast<std::size_t>(i) % cfg.styles.size()];
      actor.motion =
          procedural_motion(tree, actor.betas, style, cfg.frames, cfg.fps, rng_actor);
      const double az = kTau * i / cfg.actors + rng_actor.uniform(-0.2, 0.2);
      place_motion(&actor.motion, Vec3(spawn_r * std::cos(az), spawn_r * std::sin(az), 0),
                   rng_actor.uniform(0.0, kTau));
    }
    actor.compute_joints(tree);
    out.gt.actors.push_back(std::move(actor));
  }

  // Ghost bodies reuse a rest pose at a random spot; they exist in one view
  // only, so they are never multi-view consistent.
  const Points3 rest_kp = [&] {
    const FkCache cache =
        fk_forward(tree, VecX::Zero(kShapeDim), PoseFrame::rest());
    return fk_keypoints(tree, cache);
  }();
  const double rest_pelvis_z = stand_height(tree, VecX::Zero(kShapeDim));

  out.scene.detections.resize(static_cast<std::size_t>(cfg.views));
  out.gt.det_person.resize(static_cast<std::size_t>(cfg.views));
  for (int v = 0; v < cfg.views; ++v) {
    const Camera& cam = out.gt.cameras[static_cast<std::size_t>(v)];
    const PosedCamera pc = PosedCamera::from(cam.intr, cam.extr);
    auto& view_frames = out.scene.detections[static_cast<std::size_t>(v)];
    auto& view_ids = out.gt.det_person[static_cast<std::size_t>(v)];
    view_frames.resize(static_cast<std::size_t>(cfg.frames));
    view_ids.resize(static_cast<std::size_t>(cfg.frames));

    for (int t = 0; t < cfg.frames; ++t) {
      std::vector<Detection> dets;
      std::vector<int> ids;

      auto observe = [&](const Points3& kp15, double sigma) {
        Detection det;
        det.joints2d.setZero();
        Index visible = 0;
        for (Index k = 0; k < kNumKeypoints; ++k) {
          Vec2 pix;
          if (!project_point(pc, kp15.row(k).transpose(), &pix)) continue;
          if (pix.x() < 0 || pix.x() > cfg.width || pix.y() < 0 || pix.y() > cfg.height)
            continue;
          const Vec2 noise(rng_noise.normal(0.0, sigma), rng_noise.normal(0.0, sigma));
          const double c = std::clamp(1.0 - noise.norm() / 10.0, 0.0, 1.0);
          if (c <= 0.0) continue;
          if (cfg.dropout > 0.0 && rng_noise.uniform() < cfg.dropout) continue;
          det.joints2d.row(k) = (pix + noise).transpose();
          det.conf[k] = c;
          ++visible;
        }
        if (visible < 6) return false;
        const Vec3 pelvis = kp15.row(0).transpose();
        for (Index k = 0; k < kNumKeypoints; ++k) {
          Vec3 rel = pc.R * (kp15.row(k).transpose() - pelvis);
          if (cfg.init3d_sigma > 0.0)
            rel += Vec3(rng_noise.normal(), rng_noise.normal(), rng_noise.normal()) *
                   cfg.init3d_sigma;
          det.joints3d_init.row(k) = rel.transpose();
        }
        det.joints3d_init.rowwise() -= det.joints3d_init.row(0);
        dets.push_back(std::move(det));
        return true;
      };

      for (int i = 0; i < cfg.actors; ++i) {
        const Points3 kp15 = select_keypoints(
            tree, out.gt.actors[static_cast<std::size_t>(i)].joints[static_cast<std::size_t>(t)]);
        if (observe(kp15, cfg.pixel_sigma)) ids.push_back(i);
      }

      if (cfg.false_positive_rate > 0.0 &&
          rng_ghost.uniform() < cfg.false_positive_rate) {
        const double gr = rng_ghost.uniform(0.2, 1.5);
        const double ga = rng_ghost.uniform(0.0, kTau);
        const Mat3 Rz = axis_angle_to_matrix(
            Vec3(0, 0, rng_ghost.uniform(0.0, kTau)));
        Points3 kp15 = rest_kp;
        const Vec3 offset(gr * std::cos(ga), gr * std::sin(ga), rest_pelvis_z);
        for (Index k = 0; k < kNumKeypoints; ++k)
          kp15.row(k) = (Rz * Vec3(kp15.row(k).transpose()) + offset).transpose();
        if (observe(kp15, std::max(2.0, 2.0 * cfg.pixel_sigma))) ids.push_back(-1);
      }

      if (cfg.shuffle_prob > 0.0 && rng_noise.uniform() < cfg.shuffle_prob &&
          dets.size() > 1) {
        std::vector<std::size_t> perm(dets.size());
        for (std::size_t d = 0; d < perm.size(); ++d) perm[d] = d;
        rng_noise.shuffle(perm);
        std::vector<Detection> d2(dets.size());
        std::vector<int> i2(ids.size());
        for (std::size_t d = 0; d < perm.size(); ++d) {
          d2[d] = std::move(dets[perm[d]]);
          i2[d] = ids[perm[d]];
        }
        dets = std::move(d2);
        ids = std::move(i2);
      }

      view_frames[static_cast<std::size_t>(t)] = std::move(dets);
      view_ids[static_cast<std::size_t>(t)] = std::move(ids);
    }
  }

  out.scene.validate();
  return out;
}

}  // namespace mocap
