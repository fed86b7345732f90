#pragma once

#include <string>
#include <vector>

#include "mocap/rng.hpp"
#include "mocap/scene_io.hpp"

namespace mocap {

// Desk-scale synthetic benchmark configuration. Everything downstream of the
// seed is deterministic; files generated twice from one config are identical.
struct SynthConfig {
  int views = 4;
  int actors = 2;
  int frames = 64;
  double fps = 25.0;
  int width = 1000;
  int height = 800;

  double ring_radius_min = 3.5, ring_radius_max = 4.5;
  // Rig-style mounting, clearly above head height: downward tilt keeps the
  // vertical vanishing point close enough to triangulate from standing lines.
  double cam_height_min = 2.2, cam_height_max = 3.2;
  double focal_min = 900.0, focal_max = 1200.0;

  // procedural | rest | external (motions supplied by the caller)
  std::string motion_source = "procedural";
  // cycled over actors: walk | idle | wave | squat | mix
  std::vector<std::string> styles = {"walk", "idle", "wave", "squat"};
  double beta_sigma = 0.5;
  double spawn_radius = 0.0;  // 0 = auto from actor count

  double pixel_sigma = 1.0;
  double dropout = 0.0;
  double shuffle_prob = 0.0;
  double false_positive_rate = 0.0;
  double init3d_sigma = 0.05;

  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigInvalid
  Json to_json() const;
  static SynthConfig from_json(const Json& j);
};

// Band-limited procedural body motion around the origin; the root stays
// within ~1.5 m of it. Styles as in SynthConfig; unknown style throws
// ConfigInvalid. Joint angle content stays below 2 Hz.
Motion procedural_motion(const KinematicTree& tree, const VecX& beta,
                         const std::string& style, Index frames, double fps,
                         Rng& rng);

// Rigidly places a motion in the world: yaw by heading, then offset.
void place_motion(Motion* motion, const Vec3& offset, double heading);

struct SynthResult {
  SceneFile scene;
  GroundTruth gt;
};

// Cameras on a ring looking at the scene center, actors with procedural
// motions, detections = noisy projections with dropout, per-frame shuffling
// and injected spurious detections. external_motions (world-space, one per
// actor) are required iff motion_source == "external".
SynthResult synth_generate(const KinematicTree& tree, const SynthConfig& cfg,
                           const std::vector<Motion>* external_motions = nullptr);

}  // namespace mocap
