#pragma once

#include <string>
#include <vector>

#include "mocap/body_model.hpp"
#include "mocap/camera.hpp"
#include "mocap/json_util.hpp"
#include "mocap/types.hpp"

namespace mocap {

struct SceneMeta {
  double fps = 25.0;
  int width = 1000;
  int height = 800;
  int num_views = 0;
  int num_frames = 0;
};

// One detected person instance in one view of one frame. conf == 0 marks a
// missing joint; its pixel row is meaningless and must be ignored.
struct Detection {
  Points2 joints2d{kNumKeypoints, 2};      // px
  VecX conf = VecX::Zero(kNumKeypoints);   // [0, 1]
  Points3 joints3d_init{kNumKeypoints, 3}; // m, camera frame, root-relative

  Index visible_count(double min_conf = 0.0) const;
};

// Detection bundle: the input boundary to the upstream 2D/3D detectors.
struct SceneFile {
  SceneMeta meta;
  // detections[view][frame] = person instances seen in that view and frame
  std::vector<std::vector<std::vector<Detection>>> detections;
  Json config = Json::object();  // provenance of the producing run

  // Throws SchemaInvalid when bounds, confidences, root-relative roots or
  // the meta counts are violated.
  void validate() const;

  Json to_json() const;
  static SceneFile from_json(const Json& j);
  void save(const std::string& path) const;
  static SceneFile load(const std::string& path);
};

// A reconstructed or ground-truth person: shape, trajectory and the FK
// joints of every frame. `joints` may be left empty and recomputed.
struct PersonMotion {
  int person_id = 0;
  VecX betas = VecX::Zero(kShapeDim);
  Motion motion;
  std::vector<Points3> joints;  // per frame, kNumJoints x 3, world

  void compute_joints(const KinematicTree& tree);

  Json to_json() const;
  static PersonMotion from_json(const Json& j);
};

void save_motions(const std::string& path, const std::vector<PersonMotion>& persons,
                  double fps, const Json& config = Json::object());
std::vector<PersonMotion> load_motions(const std::string& path);

struct GroundTruth {
  SceneMeta meta;
  std::vector<Camera> cameras;
  std::vector<PersonMotion> actors;
  // det_person[view][frame][d] = actor index behind detection d, -1 spurious
  std::vector<std::vector<std::vector<int>>> det_person;

  Json to_json() const;
  static GroundTruth from_json(const Json& j);
  void save(const std::string& path) const;
  static GroundTruth load(const std::string& path);
};

// Association output: person id per detection, -1 for rejected detections.
struct AssocFile {
  // person[frame][view][d]
  std::vector<std::vector<std::vector<int>>> person;

  Json to_json() const;
  static AssocFile from_json(const Json& j);
  void save(const std::string& path) const;
  static AssocFile load(const std::string& path);
};

std::vector<Camera> load_cameras(const std::string& path);
void save_cameras(const std::string& path, const std::vector<Camera>& cams,
                  const Json& config = Json::object());

// Rows of the canonical keypoint subset of a full joint set.
Points3 select_keypoints(const KinematicTree& tree, const Points3& joints);

}  // namespace mocap
