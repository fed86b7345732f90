#include "mocap/scene_io.hpp"

#include <cmath>

namespace mocap {

namespace {

Json meta_to_json(const SceneMeta& m) {
  Json j;
  j["fps"] = m.fps;
  j["width"] = m.width;
  j["height"] = m.height;
  j["views"] = m.num_views;
  j["frames"] = m.num_frames;
  return j;
}

SceneMeta meta_from_json(const Json& j) {
  SceneMeta m;
  m.fps = require_field(j, "fps", "meta").get<double>();
  m.width = require_field(j, "width", "meta").get<int>();
  m.height = require_field(j, "height", "meta").get<int>();
  m.num_views = require_field(j, "views", "meta").get<int>();
  m.num_frames = require_field(j, "frames", "meta").get<int>();
  if (m.fps <= 0 || m.width <= 0 || m.height <= 0 || m.num_views < 0 ||
      m.num_frames < 0)
    raise(ErrorCode::SchemaInvalid, "meta fields must be positive");
  return m;
}

Points3 points3_from_json(const Json& a, Index rows) {
  const MatX m = matx_from_json(a, 3);
  if (m.rows() != rows)
    raise(ErrorCode::SchemaInvalid, "expected " + std::to_string(rows) + " rows");
  return m;
}

}  // namespace

Index Detection::visible_count(double min_conf) const {
  Index n = 0;
  for (Index k = 0; k < conf.size(); ++k)
    if (conf[k] > min_conf) ++n;
  return n;
}

void SceneFile::validate() const {
  if (static_cast<int>(detections.size()) != meta.num_views)
    raise(ErrorCode::SchemaInvalid, "view count does not match meta");
  const double x_lo = -0.1 * meta.width, x_hi = 1.1 * meta.width;
  const double y_lo = -0.1 * meta.height, y_hi = 1.1 * meta.height;
  for (const auto& view : detections) {
    if (static_cast<int>(view.size()) != meta.num_frames)
      raise(ErrorCode::SchemaInvalid, "frame count does not match meta");
    for (const auto& frame : view) {
      for (const Detection& det : frame) {
        if (det.joints2d.rows() != kNumKeypoints ||
            det.conf.size() != kNumKeypoints ||
            det.joints3d_init.rows() != kNumKeypoints)
          raise(ErrorCode::SchemaInvalid, "detection must carry all keypoints");
        if (!det.joints2d.allFinite() || !det.conf.allFinite() ||
            !det.joints3d_init.allFinite())
          raise(ErrorCode::NonFiniteInput, "non-finite detection data");
        for (Index k = 0; k < kNumKeypoints; ++k) {
          const double c = det.conf[k];
          if (c < 0.0 || c > 1.0)
            raise(ErrorCode::SchemaInvalid, "confidence outside [0,1]");
          if (c > 0.0) {
            const double x = det.joints2d(k, 0), y = det.joints2d(k, 1);
            if (x < x_lo || x > x_hi || y < y_lo || y > y_hi)
              raise(ErrorCode::SchemaInvalid, "pixel outside image bounds +-10%");
          }
        }
        if (det.joints3d_init.row(0).norm() > 1e-6)
          raise(ErrorCode::SchemaInvalid, "initial 3d pose must be root-relative");
      }
    }
  }
}

Json SceneFile::to_json() const {
  Json j;
  j["schema"] = "mocap-bundle/v1";
  j["meta"] = meta_to_json(meta);
  Json views = Json::array();
  for (std::size_t v = 0; v < detections.size(); ++v) {
    Json view;
    view["view_id"] = static_cast<int>(v);
    Json frames = Json::array();
    for (const auto& frame : detections[v]) {
      Json dets = Json::array();
      for (const Detection& det : frame) {
        Json d;
        Json j2 = Json::array();
        for (Index k = 0; k < kNumKeypoints; ++k)
          j2.push_back({det.joints2d(k, 0), det.joints2d(k, 1), det.conf[k]});
        d["joints2d"] = j2;
        d["joints3d_init"] = mocap::to_json(MatX(det.joints3d_init));
        dets.push_back(d);
      }
      frames.push_back(dets);
    }
    view["frames"] = frames;
    views.push_back(view);
  }
  j["views"] = views;
  j["config"] = config;
  return j;
}

SceneFile SceneFile::from_json(const Json& j) {
  require_schema(j, "mocap-bundle/v1", "scene file");
  SceneFile s;
  s.meta = meta_from_json(require_field(j, "meta", "scene file"));
  const Json& views = require_field(j, "views", "scene file");
  if (!views.is_array()) raise(ErrorCode::SchemaInvalid, "views must be an array");
  for (const Json& view : views) {
    std::vector<std::vector<Detection>> frames;
    for (const Json& frame : require_field(view, "frames", "scene view")) {
      std::vector<Detection> dets;
      for (const Json& dj : frame) {
        Detection det;
        const Json& j2 = require_field(dj, "joints2d", "detection");
        if (!j2.is_array() || static_cast<int>(j2.size()) != kNumKeypoints)
          raise(ErrorCode::SchemaInvalid, "joints2d must have all keypoints");
        for (Index k = 0; k < kNumKeypoints; ++k) {
          const Json& row = j2[k];
          if (!row.is_array() || row.size() != 3)
            raise(ErrorCode::SchemaInvalid, "joints2d rows are [x, y, conf]");
          det.joints2d(k, 0) = row[0].get<double>();
          det.joints2d(k, 1) = row[1].get<double>();
          det.conf[k] = row[2].get<double>();
        }
        det.joints3d_init =
            points3_from_json(require_field(dj, "joints3d_init", "detection"),
                              kNumKeypoints);
        dets.push_back(std::move(det));
      }
      frames.push_back(std::move(dets));
    }
    s.detections.push_back(std::move(frames));
  }
  if (j.contains("config")) s.config = j["config"];
  s.validate();
  return s;
}

void SceneFile::save(const std::string& path) const { save_json_file(path, to_json()); }

SceneFile SceneFile::load(const std::string& path) {
  return from_json(load_json_file(path));
}

void PersonMotion::compute_joints(const KinematicTree& tree) {
  joints.clear();
  joints.reserve(static_cast<std::size_t>(motion.frames()));
  for (Index t = 0; t < motion.frames(); ++t) {
    const FkCache cache = fk_forward(tree, betas, motion.frame(t));
    joints.push_back(cache.joints);
  }
}

Json PersonMotion::to_json() const {
  Json j;
  j["person_id"] = person_id;
  j["betas"] = mocap::to_json(betas);
  j["fps"] = motion.fps;
  Json frames = Json::array();
  for (Index t = 0; t < motion.frames(); ++t) {
    Json f;
    f["body6d"] = mocap::to_json(VecX(motion.body6d.row(t)));
    f["global_rot"] = mocap::to_json(VecX(motion.global_rot.row(t)));
    f["trans"] = mocap::to_json(VecX(motion.trans.row(t)));
    if (!joints.empty())
      f["joints"] = mocap::to_json(MatX(joints[static_cast<std::size_t>(t)]));
    frames.push_back(f);
  }
  j["frames"] = frames;
  return j;
}

PersonMotion PersonMotion::from_json(const Json& j) {
  PersonMotion p;
  p.person_id = require_field(j, "person_id", "person").get<int>();
  p.betas = vecx_from_json(require_field(j, "betas", "person"), kShapeDim);
  const Json& frames = require_field(j, "frames", "person");
  const Index T = static_cast<Index>(frames.size());
  p.motion = Motion::zeros(T, require_field(j, "fps", "person").get<double>());
  for (Index t = 0; t < T; ++t) {
    const Json& f = frames[t];
    p.motion.body6d.row(t) =
        vecx_from_json(require_field(f, "body6d", "frame"), kPoseDim).transpose();
    p.motion.global_rot.row(t) =
        vecx_from_json(require_field(f, "global_rot", "frame"), 3).transpose();
    p.motion.trans.row(t) =
        vecx_from_json(require_field(f, "trans", "frame"), 3).transpose();
    if (f.contains("joints"))
      p.joints.push_back(points3_from_json(f["joints"], kNumJoints));
  }
  if (!p.joints.empty() && static_cast<Index>(p.joints.size()) != T)
    raise(ErrorCode::SchemaInvalid, "joints must cover all frames or none");
  return p;
}

void save_motions(const std::string& path, const std::vector<PersonMotion>& persons,
                  double fps, const Json& config) {
  Json j;
  j["schema"] = "mocap-motions/v1";
  j["fps"] = fps;
  Json arr = Json::array();
  for (const PersonMotion& p : persons) arr.push_back(p.to_json());
  j["persons"] = arr;
  j["config"] = config;
  save_json_file(path, j);
}

std::vector<PersonMotion> load_motions(const std::string& path) {
  const Json j = load_json_file(path);
  require_schema(j, "mocap-motions/v1", path);
  std::vector<PersonMotion> persons;
  for (const Json& pj : require_field(j, "persons", "motions file"))
    persons.push_back(PersonMotion::from_json(pj));
  return persons;
}

Json GroundTruth::to_json() const {
  Json j;
  j["schema"] = "mocap-gt/v1";
  j["meta"] = meta_to_json(meta);
  Json cams = Json::array();
  for (const Camera& c : cameras) cams.push_back(c.to_json());
  j["cameras"] = cams;
  Json acts = Json::array();
  for (const PersonMotion& a : actors) acts.push_back(a.to_json());
  j["actors"] = acts;
  j["det_person"] = det_person;
  return j;
}

GroundTruth GroundTruth::from_json(const Json& j) {
  require_schema(j, "mocap-gt/v1", "ground truth");
  GroundTruth g;
  g.meta = meta_from_json(require_field(j, "meta", "ground truth"));
  for (const Json& cj : require_field(j, "cameras", "ground truth"))
    g.cameras.push_back(Camera::from_json(cj));
  for (const Json& aj : require_field(j, "actors", "ground truth"))
    g.actors.push_back(PersonMotion::from_json(aj));
  g.det_person = require_field(j, "det_person", "ground truth")
                     .get<std::vector<std::vector<std::vector<int>>>>();
  return g;
}

void GroundTruth::save(const std::string& path) const {
  save_json_file(path, to_json());
}

GroundTruth GroundTruth::load(const std::string& path) {
  return from_json(load_json_file(path));
}

Json AssocFile::to_json() const {
  Json j;
  j["schema"] = "mocap-assoc/v1";
  j["frames"] = person;
  return j;
}

AssocFile AssocFile::from_json(const Json& j) {
  require_schema(j, "mocap-assoc/v1", "association file");
  AssocFile a;
  a.person = require_field(j, "frames", "association file")
                 .get<std::vector<std::vector<std::vector<int>>>>();
  return a;
}

void AssocFile::save(const std::string& path) const { save_json_file(path, to_json()); }

AssocFile AssocFile::load(const std::string& path) {
  return from_json(load_json_file(path));
}

std::vector<Camera> load_cameras(const std::string& path) {
  const Json j = load_json_file(path);
  require_schema(j, "mocap-cameras/v1", path);
  std::vector<Camera> cams;
  for (const Json& cj : require_field(j, "cameras", "camera file"))
    cams.push_back(Camera::from_json(cj));
  return cams;
}

void save_cameras(const std::string& path, const std::vector<Camera>& cams,
                  const Json& config) {
  Json j;
  j["schema"] = "mocap-cameras/v1";
  Json arr = Json::array();
  for (const Camera& c : cams) arr.push_back(c.to_json());
  j["cameras"] = arr;
  j["config"] = config;
  save_json_file(path, j);
}

Points3 select_keypoints(const KinematicTree& tree, const Points3& joints) {
  Points3 kp(kNumKeypoints, 3);
  for (int k = 0; k < kNumKeypoints; ++k)
    kp.row(k) = joints.row(tree.keypoint_map[static_cast<std::size_t>(k)]);
  return kp;
}

}  // namespace mocap
