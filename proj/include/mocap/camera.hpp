#pragma once

#include <vector>

#include "mocap/json_util.hpp"
#include "mocap/rotation.hpp"
#include "mocap/types.hpp"

namespace mocap {

// Pinhole intrinsics with the principal point fixed at the image center.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  int width = 0;
  int height = 0;

  double cx() const { return 0.5 * width; }
  double cy() const { return 0.5 * height; }
  void validate() const;
};

// World-to-camera transform x_cam = R x_world + t, rotation as axis-angle.
struct CameraExtrinsics {
  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  Mat3 R() const { return axis_angle_to_matrix(rotation); }
  Vec3 center() const { return -(R().transpose() * translation); }
};

struct Camera {
  int view_id = 0;
  CameraIntrinsics intr;
  CameraExtrinsics extr;

  Json to_json() const;
  static Camera from_json(const Json& j);
};

// Rotation matrix cached once per camera so per-point work is cheap.
struct PosedCamera {
  Mat3 R;
  Vec3 t;
  double fx, fy, cx, cy;

  static PosedCamera from(const CameraIntrinsics& k, const CameraExtrinsics& e) {
    return PosedCamera{e.R(), e.translation, k.fx, k.fy, k.cx(), k.cy()};
  }
};

constexpr double kMinDepth = 1e-6;

// Projects a world point. Throws BehindCamera when depth <= kMinDepth.
Vec2 project(const CameraIntrinsics& k, const CameraExtrinsics& e, const Vec3& X);

// Non-throwing variant used in optimization loops: returns false (and leaves
// *pixel untouched) when the point is behind the camera.
bool project_point(const PosedCamera& cam, const Vec3& X, Vec2* pixel,
                   double* depth = nullptr);

// Adjoint of project_point. d_R accumulates the gradient with respect to the
// rotation *matrix*; callers convert to axis-angle once per camera.
struct ProjectAdjoint {
  Vec3 d_X = Vec3::Zero();
  Mat3 d_R = Mat3::Zero();
  Vec3 d_t = Vec3::Zero();
  double d_fx = 0.0, d_fy = 0.0;
};
void project_point_backward(const PosedCamera& cam, const Vec3& X,
                            const Vec2& d_pixel, ProjectAdjoint* adj);

// World-space viewing ray in Pluecker coordinates: unit direction l and
// moment n = c x l for camera center c. Any point p on the ray satisfies
// p x l = -n... equivalently n = p x l for all p on the line.
struct Ray {
  Vec3 l;
  Vec3 n;
};

Ray pixel_ray(const CameraIntrinsics& k, const CameraExtrinsics& e, const Vec2& pixel);

// Symmetric coplanarity residual of two rays; zero iff the lines intersect
// (or are parallel in the same plane).
double ray_coplanarity(const Ray& a, const Ray& b);

// Least-squares point minimizing summed squared distance to the rays.
// Throws DegenerateRays for <2 rays or a near-singular normal system.
Vec3 triangulate(const std::vector<Ray>& rays);

// Similarity/rigid alignment: finds s R src_i + t ~= dst_i.
struct RigidAlign {
  Mat3 R;
  Vec3 t;
  double s = 1.0;
  double rms = 0.0;
};
RigidAlign align_rigid(const Points3& src, const Points3& dst, bool with_scale);

// Chordal L2 mean: projection of the arithmetic mean onto SO(3).
// Throws IllConditionedMean when the mean matrix is near rank-deficient.
Mat3 rotation_mean(const std::vector<Mat3>& rotations);

// Recovers the camera translation from known rotation, intrinsics, world
// points and their observed pixels via the linear cross-product system.
Vec3 regress_translation(const CameraIntrinsics& k, const Mat3& R,
                         const Points3& world, const Points2& pixels);

// Extrinsics for a camera at `position` looking at `target` with world up +z.
CameraExtrinsics look_at_extrinsics(const Vec3& position, const Vec3& target);

}  // namespace mocap
