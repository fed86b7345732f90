#include "mocap/camera.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "mocap/error.hpp"

namespace mocap {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
    raise(ErrorCode::SchemaInvalid, "focal lengths must be positive and finite");
  if (width <= 0 || height <= 0)
    raise(ErrorCode::SchemaInvalid, "image size must be positive");
}

Json Camera::to_json() const {
  Json j;
  j["view_id"] = view_id;
  j["fx"] = intr.fx;
  j["fy"] = intr.fy;
  j["width"] = intr.width;
  j["height"] = intr.height;
  j["rotation_axis_angle"] = mocap::to_json(VecX(extr.rotation));
  j["translation"] = mocap::to_json(VecX(extr.translation));
  return j;
}

Camera Camera::from_json(const Json& j) {
  Camera c;
  c.view_id = require_field(j, "view_id", "camera").get<int>();
  c.intr.fx = require_field(j, "fx", "camera").get<double>();
  c.intr.fy = require_field(j, "fy", "camera").get<double>();
  c.intr.width = require_field(j, "width", "camera").get<int>();
  c.intr.height = require_field(j, "height", "camera").get<int>();
  c.extr.rotation = vecx_from_json(require_field(j, "rotation_axis_angle", "camera"), 3);
  c.extr.translation = vecx_from_json(require_field(j, "translation", "camera"), 3);
  c.intr.validate();
  return c;
}

bool project_point(const PosedCamera& cam, const Vec3& X, Vec2* pixel,
                   double* depth) {
  const Vec3 xc = cam.R * X + cam.t;
  if (depth) *depth = xc.z();
  if (xc.z() <= kMinDepth) return false;
  const double inv_z = 1.0 / xc.z();
  (*pixel)[0] = cam.fx * xc.x() * inv_z + cam.cx;
  (*pixel)[1] = cam.fy * xc.y() * inv_z + cam.cy;
  return true;
}

Vec2 project(const CameraIntrinsics& k, const CameraExtrinsics& e, const Vec3& X) {
  Vec2 pix;
  if (!project_point(PosedCamera::from(k, e), X, &pix))
    raise(ErrorCode::BehindCamera, "point projects behind the camera");
  return pix;
}

void project_point_backward(const PosedCamera& cam, const Vec3& X,
                            const Vec2& d_pixel, ProjectAdjoint* adj) {
  const Vec3 xc = cam.R * X + cam.t;
  const double inv_z = 1.0 / xc.z();
  // pixel = (fx x/z + cx, fy y/z + cy)
  adj->d_fx += d_pixel[0] * xc.x() * inv_z;
  adj->d_fy += d_pixel[1] * xc.y() * inv_z;
  Vec3 d_xc;
  d_xc.x() = d_pixel[0] * cam.fx * inv_z;
  d_xc.y() = d_pixel[1] * cam.fy * inv_z;
  d_xc.z() = -(d_pixel[0] * cam.fx * xc.x() + d_pixel[1] * cam.fy * xc.y()) *
             inv_z * inv_z;
  adj->d_t += d_xc;
  adj->d_R.noalias() += d_xc * X.transpose();
  adj->d_X.noalias() += cam.R.transpose() * d_xc;
}

Ray pixel_ray(const CameraIntrinsics& k, const CameraExtrinsics& e, const Vec2& pixel) {
  const Vec3 dir_cam((pixel.x() - k.cx()) / k.fx, (pixel.y() - k.cy()) / k.fy, 1.0);
  const Mat3 R = e.R();
  Ray r;
  r.l = (R.transpose() * dir_cam).normalized();
  const Vec3 c = -(R.transpose() * e.translation);
  r.n = c.cross(r.l);
  return r;
}

double ray_coplanarity(const Ray& a, const Ray& b) {
  return a.n.dot(b.l) + b.n.dot(a.l);
}

Vec3 triangulate(const std::vector<Ray>& rays) {
  if (rays.size() < 2)
    raise(ErrorCode::DegenerateRays, "triangulation needs at least two rays");
  Mat3 A = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const Ray& r : rays) {
    const Mat3 P = Mat3::Identity() - r.l * r.l.transpose();
    // Point on the ray closest to the origin: l x n.
    const Vec3 c0 = r.l.cross(r.n);
    A += P;
    b += P * c0;
  }
  const Eigen::JacobiSVD<Mat3> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()[2] < 1e-10)
    raise(ErrorCode::DegenerateRays, "rays are near-parallel; normal system singular");
  return svd.solve(b);
}

RigidAlign align_rigid(const Points3& src, const Points3& dst, bool with_scale) {
  if (src.rows() != dst.rows())
    raise(ErrorCode::JointSetMismatch, "point sets differ in size");
  const Index n = src.rows();
  if (n < 3)
    raise(ErrorCode::DegenerateConfiguration, "alignment needs at least 3 points");

  const Eigen::RowVector3d mu_s = src.colwise().mean();
  const Eigen::RowVector3d mu_d = dst.colwise().mean();
  const Points3 X = src.rowwise() - mu_s;
  const Points3 Y = dst.rowwise() - mu_d;

  const Mat3 H = X.transpose() * Y;  // sum x_i y_i^T
  const Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv[1] < 1e-12 * std::max(1.0, sv[0]))
    raise(ErrorCode::DegenerateConfiguration,
          "points are near-collinear; rotation not unique");

  Mat3 D = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
  RigidAlign out;
  out.R = svd.matrixV() * D * svd.matrixU().transpose();

  if (with_scale) {
    const double denom = X.squaredNorm();
    if (denom < 1e-18)
      raise(ErrorCode::DegenerateConfiguration, "source points are coincident");
    out.s = (sv.asDiagonal() * D).trace() / denom;
  }
  out.t = mu_d.transpose() - out.s * (out.R * mu_s.transpose());

  double se = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vec3 e = out.s * (out.R * src.row(i).transpose()) + out.t -
                   dst.row(i).transpose();
    se += e.squaredNorm();
  }
  out.rms = std::sqrt(se / double(n));
  return out;
}

Mat3 rotation_mean(const std::vector<Mat3>& rotations) {
  if (rotations.empty())
    raise(ErrorCode::IllConditionedMean, "no rotations to average");
  Mat3 M = Mat3::Zero();
  for (const Mat3& R : rotations) M += R;
  M /= double(rotations.size());
  const Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()[2] < 1e-6)
    raise(ErrorCode::IllConditionedMean,
          "rotations too dispersed; mean is rank-deficient");
  Mat3 D = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
  return svd.matrixU() * D * svd.matrixV().transpose();
}

Vec3 regress_translation(const CameraIntrinsics& k, const Mat3& R,
                         const Points3& world, const Points2& pixels) {
  if (world.rows() != pixels.rows())
    raise(ErrorCode::JointSetMismatch, "points and pixels differ in count");
  if (world.rows() < 2)
    raise(ErrorCode::DegenerateConfiguration, "need at least two points");
  const Mat3 Khat = Vec3(k.fx, k.fy, 1.0).asDiagonal();
  MatX A(3 * world.rows(), 3);
  VecX b(3 * world.rows());
  for (Index i = 0; i < world.rows(); ++i) {
    const Vec3 phat(pixels(i, 0) - k.cx(), pixels(i, 1) - k.cy(), 1.0);
    const Mat3 S = skew(phat);
    A.middleRows<3>(3 * i) = S * Khat;
    b.segment<3>(3 * i) = -(S * (Khat * (R * world.row(i).transpose())));
  }
  const Eigen::JacobiSVD<MatX> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecX sv = svd.singularValues();
  if (sv[2] < 1e-10 * std::max(1.0, sv[0]))
    raise(ErrorCode::DegenerateConfiguration,
          "translation not observable from given points");
  return svd.solve(b);
}

CameraExtrinsics look_at_extrinsics(const Vec3& position, const Vec3& target) {
  const Vec3 fwd = (target - position).normalized();
  if (fwd.norm() < 0.5)
    raise(ErrorCode::DegenerateConfiguration, "camera position equals target");
  Vec3 right = fwd.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) right = fwd.cross(Vec3::UnitY());  // looking straight up/down
  right.normalize();
  const Vec3 down = fwd.cross(right);
  Mat3 R;
  R.row(0) = right;
  R.row(1) = down;
  R.row(2) = fwd;
  CameraExtrinsics e;
  e.rotation = matrix_to_axis_angle(R);
  e.translation = -(R * position);
  return e;
}

}  // namespace mocap
