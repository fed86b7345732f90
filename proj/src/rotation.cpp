#include "mocap/rotation.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "mocap/error.hpp"

namespace mocap {

namespace {
constexpr double kDegenerateNorm = 1e-8;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 rot6d_to_matrix(const Vec6& r) {
  const Vec3 a = r.head<3>();
  const Vec3 b = r.tail<3>();
  const double na = a.norm();
  if (na < kDegenerateNorm)
    raise(ErrorCode::DegenerateRotation, "first 6d vector has near-zero norm");
  const Vec3 c1 = a / na;
  const Vec3 u = b - c1.dot(b) * c1;
  const double nu = u.norm();
  if (nu < kDegenerateNorm)
    raise(ErrorCode::DegenerateRotation, "6d vectors are near-parallel");
  const Vec3 c2 = u / nu;
  Mat3 R;
  R.col(0) = c1;
  R.col(1) = c2;
  R.col(2) = c1.cross(c2);
  return R;
}

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  if ((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return R.determinant() > 0.0;
}

Vec6 matrix_to_rot6d(const Mat3& R) {
  if (!is_rotation(R))
    raise(ErrorCode::NotARotation, "matrix is not orthonormal with det +1");
  Vec6 r;
  r.head<3>() = R.col(0);
  r.tail<3>() = R.col(1);
  return r;
}

Vec6 rot6d_to_matrix_backward(const Vec6& r, const Mat3& dR) {
  const Vec3 a = r.head<3>();
  const Vec3 b = r.tail<3>();
  const double na = a.norm();
  const Vec3 c1 = a / na;
  const Vec3 u = b - c1.dot(b) * c1;
  const double nu = u.norm();
  const Vec3 c2 = u / nu;

  const Vec3 g1 = dR.col(0);
  const Vec3 g2 = dR.col(1);
  const Vec3 g3 = dR.col(2);

  // c3 = c1 x c2: d/dc1 = -[c2]x, d/dc2 = [c1]x.
  const Vec3 gc2 = g2 - c1.cross(g3);
  const Vec3 gu = (gc2 - c2.dot(gc2) * c2) / nu;
  const Vec3 gb = gu - c1.dot(gu) * c1;
  const Vec3 gc1 = g1 + c2.cross(g3) - (b * c1.dot(gu) + c1.dot(b) * gu);
  const Vec3 ga = (gc1 - c1.dot(gc1) * c1) / na;

  Vec6 g;
  g.head<3>() = ga;
  g.tail<3>() = gb;
  return g;
}

Mat3 axis_angle_to_matrix(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  double alpha;  // sin(t)/t
  double beta;   // (1-cos(t))/t^2
  if (theta2 < 1e-16) {
    alpha = 1.0 - theta2 / 6.0;
    beta = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    alpha = std::sin(theta) / theta;
    beta = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 K = skew(w);
  return Mat3::Identity() + alpha * K + beta * (K * K);
}

Vec3 matrix_to_axis_angle(const Mat3& R) {
  if (!is_rotation(R))
    raise(ErrorCode::NotARotation, "matrix is not orthonormal with det +1");
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

Vec3 axis_angle_to_matrix_backward(const Vec3& w, const Mat3& dR) {
  const double theta2 = w.squaredNorm();
  Vec3 g;
  if (theta2 < 1e-14) {
    // d exp([w]x) / dw_k -> [e_k]x at w = 0.
    g.x() = dR(2, 1) - dR(1, 2);
    g.y() = dR(0, 2) - dR(2, 0);
    g.z() = dR(1, 0) - dR(0, 1);
    return g;
  }
  const Mat3 R = axis_angle_to_matrix(w);
  const Mat3 ImR = Mat3::Identity() - R;
  const Mat3 K = skew(w);
  for (int k = 0; k < 3; ++k) {
    const Vec3 v = w.cross(ImR.col(k));
    const Mat3 dRk = ((w[k] * K + skew(v)) / theta2) * R;
    g[k] = (dR.array() * dRk.array()).sum();
  }
  return g;
}

Mat3 project_to_rotation(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Mat3 D = Mat3::Identity();
    D(2, 2) = -1.0;
    R = svd.matrixU() * D * svd.matrixV().transpose();
  }
  return R;
}

double rotation_angle(const Mat3& R) {
  // ||R - I||_F^2 = 8 sin^2(theta/2): the asin form stays accurate near 0,
  // where acos((tr-1)/2) loses half the significant digits.
  const double s = (R - Mat3::Identity()).norm() / (2.0 * std::numbers::sqrt2);
  if (s <= 0.70710678118654752) return 2.0 * std::asin(std::min(1.0, s));
  const double c = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

double rotation_geodesic_deg(const Mat3& A, const Mat3& B) {
  return rotation_angle(A.transpose() * B) * 180.0 / EIGEN_PI;
}

}  // namespace mocap
