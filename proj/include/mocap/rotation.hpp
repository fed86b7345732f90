#pragma once

#include "mocap/types.hpp"

namespace mocap {

using Vec6 = Eigen::Matrix<double, 6, 1>;

Mat3 skew(const Vec3& v);

// Continuous 6D rotation parameterization: Gram-Schmidt of two 3-vectors,
// first column along the (normalized) first vector, third column their cross
// product. Throws DegenerateRotation when a norm underflows or the two
// vectors are parallel.
Mat3 rot6d_to_matrix(const Vec6& r);

// First two columns of R. Throws NotARotation if R fails orthonormality or
// det(R) > 0 checks (tolerance 1e-6).
Vec6 matrix_to_rot6d(const Mat3& R);

// Adjoint of rot6d_to_matrix: maps dL/dR to dL/dr.
Vec6 rot6d_to_matrix_backward(const Vec6& r, const Mat3& dR);

// Rodrigues exponential and its adjoint.
Mat3 axis_angle_to_matrix(const Vec3& w);
Vec3 matrix_to_axis_angle(const Mat3& R);
Vec3 axis_angle_to_matrix_backward(const Vec3& w, const Mat3& dR);

// Nearest rotation in Frobenius norm (SVD sign-corrected).
Mat3 project_to_rotation(const Mat3& M);

bool is_rotation(const Mat3& R, double tol = 1e-6);

// Geodesic angle of R in radians.
double rotation_angle(const Mat3& R);

// Geodesic distance between two rotations in degrees.
double rotation_geodesic_deg(const Mat3& A, const Mat3& B);

}  // namespace mocap
