#pragma once

#include <Eigen/Core>

namespace evcal {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;

namespace so3 {

/// Skew-symmetric matrix [v]x such that [v]x * w = v.cross(w).
Mat3 hat(const Vec3& v);

/// Inverse of hat for a skew-symmetric matrix (vee operator).
Vec3 vee(const Mat3& S);

/// Exponential map so(3) -> SO(3) via the Rodrigues formula.
/// Uses the series expansion of the coefficients for small angles.
Mat3 exp(const Vec3& v);

/// Principal logarithm SO(3) -> so(3), ||result|| <= pi.
/// At an angle of exactly pi the axis sign is ambiguous; the axis whose
/// first nonzero component is positive is returned.
Vec3 log(const Mat3& R);

/// Right Jacobian of SO(3): exp(v + dv) = exp(v) * exp(Jr(v) * dv) + O(dv^2).
Mat3 right_jacobian(const Vec3& v);

/// Inverse right Jacobian: log(exp(v) * exp(dv)) = v + Jr_inv(v) * dv + O(dv^2).
Mat3 right_jacobian_inv(const Vec3& v);

/// True when R'R = I and det(R) = 1 within tol (per entry).
bool is_rotation(const Mat3& R, double tol = 1e-10);

/// Nearest rotation matrix in the Frobenius sense (SVD projection).
Mat3 project(const Mat3& M);

}  // namespace so3
}  // namespace evcal
