#include "evcal/so3.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace evcal {
namespace so3 {

Mat3 hat(const Vec3& v) {
  Mat3 S;
  S << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return S;
}

Vec3 vee(const Mat3& S) {
  return Vec3(S(2, 1), S(0, 2), S(1, 0));
}

Mat3 exp(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;  // R = I + a*[v]x + b*[v]x^2
  if (theta < 1e-6) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 S = hat(v);
  return Mat3::Identity() + a * S + b * S * S;
}

Vec3 log(const Mat3& R) {
  const Vec3 w = vee(R - R.transpose());  // = 2 sin(theta) * axis
  const double s = 0.5 * w.norm();
  const double c = 0.5 * (R.trace() - 1.0);
  const double theta = std::atan2(s, std::min(1.0, std::max(-1.0, c)));

  if (theta < 1e-8) {
    return 0.5 * w;
  }
  if (theta < M_PI - 1e-3) {
    return (0.5 * theta / std::sin(theta)) * w;
  }

  // Near pi: recover the axis from the symmetric part. R = c*I + s*[a]x +
  // (1-c)*a*a', so diag(a*a') = (diag(R) - c) / (1 - c).
  const double omc = 1.0 - c;
  Vec3 axis;
  int pivot = 0;
  Vec3 d((R(0, 0) - c) / omc, (R(1, 1) - c) / omc, (R(2, 2) - c) / omc);
  d.maxCoeff(&pivot);
  axis[pivot] = std::sqrt(std::max(0.0, d[pivot]));
  for (int j = 0; j < 3; ++j) {
    if (j != pivot) {
      axis[j] = 0.5 * (R(pivot, j) + R(j, pivot)) / (omc * axis[pivot]);
    }
  }
  axis.normalize();

  // Orient the axis: by the antisymmetric part when it is informative,
  // otherwise (angle == pi) by the first-positive-component rule.
  if (w.norm() > 1e-12) {
    if (axis.dot(w) < 0.0) axis = -axis;
  } else {
    for (int j = 0; j < 3; ++j) {
      if (std::abs(axis[j]) > 1e-12) {
        if (axis[j] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return theta * axis;
}

Mat3 right_jacobian(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 S = hat(v);
  double a, b;  // Jr = I - a*[v]x + b*[v]x^2
  if (theta < 1e-5) {
    a = 0.5 - theta2 / 24.0;
    b = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    a = (1.0 - std::cos(theta)) / theta2;
    b = (theta - std::sin(theta)) / (theta2 * theta);
  }
  return Mat3::Identity() - a * S + b * S * S;
}

Mat3 right_jacobian_inv(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Mat3 S = hat(v);
  double b;  // Jr_inv = I + 0.5*[v]x + b*[v]x^2
  if (theta < 1e-5) {
    b = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    b = 1.0 / theta2 - (1.0 + std::cos(theta)) / (2.0 * theta * std::sin(theta));
  }
  return Mat3::Identity() + 0.5 * S + b * S * S;
}

bool is_rotation(const Mat3& R, double tol) {
  const Mat3 E = R.transpose() * R - Mat3::Identity();
  return E.cwiseAbs().maxCoeff() <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Mat3 project(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Mat3 D = Mat3::Identity();
    D(2, 2) = -1.0;
    R = svd.matrixU() * D * svd.matrixV().transpose();
  }
  return R;
}

}  // namespace so3
}  // namespace evcal
