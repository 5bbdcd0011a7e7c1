#include "evcal/spline.hpp"
#include <Eigen/Geometry>

#include <cmath>
#include <utility>

#include "evcal/errors.hpp"

namespace evcal {

Vec4 cumulative_basis(double u) {
  if (!(u >= 0.0 && u < 1.0)) {
    throw PreconditionError("cumulative_basis: u outside [0,1)");
  }
  const double u2 = u * u;
  const double u3 = u2 * u;
  return Vec4(1.0,
              (5.0 + 3.0 * u - 3.0 * u2 + u3) / 6.0,
              (1.0 + 3.0 * u + 3.0 * u2 - 2.0 * u3) / 6.0,
              u3 / 6.0);
}

Vec4 cumulative_basis_d1(double u) {
  const double u2 = u * u;
  return Vec4(0.0,
              (3.0 - 6.0 * u + 3.0 * u2) / 6.0,
              (3.0 + 6.0 * u - 6.0 * u2) / 6.0,
              3.0 * u2 / 6.0);
}

Vec4 cumulative_basis_d2(double u) {
  return Vec4(0.0, u - 1.0, 1.0 - 2.0 * u, u);
}

So3Spline::So3Spline(double t0, double knot_interval, std::vector<Mat3> control_poses)
    : t0_(t0), dt_(knot_interval), poses_(std::move(control_poses)) {
  if (dt_ <= 0.0) {
    throw PreconditionError("So3Spline: knot interval must be > 0");
  }
  if (poses_.size() < 4) {
    throw PreconditionError("So3Spline: need at least 4 control poses");
  }
}

So3Spline::Segment So3Spline::locate(double t) const {
  if (!contains(t)) {
    throw PreconditionError("So3Spline: query time outside evaluable span");
  }
  const double s = (t - t0_) / dt_;
  int i = static_cast<int>(std::floor(s));
  // Clamp against floating-point edges; active poses are i-1 .. i+2.
  if (i < 1) i = 1;
  if (i > num_poses() - 3) i = num_poses() - 3;
  return Segment{i, s - i};
}

namespace {

struct SegmentTerms {
  Vec3 W[4];   // 1-based: W[1..3] pose increments
  Mat3 A[4];   // A[m] = exp(B_m(u) * W_m)
  Vec4 B, Bd1, Bd2;
};

SegmentTerms segment_terms(const std::vector<Mat3>& poses, int i, double u) {
  SegmentTerms s;
  s.B = cumulative_basis(u);
  s.Bd1 = cumulative_basis_d1(u);
  s.Bd2 = cumulative_basis_d2(u);
  for (int m = 1; m <= 3; ++m) {
    s.W[m] = so3::log(poses[i - 2 + m].transpose() * poses[i - 1 + m]);
    s.A[m] = so3::exp(s.B[m] * s.W[m]);
  }
  return s;
}

}  // namespace

Mat3 So3Spline::evaluate(double t) const {
  return evaluate(t, nullptr);
}

Mat3 So3Spline::evaluate(double t, SplineJacobian* jac) const {
  const Segment seg = locate(t);
  const SegmentTerms s = segment_terms(poses_, seg.i, seg.u);
  const Mat3 R = poses_[seg.i - 1] * s.A[1] * s.A[2] * s.A[3];

  if (jac) {
    jac->first_pose = seg.i - 1;
    // dW_m per right increment on the (left, right) pose of each pair:
    //   dW_m = Jr_inv(W_m) * (eps_right - X_m' * eps_left), X_m = exp(W_m);
    // and the A_m increment rightifies as Jr(B_m W_m) * B_m * dW_m.
    Mat3 Jinc[4], Jinv[4], Xt[4];
    for (int m = 1; m <= 3; ++m) {
      Jinc[m] = so3::right_jacobian(s.B[m] * s.W[m]) * s.B[m];
      Jinv[m] = so3::right_jacobian_inv(s.W[m]);
      Xt[m] = so3::exp(s.W[m]).transpose();
    }
    const Mat3 A23t = (s.A[2] * s.A[3]).transpose();
    const Mat3 A123t = A23t * s.A[1].transpose();
    const Mat3 G1 = A23t * Jinc[1];
    const Mat3 G2 = s.A[3].transpose() * Jinc[2];
    const Mat3& G3 = Jinc[3];
    jac->d_pose[0] = A123t - G1 * Jinv[1] * Xt[1];
    jac->d_pose[1] = G1 * Jinv[1] - G2 * Jinv[2] * Xt[2];
    jac->d_pose[2] = G2 * Jinv[2] - G3 * Jinv[3] * Xt[3];
    jac->d_pose[3] = G3 * Jinv[3];
  }
  return R;
}

Vec3 So3Spline::angular_velocity(double t) const {
  return angular_velocity(t, nullptr);
}

Vec3 So3Spline::angular_velocity(double t, SplineVelocityJacobian* jac) const {
  const Segment seg = locate(t);
  const SegmentTerms s = segment_terms(poses_, seg.i, seg.u);

  // omega = A3' * (A2' * (bd1 W1) + bd2 W2) + bd3 W3, bd_m = B'_m(u) / dt.
  const Vec4 bd = s.Bd1 / dt_;
  const Vec3 v1 = bd[1] * s.W[1];
  const Vec3 v2 = s.A[2].transpose() * v1 + bd[2] * s.W[2];
  const Vec3 omega = s.A[3].transpose() * v2 + bd[3] * s.W[3];

  if (jac) {
    jac->first_pose = seg.i - 1;
    Mat3 Jinv[4], Xt[4];
    for (int m = 1; m <= 3; ++m) {
      Jinv[m] = so3::right_jacobian_inv(s.W[m]);
      Xt[m] = so3::exp(s.W[m]).transpose();
    }
    // d omega / d W_m before chaining to pose increments.
    const Mat3 A3t = s.A[3].transpose();
    const Mat3 dW1 = A3t * s.A[2].transpose() * bd[1];
    const Mat3 dW2 =
        A3t * (so3::hat(s.A[2].transpose() * v1) * so3::right_jacobian(s.B[2] * s.W[2]) * s.B[2] +
               bd[2] * Mat3::Identity());
    const Mat3 dW3 =
        so3::hat(A3t * v2) * so3::right_jacobian(s.B[3] * s.W[3]) * s.B[3] +
        bd[3] * Mat3::Identity();
    jac->d_pose[0] = -dW1 * Jinv[1] * Xt[1];
    jac->d_pose[1] = dW1 * Jinv[1] - dW2 * Jinv[2] * Xt[2];
    jac->d_pose[2] = dW2 * Jinv[2] - dW3 * Jinv[3] * Xt[3];
    jac->d_pose[3] = dW3 * Jinv[3];
  }
  return omega;
}

Vec3 So3Spline::angular_acceleration(double t) const {
  const Segment seg = locate(t);
  const SegmentTerms s = segment_terms(poses_, seg.i, seg.u);

  const Vec4 bd = s.Bd1 / dt_;
  const Vec4 bdd = s.Bd2 / (dt_ * dt_);
  const Vec3 v1 = bd[1] * s.W[1];
  const Vec3 v2 = s.A[2].transpose() * v1 + bd[2] * s.W[2];
  const Vec3 a1 = bdd[1] * s.W[1];
  const Vec3 a2 = s.A[2].transpose() * (a1 + bd[2] * v1.cross(s.W[2])) + bdd[2] * s.W[2];
  const Vec3 a3 = s.A[3].transpose() * (a2 + bd[3] * v2.cross(s.W[3])) + bdd[3] * s.W[3];
  return a3;
}

}  // namespace evcal
