#pragma once

#include <array>
#include <vector>

#include "evcal/so3.hpp"

namespace evcal {

/// Cumulative cubic B-spline basis at normalized segment time u in [0, 1):
/// B(u) = (1/6) * M * (1, u, u^2, u^3)', with
///   M = [6 0 0 0; 5 3 -3 1; 1 3 3 -2; 0 0 0 1].
/// Component 0 is always 1 and components are non-increasing in index.
/// Throws PreconditionError for u outside [0, 1).
Vec4 cumulative_basis(double u);

/// d/du and d2/du2 of cumulative_basis (no domain check; internal helpers
/// the derivative formulas share with the tests).
Vec4 cumulative_basis_d1(double u);
Vec4 cumulative_basis_d2(double u);

/// Jacobians of a spline query with respect to right-multiplicative
/// increments of the four active control poses P_i .. P_i+3, where
/// i = first_pose. d(quantity) / d(eps_k), P_k <- P_k * exp(eps_k).
struct SplineJacobian {
  int first_pose = 0;
  std::array<Mat3, 4> d_pose;  // right-tangent of R(t) per control pose
};

struct SplineVelocityJacobian {
  int first_pose = 0;
  std::array<Mat3, 4> d_pose;  // d omega(t) / d eps_k
};

/// Uniform cumulative cubic B-spline on SO(3).
///
/// Control poses P_0..P_n live on the knot grid t0 + k*dt. A query at time
/// t inside segment i = floor((t - t0)/dt) uses P_{i-1}..P_{i+2}:
///   R(t) = P_{i-1} * exp(B_1(u) W_1) * exp(B_2(u) W_2) * exp(B_3(u) W_3),
///   W_m  = log(P_{i-2+m}' * P_{i-1+m}),   u = (t - t0)/dt - i.
/// The spline is evaluable exactly on [t0 + dt, t0 + (n-2)*dt]; queries
/// outside throw PreconditionError.
class So3Spline {
public:
  So3Spline() = default;
  So3Spline(double t0, double knot_interval, std::vector<Mat3> control_poses);

  double t0() const { return t0_; }
  double knot_interval() const { return dt_; }
  const std::vector<Mat3>& control_poses() const { return poses_; }
  std::vector<Mat3>& control_poses() { return poses_; }
  int num_poses() const { return static_cast<int>(poses_.size()); }

  double min_time() const { return t0_ + dt_; }
  double max_time() const { return t0_ + (num_poses() - 3) * dt_; }
  bool contains(double t) const { return t >= min_time() && t <= max_time(); }

  /// Rotation at time t (world-from-body).
  Mat3 evaluate(double t) const;
  Mat3 evaluate(double t, SplineJacobian* jac) const;

  /// Body-frame angular velocity: Rdot(t) = R(t) * hat(omega).
  Vec3 angular_velocity(double t) const;
  Vec3 angular_velocity(double t, SplineVelocityJacobian* jac) const;

  /// Body-frame angular acceleration d(omega)/dt (drives the time-offset
  /// derivatives in the refinement).
  Vec3 angular_acceleration(double t) const;

private:
  struct Segment {
    int i = 0;     // segment index; active poses are i-1 .. i+2
    double u = 0;  // normalized time in [0, 1)
  };
  Segment locate(double t) const;

  double t0_ = 0.0;
  double dt_ = 0.1;
  std::vector<Mat3> poses_;
};

}  // namespace evcal
