#pragma once

#include <span>
#include <vector>

#include "evcal/types.hpp"

namespace evcal {

enum class CubicBoundary {
  NotAKnot,  // reproduces cubic polynomials exactly (default)
  Natural,   // zero second derivative at the ends
};

/// Component-wise cubic spline interpolant through (t_k, value_k) knots.
/// Exact at the knots; queries outside the knot span throw.
class CubicInterpolant {
public:
  CubicInterpolant(std::vector<double> times, std::vector<Vec3> values,
                   CubicBoundary boundary = CubicBoundary::NotAKnot);

  double min_time() const { return t_.front(); }
  double max_time() const { return t_.back(); }
  Vec3 operator()(double t) const;

private:
  std::vector<double> t_;
  std::vector<Vec3> y_;
  std::vector<Vec3> m_;  // second derivatives at the knots
};

/// Midpoint angular velocity of a relative-rotation sample:
///   omega = log(R^{-1}) / (t_j - t_i), stamped at (t_i + t_j) / 2,
/// which equals the true body rate for constant-rate motion. Throws when
/// the rotation angle reaches pi (ambiguous log; sample finer).
AngularVelocitySample relative_to_omega(const RelativeRotationSample& s);

/// Convert a whole relative-rotation track to midpoint rate samples.
std::vector<AngularVelocitySample> relative_track_to_omega(
    const std::vector<RelativeRotationSample>& rel);

/// Cubic interpolation of a rate track at the query times. Requires >= 4
/// samples and queries inside the track span.
std::vector<AngularVelocitySample> resample_cubic(
    const SensorTrack& track, std::span<const double> times,
    CubicBoundary boundary = CubicBoundary::NotAKnot);

}  // namespace evcal
