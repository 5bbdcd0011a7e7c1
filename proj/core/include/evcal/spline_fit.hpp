#pragma once

#include <span>

#include "evcal/spline.hpp"
#include "evcal/types.hpp"

namespace evcal {

struct SplineFitOptions {
  double knot_interval = 0.1;  // s
  double margin = 0.0;         // s of extra evaluable span on both ends
  int max_iterations = 15;     // Gauss-Newton polish iterations
  double tolerance = 1e-12;    // relative cost decrease
};

struct SplineFitResult {
  So3Spline spline;
  double velocity_rms = 0.0;  // rad/s against the input samples
};

/// Fit a trajectory to body-rate samples: control poses are seeded by
/// integrating the rates (constant-rate continuation inside the margins),
/// then polished by damped Gauss-Newton on the velocity residuals. The
/// highest control-pose index n is ceil(span / dt) + 3 so the evaluable
/// span covers the samples plus margin.
///
/// Requires time-sorted samples spanning >= 4 knot intervals.
SplineFitResult fit_spline_to_samples(std::span<const AngularVelocitySample> samples,
                                      const SplineFitOptions& opts = {});

/// Convenience overload: relative rotations are converted to midpoint rates
/// first (O(dt^2) accurate).
SplineFitResult fit_spline_to_samples(std::span<const RelativeRotationSample> samples,
                                      const SplineFitOptions& opts = {});

}  // namespace evcal
