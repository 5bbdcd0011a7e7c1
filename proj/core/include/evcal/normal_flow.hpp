#pragma once

#include <optional>
#include <vector>

#include "evcal/time_surface.hpp"

namespace evcal {

/// Local plane t = a*x + b*y + c fitted to time-surface samples around a
/// center pixel (coordinates centered there). `cov` is the coefficient
/// covariance rss * (X'X)^-1 / (N - 3); `rss` the raw residual sum of squares.
struct PlaneFit {
  double a = 0.0, b = 0.0, c = 0.0;  // a, b in s/px; c in s (absolute time)
  Mat3 cov = Mat3::Zero();
  int support = 0;    // N, samples used
  double rss = 0.0;   // s^2
};

enum class FlowReject {
  None,
  InsufficientSupport,   // fewer than min_support usable neighbors
  DegenerateGeometry,    // X'X condition number too large
  NearZeroGradient,      // a^2 + b^2 below the plausibility floor
};

const char* to_string(FlowReject r);

struct PlaneFitConfig {
  int radius = 2;           // Chebyshev neighborhood radius (5x5 default)
  double max_age = 0.05;    // s; neighbors older than center_t - max_age are skipped
  int min_support = 8;
  double max_condition = 1e8;
};

struct PlaneFitResult {
  std::optional<PlaneFit> fit;
  FlowReject reject = FlowReject::None;
};

/// Least-squares plane through the (x, y, t) triples of same-polarity
/// neighbors within `radius` of the center pixel and within `max_age` of
/// its timestamp.
PlaneFitResult fit_local_plane(const TimeSurface& surface, int x, int y,
                               const PlaneFitConfig& cfg = {});

/// Per-pixel normal flow with propagated variance of its norm.
struct NormalFlowObservation {
  Vec2 pixel = Vec2::Zero();   // px, event coordinates
  double t = 0.0;              // s
  Vec2 flow = Vec2::Zero();    // px/s; n = (a,b) / (a^2 + b^2)
  double var_norm = 0.0;       // Var(||n||), (px/s)^2
};

struct NormalFlowConfig {
  double max_flow = 4e3;  // px/s; gradient floor is 1/max_flow
};

struct NormalFlowResult {
  std::optional<NormalFlowObservation> obs;
  FlowReject reject = FlowReject::None;
};

/// Flow from a plane fit: n = grad / ||grad||^2 with grad = (a, b), and
/// Var(||n||) by linearizing ||n|| = (a^2+b^2)^-1/2 through the fit
/// covariance.
NormalFlowResult normal_flow(const PlaneFit& fit, const Vec2& pixel, double t,
                             const NormalFlowConfig& cfg = {});

/// Drop the ceil(fraction * N) observations with the largest variance.
/// Survivors keep their input order; ties are broken so the earlier
/// timestamp survives. Throws PreconditionError on empty input.
std::vector<NormalFlowObservation> filter_by_variance(
    const std::vector<NormalFlowObservation>& obs, double discard_fraction = 0.20);

}  // namespace evcal
