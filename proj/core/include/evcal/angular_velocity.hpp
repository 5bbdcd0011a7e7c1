#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evcal/camera.hpp"
#include "evcal/normal_flow.hpp"
#include "evcal/types.hpp"

namespace evcal {

struct RansacConfig {
  int max_iterations = 200;
  double threshold_floor = 0.1;     // px/s, on the norm-scaled residual
  double mad_scale = 1.5;           // threshold = max(floor, scale * median |res|)
  double min_inlier_fraction = 0.5;
  int min_observations = 10;
  double confidence = 0.99;         // adaptive early-exit
  std::uint64_t seed = 1;
};

/// Rotation-only motion-field solve over normal-flow observations:
///   n' * S * B(x_n) * w = ||n||^2,  S = diag(fx, fy),
/// (each row scaled by 1/||n|| inside the solver),
///   B(x_n) = [[x y, -(1+x^2), y], [1+y^2, -x y, -x]],
/// with x_n the undistorted normalized coordinates of the observation
/// pixel. RANSAC (minimal sample 3) guards against outlier flows; the best
/// model is refit on its consensus set.
///
/// Throws PreconditionError for too few observations, support below
/// min_inlier_fraction, or a rank-deficient inlier set.
AngularVelocitySample estimate_angular_velocity(
    const std::vector<NormalFlowObservation>& obs, const CameraIntrinsics& K,
    double t_mid, const RansacConfig& cfg = {});

struct TrackConfig {
  double window = 0.010;       // s
  double stride = 0.010;       // s
  double history = 0.050;      // s of surface history before each window
  double discard_fraction = 0.20;
  double max_age = 0.0;        // s; 0 = auto (2x median per-pixel inter-event time)
  PlaneFitConfig plane;
  NormalFlowConfig flow;
  RansacConfig ransac;
  std::uint64_t seed = 1;
};

struct WindowFailure {
  int window_index = 0;
  double t_mid = 0.0;
  std::string reason;
};

struct TrackReport {
  int windows_total = 0;
  int windows_ok = 0;
  std::vector<WindowFailure> failures;
};

/// Run the full normal-flow pipeline per window (surface, plane fits,
/// variance filter, RANSAC solve); samples are stamped at window midpoints.
/// Windows that fail a stage are skipped and reported. RANSAC randomness is
/// derived per-window from (seed, window index), so results do not depend
/// on evaluation order.
std::vector<AngularVelocitySample> angular_velocity_track(
    std::span<const Event> events, const CameraIntrinsics& K,
    const TrackConfig& cfg = {}, TrackReport* report = nullptr);

}  // namespace evcal
