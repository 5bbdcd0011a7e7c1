#pragma once

#include <optional>
#include <vector>

#include "evcal/resample.hpp"
#include "evcal/types.hpp"

namespace evcal {

/// Sample covariances of a pair of aligned 3-D rate signals, 1/(N-1)
/// normalization.
struct CovarianceSet {
  Mat3 ee = Mat3::Zero();  // auto-covariance of the event rates
  Mat3 oo = Mat3::Zero();  // auto-covariance of the other sensor's rates
  Mat3 eo = Mat3::Zero();  // cross-covariance, event rows
  Mat3 oe = Mat3::Zero();  // cross-covariance, other rows
  int n = 0;
  Vec3 mean_e = Vec3::Zero();
  Vec3 mean_o = Vec3::Zero();
};

/// Pair two rate tracks at candidate offset tau: a sample the other sensor
/// stamped t is treated as taken at event-clock time t + tau. The
/// lower-rate track is cubic-interpolated onto the higher-rate track's
/// grid restricted to the overlap (configurable).
struct PairingConfig {
  CubicBoundary boundary = CubicBoundary::NotAKnot;
  /// Force which grid wins: 0 = auto (higher rate), 1 = event grid,
  /// 2 = other sensor grid.
  int target_grid = 0;
};

struct PairedRates {
  std::vector<Vec3> event;  // event rates on the common grid
  std::vector<Vec3> other;  // offset-compensated other-sensor rates
  std::vector<double> times;  // common grid, event clock
};

PairedRates pair_tracks(const SensorTrack& event_track, const SensorTrack& other_track,
                        double tau, const PairingConfig& cfg = {});

/// Covariances over paired samples; requires N >= 10. Near-singular
/// auto-covariances (condition > 1e10) raise a degenerate-excitation error
/// naming the weak axis.
CovarianceSet covariances(const PairedRates& pairs);

/// Trace correlation r = sqrt(Tr(ee^-1 eo oo^-1 oe) / 3), clamped to [0,1].
struct TraceCorrelation {
  double value = 0.0;
  bool clamped = false;  // true when rounding pushed the raw value past 1
};
TraceCorrelation trace_correlation(const CovarianceSet& c);

struct CcaConfig {
  double search_range = 0.100;  // s, grid covers [-range, +range]
  double search_step = 0.010;   // s
  double min_overlap = 5.0;     // s required at every candidate offset
  PairingConfig pairing;
  double min_excitation_eig = 1e-4;  // (rad/s)^2 warning threshold on ee
};

struct CcaResult {
  std::vector<double> tau_grid;       // s
  std::vector<double> correlation;    // r(tau), same length
  double tau_grid_opt = 0.0;          // argmax over the grid
  double tau = 0.0;                   // after parabolic sub-step refinement
  Mat3 rotation = Mat3::Identity();   // R^e_o: omega_e = R * omega_o
  double correlation_opt = 0.0;       // r at the grid optimum
  bool correlation_clamped = false;
  bool weak_excitation = false;       // smallest eigenvalue of ee below threshold
  double min_excitation_eig = 0.0;
  int paired_samples = 0;             // N at the optimum
};

/// Exhaustive offset grid search of the trace correlation followed by one
/// parabolic refinement around the peak. A peak on the grid boundary is an
/// error (widen the range).
CcaResult search_time_offset(const SensorTrack& event_track, const SensorTrack& other_track,
                             const CcaConfig& cfg = {});

/// Extrinsic rotation at the optimum: SVD of oo^-1 * oe with the
/// determinant-corrected composition, oriented so that
/// omega_e = R * omega_o for offset-compensated samples. Requires
/// excitation about at least two axes; the error names the weak axis.
Mat3 extrinsic_rotation(const CovarianceSet& c);

/// Grid search plus rotation recovery at the refined offset.
CcaResult cca_initialize(const SensorTrack& event_track, const SensorTrack& other_track,
                         const CcaConfig& cfg = {});

}  // namespace evcal
