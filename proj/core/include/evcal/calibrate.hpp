#pragma once

#include <map>
#include <string>
#include <vector>

#include "evcal/cca.hpp"
#include "evcal/refine.hpp"

namespace evcal {

struct CalibrateConfig {
  CcaConfig cca;
  RefineOptions refine;
  bool init_only = false;  // stop after the correlation-based initialization
};

struct SensorResult {
  std::string id;
  SensorKind kind = SensorKind::Imu;
  SensorParameters init;     // correlation-based estimate
  SensorParameters refined;  // after joint optimization (== init when init_only)
  CcaResult cca;
  int excluded_terms = 0;
};

struct CalibrationOutcome {
  std::map<std::string, SensorResult> sensors;
  ResidualReport residuals;  // at the reported state
  OptimizeSummary summary;   // empty when init_only
  So3Spline trajectory;
  bool init_only = false;
};

/// Full pipeline: per-pair correlation initialization, joint problem build,
/// nonlinear refinement. Exactly one event track (rate samples) plus at
/// least one other sensor. Stage failures are rethrown with a stage label.
CalibrationOutcome calibrate(const SensorTrack& event_track,
                             const std::vector<SensorTrack>& other_tracks,
                             const CalibrateConfig& cfg = {});

}  // namespace evcal
