#include "evcal/calibrate.hpp"

#include "evcal/errors.hpp"
#include "evcal/resample.hpp"

namespace evcal {

namespace {

template <typename F>
auto staged(const char* stage, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ParseError(std::string(stage) + ": " + e.what());
  } catch (const PreconditionError& e) {
    throw PreconditionError(std::string(stage) + ": " + e.what());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string(stage) + ": " + e.what());
  }
}

}  // namespace

CalibrationOutcome calibrate(const SensorTrack& event_track,
                             const std::vector<SensorTrack>& other_tracks,
                             const CalibrateConfig& cfg) {
  if (!event_track.has_rate_samples()) {
    throw PreconditionError("calibrate: event track must carry rate samples");
  }
  if (other_tracks.empty()) {
    throw PreconditionError("calibrate: need at least one non-event sensor track");
  }

  CalibrationOutcome out;
  out.init_only = cfg.init_only;
  std::map<std::string, SensorParameters> init;

  for (const auto& track : other_tracks) {
    SensorResult sr;
    sr.id = track.id;
    sr.kind = track.kind;

    // Pair correlation runs on rate tracks; rotation-pair sensors
    // contribute midpoint rates.
    SensorTrack rates = track;
    if (!track.has_rate_samples()) {
      staged(("cca[" + track.id + "]").c_str(), [&] {
        rates.samples = relative_track_to_omega(track.relative_rotations);
        rates.relative_rotations.clear();
        return 0;
      });
    }
    sr.cca = staged(("cca[" + track.id + "]").c_str(),
                    [&] { return cca_initialize(event_track, rates, cfg.cca); });
    sr.init.extrinsic = sr.cca.rotation;
    sr.init.offset = sr.cca.tau;
    sr.refined = sr.init;
    init[track.id] = sr.init;
    out.sensors[track.id] = sr;
  }

  auto problem = staged("build", [&] {
    return CalibrationProblem(event_track, other_tracks, init, cfg.refine);
  });
  for (auto& [id, sr] : out.sensors) {
    sr.excluded_terms = problem.excluded_terms(id);
  }

  if (!cfg.init_only) {
    out.summary = staged("optimize", [&] { return problem.optimize(); });
    for (auto& [id, sr] : out.sensors) {
      sr.refined = problem.state().sensors.at(id);
    }
  }
  out.residuals = problem.evaluate();
  out.trajectory = problem.state().spline;
  return out;
}

}  // namespace evcal
