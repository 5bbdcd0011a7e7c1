#pragma once

#include <span>
#include <string>
#include <vector>

#include "evcal/types.hpp"

namespace evcal {

/// Event stream with sensor geometry.
struct EventStream {
  int width = 0;
  int height = 0;
  std::vector<Event> events;
};

/// Text format: header "# events width=W height=H", then "t x y p" per line
/// (p in {0,1}, mapped to -1/+1). Binary twin: magic "EVT1", u16 width,
/// u16 height, then packed little-endian records
/// { f64 t, u16 x, u16 y, i8 p, 1 pad byte }.
EventStream load_events(const std::string& path);
void save_events_text(const std::string& path, const EventStream& stream);
void save_events_binary(const std::string& path, const EventStream& stream);

struct TrackLoadOptions {
  /// Invert relative rotations on load (producer used the opposite of the
  /// documented later-from-earlier convention).
  bool invert_relative_rotations = false;
};

/// Load a motion track. Gyro CSV rows are "t,wx,wy,wz"; relative-rotation
/// CSV rows are "t_i,t_j,rx,ry,rz" (rotation vector of the later-from-
/// earlier relative rotation). '#' comments carry sensor id / kind /
/// convention tags. Duplicate or decreasing timestamps are rejected with
/// the offending line number.
SensorTrack load_track(const std::string& path, SensorKind kind,
                       const TrackLoadOptions& opts = {});

void save_track(const std::string& path, const SensorTrack& track);

/// Angular-velocity track CSV: "t,wx,wy,wz,inliers,support".
void save_omega_track_csv(const std::string& path, const std::string& sensor_id,
                          std::span<const AngularVelocitySample> samples);
std::vector<AngularVelocitySample> load_omega_track_csv(const std::string& path);

}  // namespace evcal
