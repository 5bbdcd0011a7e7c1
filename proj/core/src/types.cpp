#include "evcal/types.hpp"

#include "evcal/errors.hpp"
#include "evcal/so3.hpp"

namespace evcal {

Mat3 RelativeRotationSample::rotation() const { return so3::exp(rotvec); }

std::string to_string(SensorKind k) {
  switch (k) {
    case SensorKind::Event: return "event";
    case SensorKind::Imu: return "imu";
    case SensorKind::Frame: return "frame";
    case SensorKind::Lidar: return "lidar";
  }
  return "unknown";
}

SensorKind sensor_kind_from_string(const std::string& s) {
  if (s == "event") return SensorKind::Event;
  if (s == "imu") return SensorKind::Imu;
  if (s == "frame") return SensorKind::Frame;
  if (s == "lidar") return SensorKind::Lidar;
  throw ParseError("unknown sensor kind: '" + s + "'");
}

double SensorTrack::begin_time() const {
  if (!samples.empty()) return samples.front().t;
  if (!relative_rotations.empty()) return relative_rotations.front().t_i;
  throw PreconditionError("SensorTrack::begin_time: empty track");
}

double SensorTrack::end_time() const {
  if (!samples.empty()) return samples.back().t;
  if (!relative_rotations.empty()) return relative_rotations.back().t_j;
  throw PreconditionError("SensorTrack::end_time: empty track");
}

}  // namespace evcal
