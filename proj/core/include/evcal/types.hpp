#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evcal/so3.hpp"

namespace evcal {

/// One asynchronous pixel brightness-change observation.
struct Event {
  double t = 0.0;   // seconds
  int x = 0;        // pixel column, 0 <= x < width
  int y = 0;        // pixel row, 0 <= y < height
  int polarity = 1; // +1 or -1
};

/// A sensor's first-order kinematic state at a timestamp.
struct AngularVelocitySample {
  double t = 0.0;          // seconds, sensor clock
  Vec3 omega = Vec3::Zero();  // rad/s, sensor body frame
  int inlier_count = 0;    // only meaningful for event-flow estimates
  double support = 0.0;    // inlier fraction of the RANSAC solve
  double sigma = 0.0;      // per-axis 1-sigma of the estimate, rad/s (0 = unknown)
};

/// Relative rotation over an interval [t_i, t_j], stored as the rotation
/// vector of the map from the sensor frame at t_i into the frame at t_j
/// (the convention of the rotation-pair residuals; see the file-format
/// docs). The vector is the canonical representation so files round-trip
/// exactly.
struct RelativeRotationSample {
  double t_i = 0.0;
  double t_j = 0.0;
  Vec3 rotvec = Vec3::Zero();

  Mat3 rotation() const;
};

enum class SensorKind { Event, Imu, Frame, Lidar };

std::string to_string(SensorKind k);
SensorKind sensor_kind_from_string(const std::string& s);

/// A loaded per-sensor motion track. Exactly one of `samples` /
/// `relative_rotations` is populated depending on the sensor kind.
struct SensorTrack {
  std::string id;
  SensorKind kind = SensorKind::Imu;
  std::vector<AngularVelocitySample> samples;
  std::vector<RelativeRotationSample> relative_rotations;
  double native_rate_hz = 0.0;

  bool has_rate_samples() const { return !samples.empty(); }
  double begin_time() const;
  double end_time() const;
};

}  // namespace evcal
