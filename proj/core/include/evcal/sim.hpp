#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "evcal/camera.hpp"
#include "evcal/spline.hpp"
#include "evcal/track_io.hpp"
#include "evcal/types.hpp"

namespace evcal {

/// Event-camera model of the simulator: landmarks are short oriented edge
/// segments of unit bearings; an edge point emits an event each time its
/// projected path accumulates `contrast_step_px` of pixel displacement.
struct EventCameraSim {
  CameraIntrinsics intrinsics;
  int landmarks = 100;
  int edge_points = 13;
  double edge_length_px = 10.0;
  double contrast_step_px = 1.0;   // px
  double timestamp_jitter = 1e-4;  // s, 1 sigma
  double spurious_rate_hz = 1000.0;
};

/// One simulated non-event sensor. `offset` is the calibration convention's
/// tau^e_o: a sample taken at event-clock time s is stamped s - offset.
struct SensorSim {
  std::string id;
  SensorKind kind = SensorKind::Imu;
  Mat3 extrinsic = Mat3::Identity();  // R^e_o
  double offset = 0.0;                // s
  double rate_hz = 200.0;
  double sigma = 0.0;   // IMU: rad/s per sample; pairs: rad per pair
  Vec3 gyro_bias = Vec3::Zero();
};

struct RigSpec {
  std::uint64_t seed = 1;
  double duration = 30.0;   // s of sensor data, event-clock [0, duration]
  double richness = 1.0;    // 0 = constant rate
  double trajectory_knot = 0.05;
  EventCameraSim event;
  std::vector<SensorSim> sensors;
};

/// Smooth pure-rotation trajectory: 3-6 seeded random-phase sinusoids per
/// axis (0.2-2 Hz), amplitudes scaled into the 1-3 rad/s peak range, fitted
/// to a spline whose evaluable span covers [-margin, duration + margin].
/// Redraws (deterministically) until the rate covariance is excited about
/// all three axes. richness 0 yields a constant-rate trajectory.
So3Spline gen_trajectory(std::uint64_t seed, double duration, double richness,
                         double knot_interval = 0.05, double margin = 0.5);

/// Events from tracing every landmark's projected pixel path under the
/// trajectory; polarity follows the dominant motion direction; spurious
/// events arrive as a Poisson process over random pixels. Sorted by time.
EventStream simulate_events(const So3Spline& trajectory, const EventCameraSim& cam,
                            double duration, std::uint64_t seed);

/// Gyro samples: omega(t_stamp) = R' * w(s) - bias + noise with s the
/// event-clock sampling instant and t_stamp = s - offset. Ground truth
/// zeroes the IMU residual of the joint cost at zero noise.
SensorTrack simulate_imu(const So3Spline& trajectory, const SensorSim& sensor,
                         double duration, std::uint64_t seed);

/// Consecutive-pair relative rotations in the sensor frame (frame camera or
/// LiDAR): R_pair = R_x' R(s_j)' R(s_i) R_x with per-pair rotation-vector
/// noise. Ground truth zeroes the matching joint-cost residual at zero
/// noise.
SensorTrack simulate_relative_rotations(const So3Spline& trajectory,
                                        const SensorSim& sensor, double duration,
                                        std::uint64_t seed);

struct SimulatedRig {
  So3Spline trajectory;
  EventStream events;
  std::vector<SensorTrack> tracks;  // one per RigSpec sensor
};

/// Full rig: trajectory plus every configured modality, deterministically
/// derived from (seed, spec).
SimulatedRig simulate_rig(const RigSpec& spec);

/// A noiseless rate track sampled straight off the trajectory (test helper
/// standing in for an event-flow output).
SensorTrack sample_trajectory_rates(const So3Spline& trajectory, double duration,
                                    double rate_hz, const std::string& id = "event0");

}  // namespace evcal
