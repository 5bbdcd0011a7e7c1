#include <doctest.h>

#include <random>

#include "evcal/angular_velocity.hpp"
#include "evcal/errors.hpp"
#include "evcal/resample.hpp"
#include "evcal/sim.hpp"
#include "evcal/spline_fit.hpp"
#include <Eigen/Dense>
#include "test_util.hpp"

using namespace evcal;

namespace {

So3Spline constant_rate_trajectory(const Vec3& rate, double duration) {
  std::vector<Mat3> poses;
  const double dt = 0.1;
  const double lo = -1.0;
  const int n = static_cast<int>((duration + 2.0) / dt) + 4;
  for (int k = 0; k <= n; ++k) poses.push_back(so3::exp((lo + k * dt) * rate));
  return So3Spline(lo - dt, dt, std::move(poses));
}

}  // namespace

TEST_CASE("trajectory generation is deterministic in the seed") {
  const auto a = gen_trajectory(42, 6.0, 1.0);
  const auto b = gen_trajectory(42, 6.0, 1.0);
  REQUIRE(a.num_poses() == b.num_poses());
  for (int k = 0; k < a.num_poses(); ++k) {
    CHECK((a.control_poses()[k] - b.control_poses()[k]).norm() == 0.0);
  }
}

TEST_CASE("richness zero yields a constant-rate trajectory") {
  const auto traj = gen_trajectory(3, 6.0, 0.0);
  const Vec3 w0 = traj.angular_velocity(1.0);
  CHECK(w0.norm() > 0.1);
  for (double t = 0.5; t < 5.5; t += 0.13) {
    CHECK((traj.angular_velocity(t) - w0).norm() < 1e-4);
  }
}

TEST_CASE("generated trajectories pass the excitation diagnostic across seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto traj = gen_trajectory(seed, 10.0, 1.0);
    Mat3 cov = Mat3::Zero();
    Vec3 mean = Vec3::Zero();
    int n = 0;
    for (double t = 0.0; t < 10.0; t += 0.02, ++n) mean += traj.angular_velocity(t);
    mean /= n;
    for (double t = 0.0; t < 10.0; t += 0.02) {
      const Vec3 d = traj.angular_velocity(t) - mean;
      cov += d * d.transpose();
    }
    cov /= n - 1;
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    CHECK(eig.eigenvalues().minCoeff() > 1e-4);
  }
}

TEST_CASE("a stationary rig with no noise produces no events") {
  So3Spline still(-1.0, 0.5, std::vector<Mat3>(20, Mat3::Identity()));
  EventCameraSim cam;
  cam.intrinsics = default_event_camera();
  cam.spurious_rate_hz = 0.0;
  const auto stream = simulate_events(still, cam, 3.0, 7);
  CHECK(stream.events.empty());
}

TEST_CASE("a stationary rig sees only the spurious process") {
  So3Spline still(-1.0, 0.5, std::vector<Mat3>(20, Mat3::Identity()));
  EventCameraSim cam;
  cam.intrinsics = default_event_camera();
  cam.spurious_rate_hz = 2000.0;
  const auto stream = simulate_events(still, cam, 4.0, 7);
  const double expected = 2000.0 * 4.0;
  CHECK(std::abs(stream.events.size() - expected) < 5.0 * std::sqrt(expected));
}

TEST_CASE("rotation about the optical axis traces circles around the principal point") {
  const auto traj = constant_rate_trajectory(Vec3(0, 0, 1.2), 3.0);
  EventCameraSim cam;
  cam.intrinsics = default_event_camera();
  cam.intrinsics.fy = cam.intrinsics.fx;
  cam.landmarks = 1;
  cam.edge_points = 1;
  cam.timestamp_jitter = 0.0;
  cam.spurious_rate_hz = 0.0;
  const auto stream = simulate_events(traj, cam, 3.0, 11);
  REQUIRE(stream.events.size() > 50);
  const Vec2 pp(cam.intrinsics.cx, cam.intrinsics.cy);
  const double r0 = (Vec2(stream.events[0].x, stream.events[0].y) - pp).norm();
  for (const auto& e : stream.events) {
    CHECK(std::abs((Vec2(e.x, e.y) - pp).norm() - r0) <= 1.0);
  }
}

TEST_CASE("event output is deterministic in (seed, spec)") {
  const auto traj = gen_trajectory(5, 5.0, 1.0);
  EventCameraSim cam;
  cam.intrinsics = default_event_camera();
  cam.landmarks = 20;
  const auto a = simulate_events(traj, cam, 5.0, 99);
  const auto b = simulate_events(traj, cam, 5.0, 99);
  REQUIRE(a.events.size() == b.events.size());
  for (size_t k = 0; k < a.events.size(); ++k) {
    CHECK(a.events[k].t == b.events[k].t);
    CHECK(a.events[k].x == b.events[k].x);
    CHECK(a.events[k].y == b.events[k].y);
    CHECK(a.events[k].polarity == b.events[k].polarity);
  }
}

TEST_CASE("event count scales with the rate magnitude and inverse contrast step") {
  EventCameraSim cam;
  cam.intrinsics = default_event_camera();
  cam.intrinsics.fy = cam.intrinsics.fx;
  cam.landmarks = 40;
  cam.timestamp_jitter = 0.0;
  cam.spurious_rate_hz = 0.0;

  auto count = [&](double rate, double theta) {
    EventCameraSim c = cam;
    c.contrast_step_px = theta;
    const auto traj = constant_rate_trajectory(Vec3(0, 0, rate), 4.0);
    return static_cast<double>(simulate_events(traj, c, 4.0, 13).events.size());
  };

  // Rotation about the optical axis keeps every landmark in view, so the
  // count is linear in both knobs.
  const double base = count(0.5, 1.0);
  CHECK(count(2.0, 1.0) / base == doctest::Approx(4.0).epsilon(0.10));
  CHECK(count(0.5, 0.5) / base == doctest::Approx(2.0).epsilon(0.10));
  CHECK(count(0.5, 2.0) / base == doctest::Approx(0.5).epsilon(0.10));
}

TEST_CASE("IMU samples with identity parameters equal the spline rates") {
  const auto traj = gen_trajectory(6, 6.0, 1.0);
  SensorSim imu;
  imu.id = "imu0";
  const auto track = simulate_imu(traj, imu, 6.0, 3);
  REQUIRE(!track.samples.empty());
  for (const auto& s : track.samples) {
    CHECK((s.omega - traj.angular_velocity(s.t)).norm() < 1e-12);
  }
}

TEST_CASE("IMU convention closes: zero residual at ground truth") {
  std::mt19937_64 rng(41);
  const auto traj = gen_trajectory(7, 6.0, 1.0);
  SensorSim imu;
  imu.id = "imu0";
  imu.extrinsic = testutil::random_rotation(rng);
  imu.offset = 0.013;
  imu.gyro_bias = Vec3(0.01, -0.02, 0.005);
  const auto track = simulate_imu(traj, imu, 6.0, 5);
  for (const auto& s : track.samples) {
    const Vec3 residual = traj.angular_velocity(s.t + imu.offset) -
                          imu.extrinsic * (s.omega + imu.gyro_bias);
    CHECK(residual.norm() < 1e-10);
  }
}

TEST_CASE("IMU noise variance matches the configured sigma within 10 percent") {
  const auto traj = gen_trajectory(8, 10.0, 1.0);
  SensorSim imu;
  imu.id = "imu0";
  imu.rate_hz = 1000.0;
  imu.sigma = 0.01;
  const auto track = simulate_imu(traj, imu, 10.0, 17);
  REQUIRE(track.samples.size() >= 10000);
  double ss = 0.0;
  long n = 0;
  for (const auto& s : track.samples) {
    ss += (s.omega - traj.angular_velocity(s.t)).squaredNorm();
    n += 3;
  }
  const double var = ss / n;
  CHECK(var == doctest::Approx(imu.sigma * imu.sigma).epsilon(0.10));
}

TEST_CASE("relative rotations close the pair residual at ground truth") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    const auto traj = gen_trajectory(200 + trial, 5.0, 1.0);
    SensorSim cam;
    cam.id = "cam0";
    cam.kind = SensorKind::Frame;
    cam.rate_hz = 20.0;
    cam.extrinsic = testutil::random_rotation(rng);
    cam.offset = -0.008;
    const auto track = simulate_relative_rotations(traj, cam, 5.0, trial);
    REQUIRE(!track.relative_rotations.empty());
    for (const auto& p : track.relative_rotations) {
      const Mat3 F = cam.extrinsic.transpose() *
                     traj.evaluate(p.t_i + cam.offset).transpose() *
                     traj.evaluate(p.t_j + cam.offset) * cam.extrinsic * p.rotation();
      CHECK(so3::log(F).norm() < 1e-10);
    }
  }
}

TEST_CASE("identity-extrinsic pairs reproduce the spline rate at midpoints") {
  const auto traj = gen_trajectory(9, 6.0, 1.0);
  SensorSim cam;
  cam.id = "cam0";
  cam.kind = SensorKind::Frame;
  cam.rate_hz = 20.0;
  const auto track = simulate_relative_rotations(traj, cam, 6.0, 19);
  for (const auto& p : track.relative_rotations) {
    const auto w = relative_to_omega(p);
    CHECK((w.omega - traj.angular_velocity(w.t)).norm() < 3e-3);
  }
}

TEST_CASE("zero duration produces an empty pair list") {
  const auto traj = gen_trajectory(10, 5.0, 1.0);
  SensorSim cam;
  cam.id = "cam0";
  cam.kind = SensorKind::Lidar;
  cam.rate_hz = 10.0;
  const auto track = simulate_relative_rotations(traj, cam, 0.0, 21);
  CHECK(track.relative_rotations.empty());
}

TEST_CASE("event-flow recovers a constant rate from simulated events within 2 percent") {
  const Vec3 w(0.4, -0.3, 0.8);
  const auto traj = constant_rate_trajectory(w, 2.0);
  EventCameraSim cam;
  cam.intrinsics = default_event_camera();
  cam.landmarks = 150;
  cam.timestamp_jitter = 5e-5;
  cam.spurious_rate_hz = 500.0;
  const auto stream = simulate_events(traj, cam, 2.0, 23);
  REQUIRE(stream.events.size() > 10000);

  TrackConfig cfg;
  cfg.seed = 1;
  const auto track = angular_velocity_track(stream.events, cam.intrinsics, cfg);
  REQUIRE(track.size() > 100);
  for (const auto& s : track) {
    CHECK((s.omega - w).norm() < 0.02 * w.norm());
  }
}

TEST_CASE("event-flow tracks a 1 Hz sinusoidal rate within 5 percent RMS") {
  // Trajectory with a single dominant harmonic per axis.
  std::vector<AngularVelocitySample> samples;
  const double amp = 0.8;
  for (int k = 0; k <= 500; ++k) {
    AngularVelocitySample s;
    s.t = -0.5 + k * 0.01;
    s.omega = Vec3(amp * std::sin(2 * M_PI * s.t), amp * std::cos(2 * M_PI * s.t),
                   0.5 * amp * std::sin(2 * M_PI * s.t + 0.7));
    samples.push_back(s);
  }
  SplineFitOptions fopts;
  fopts.knot_interval = 0.05;
  const auto traj = fit_spline_to_samples(samples, fopts).spline;

  EventCameraSim cam;
  cam.intrinsics = default_event_camera();
  cam.landmarks = 150;
  cam.timestamp_jitter = 1e-4;
  const auto stream = simulate_events(traj, cam, 3.0, 29);
  TrackConfig cfg;
  cfg.seed = 2;
  const auto track = angular_velocity_track(stream.events, cam.intrinsics, cfg);
  REQUIRE(track.size() > 150);
  double ss = 0.0;
  for (const auto& s : track) {
    ss += (s.omega - traj.angular_velocity(s.t)).squaredNorm();
  }
  CHECK(std::sqrt(ss / track.size()) < 0.05 * amp);
}

TEST_CASE("simulate_rig wires every configured sensor") {
  RigSpec spec;
  spec.seed = 31;
  spec.duration = 5.0;
  spec.event.intrinsics = default_event_camera();
  spec.event.landmarks = 30;
  SensorSim imu;
  imu.id = "imu0";
  imu.kind = SensorKind::Imu;
  SensorSim cam;
  cam.id = "cam0";
  cam.kind = SensorKind::Frame;
  cam.rate_hz = 20.0;
  SensorSim lidar;
  lidar.id = "lidar0";
  lidar.kind = SensorKind::Lidar;
  lidar.rate_hz = 10.0;
  spec.sensors = {imu, cam, lidar};
  const auto rig = simulate_rig(spec);
  CHECK(rig.tracks.size() == 3);
  CHECK(!rig.events.events.empty());
  CHECK(rig.tracks[0].has_rate_samples());
  CHECK(!rig.tracks[1].has_rate_samples());
  CHECK(rig.tracks[1].relative_rotations.size() > 50);
}
