#include "evcal/sim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "evcal/errors.hpp"
#include "evcal/spline_fit.hpp"

namespace evcal {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct SinusoidBank {
  // Per axis: sum of A*sin(2 pi f t + phi).
  std::vector<double> amp[3], freq[3], phase[3];
  Vec3 constant = Vec3::Zero();

  Vec3 rate(double t) const {
    Vec3 w = constant;
    for (int a = 0; a < 3; ++a) {
      for (size_t k = 0; k < amp[a].size(); ++k) {
        w[a] += amp[a][k] * std::sin(2.0 * M_PI * freq[a][k] * t + phase[a][k]);
      }
    }
    return w;
  }
};

SinusoidBank draw_bank(std::mt19937_64& rng, double richness) {
  SinusoidBank bank;
  std::normal_distribution<double> gauss(0.0, 1.0);
  if (richness <= 0.0) {
    bank.constant = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized() * 0.8;
    return bank;
  }
  std::uniform_real_distribution<double> f(0.2, 2.0);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> a(0.3, 1.0);
  const int harmonics = std::clamp(3 + static_cast<int>(std::lround(3.0 * richness)), 3, 6);
  const double peak_target = 1.0 + 2.0 * std::min(1.0, richness);
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < harmonics; ++k) {
      bank.amp[axis].push_back(a(rng));
      bank.freq[axis].push_back(f(rng));
      bank.phase[axis].push_back(ph(rng));
    }
  }
  // Scale so the sampled peak rate magnitude hits the target.
  double peak = 0.0;
  for (double t = 0.0; t < 10.0; t += 0.01) peak = std::max(peak, bank.rate(t).norm());
  const double scale = peak_target / std::max(peak, 1e-9);
  for (int axis = 0; axis < 3; ++axis) {
    for (double& A : bank.amp[axis]) A *= scale;
  }
  return bank;
}

bool well_excited(const SinusoidBank& bank, double duration, double threshold) {
  Mat3 cov = Mat3::Zero();
  Vec3 mean = Vec3::Zero();
  int n = 0;
  for (double t = 0.0; t < duration; t += 0.02, ++n) mean += bank.rate(t);
  mean /= std::max(1, n);
  for (double t = 0.0; t < duration; t += 0.02) {
    const Vec3 d = bank.rate(t) - mean;
    cov += d * d.transpose();
  }
  cov /= std::max(1, n - 1);
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  return eig.eigenvalues().minCoeff() > threshold;
}

}  // namespace

So3Spline gen_trajectory(std::uint64_t seed, double duration, double richness,
                         double knot_interval, double margin) {
  if (duration < 5.0) {
    throw PreconditionError("gen_trajectory: duration must be >= 5 s");
  }
  SinusoidBank bank;
  for (int attempt = 0;; ++attempt) {
    std::mt19937_64 rng(mix(seed, attempt));
    bank = draw_bank(rng, richness);
    // Constant-rate trajectories are exempt; they are rank-1 by design.
    if (richness <= 0.0 || well_excited(bank, duration, 4e-4) || attempt >= 20) break;
  }

  // Dense rate samples over the padded span, then a spline fit.
  const double rate_hz = 200.0;
  std::vector<AngularVelocitySample> samples;
  const double lo = -margin, hi = duration + margin;
  for (int k = 0;; ++k) {
    const double t = lo + k / rate_hz;
    if (t > hi) break;
    AngularVelocitySample s;
    s.t = t;
    s.omega = bank.rate(t);
    samples.push_back(s);
  }
  SplineFitOptions fit;
  fit.knot_interval = knot_interval;
  fit.margin = 2.0 * knot_interval;
  return fit_spline_to_samples(samples, fit).spline;
}

EventStream simulate_events(const So3Spline& trajectory, const EventCameraSim& cam,
                            double duration, std::uint64_t seed) {
  const CameraIntrinsics& K = cam.intrinsics;
  if (K.fx <= 0.0 || K.fy <= 0.0 || K.width <= 0 || K.height <= 0) {
    throw PreconditionError("simulate_events: invalid intrinsics");
  }
  std::mt19937_64 rng(mix(seed, 0xEE));
  std::uniform_real_distribution<double> ut(0.0, duration);
  std::uniform_real_distribution<double> ux(2.0, K.width - 3.0);
  std::uniform_real_distribution<double> uy(2.0, K.height - 3.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Landmarks: short edge segments of bearings, seeded from poses along the
  // whole trajectory so the field of view stays populated.
  struct EdgePoint {
    Vec3 bearing;
  };
  std::vector<std::vector<EdgePoint>> landmarks;
  const double fbar = 0.5 * (K.fx + K.fy);
  const double spacing =
      cam.edge_length_px / (std::max(1, cam.edge_points - 1) * fbar);
  for (int l = 0; l < cam.landmarks; ++l) {
    const double t_seed = ut(rng);
    const Mat3 R = trajectory.evaluate(t_seed);
    const Vec3 center = R * K.bearing(Vec2(ux(rng), uy(rng)));
    Vec3 edge_dir = Vec3(gauss(rng), gauss(rng), gauss(rng)).cross(center);
    while (edge_dir.norm() < 1e-6) {
      edge_dir = Vec3(gauss(rng), gauss(rng), gauss(rng)).cross(center);
    }
    edge_dir.normalize();
    std::vector<EdgePoint> pts;
    for (int j = 0; j < cam.edge_points; ++j) {
      const double s = (j - 0.5 * (cam.edge_points - 1)) * spacing;
      pts.push_back({(center + s * edge_dir).normalized()});
    }
    landmarks.push_back(std::move(pts));
  }

  EventStream stream;
  stream.width = K.width;
  stream.height = K.height;

  auto pixel_at = [&](const Vec3& bearing, double t, Vec2* px) {
    const Vec3 dir = trajectory.evaluate(t).transpose() * bearing;
    if (dir.z() < 0.05) return false;
    if (!K.project_bearing(dir, px)) return false;
    return px->x() >= -2.0 && px->x() < K.width + 2.0 && px->y() >= -2.0 &&
           px->y() < K.height + 2.0;
  };

  const double theta = cam.contrast_step_px;
  for (const auto& edge : landmarks) {
    for (const auto& pt : edge) {
      double t = 0.0;
      double accum = 0.0;
      Vec2 prev;
      bool visible = pixel_at(pt.bearing, t, &prev);
      while (t < duration) {
        // Step so the expected displacement is a quarter contrast step.
        double speed = fbar * std::max(0.2, trajectory.angular_velocity(t).norm());
        double dt = std::clamp(0.25 * theta / speed, 2e-5, 2e-3);
        if (!visible) dt = 2e-3;
        const double t_next = std::min(duration, t + dt);
        Vec2 cur;
        const bool vis_next = pixel_at(pt.bearing, t_next, &cur);
        if (visible && vis_next) {
          const double ds = (cur - prev).norm();
          accum += ds;
          while (accum >= theta) {
            // Interpolate the crossing inside [t, t_next].
            const double back = (accum - theta) / std::max(ds, 1e-12);
            const double t_cross = t_next - back * (t_next - t);
            const Vec2 px = cur - back * (cur - prev);
            const int ix = static_cast<int>(std::lround(px.x()));
            const int iy = static_cast<int>(std::lround(px.y()));
            const Vec2 vel = (cur - prev) / std::max(1e-12, t_next - t);
            if (ix >= 0 && ix < K.width && iy >= 0 && iy < K.height) {
              Event e;
              e.t = t_cross + cam.timestamp_jitter * gauss(rng);
              e.x = ix;
              e.y = iy;
              e.polarity = (std::abs(vel.x()) >= std::abs(vel.y()) ? vel.x() : vel.y()) >= 0.0
                               ? 1
                               : -1;
              if (e.t >= 0.0 && e.t <= duration) stream.events.push_back(e);
            }
            accum -= theta;
          }
        } else {
          accum = 0.0;
        }
        prev = cur;
        visible = vis_next;
        if (t_next >= duration) break;
        t = t_next;
      }
    }
  }

  // Spurious events: Poisson over the whole array.
  std::poisson_distribution<long> spur_count(cam.spurious_rate_hz * duration);
  std::uniform_int_distribution<int> px(0, K.width - 1), py(0, K.height - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  const long spurious = spur_count(rng);
  for (long k = 0; k < spurious; ++k) {
    Event e;
    e.t = ut(rng);
    e.x = px(rng);
    e.y = py(rng);
    e.polarity = coin(rng) ? 1 : -1;
    stream.events.push_back(e);
  }

  std::sort(stream.events.begin(), stream.events.end(),
            [](const Event& a, const Event& b) { return a.t < b.t; });
  return stream;
}

SensorTrack simulate_imu(const So3Spline& trajectory, const SensorSim& sensor,
                         double duration, std::uint64_t seed) {
  SensorTrack track;
  track.id = sensor.id;
  track.kind = SensorKind::Imu;
  track.native_rate_hz = sensor.rate_hz;
  std::mt19937_64 rng(mix(seed, 0x101));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Mat3 Rt = sensor.extrinsic.transpose();
  const long n = static_cast<long>(duration * sensor.rate_hz);
  for (long k = 0; k <= n; ++k) {
    const double s = k / sensor.rate_hz;
    AngularVelocitySample m;
    m.t = s - sensor.offset;
    m.omega = Rt * trajectory.angular_velocity(s) - sensor.gyro_bias +
              sensor.sigma * Vec3(gauss(rng), gauss(rng), gauss(rng));
    track.samples.push_back(m);
  }
  return track;
}

SensorTrack simulate_relative_rotations(const So3Spline& trajectory,
                                        const SensorSim& sensor, double duration,
                                        std::uint64_t seed) {
  SensorTrack track;
  track.id = sensor.id;
  track.kind = sensor.kind;
  track.native_rate_hz = sensor.rate_hz;
  std::mt19937_64 rng(mix(seed, 0x202));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Mat3& G = sensor.extrinsic;
  const long n = static_cast<long>(duration * sensor.rate_hz);
  for (long k = 0; k + 1 <= n; ++k) {
    const double si = k / sensor.rate_hz;
    const double sj = (k + 1) / sensor.rate_hz;
    RelativeRotationSample p;
    p.t_i = si - sensor.offset;
    p.t_j = sj - sensor.offset;
    Mat3 R_pair = G.transpose() * trajectory.evaluate(sj).transpose() *
                  trajectory.evaluate(si) * G;
    if (sensor.sigma > 0.0) {
      R_pair = R_pair * so3::exp(sensor.sigma * Vec3(gauss(rng), gauss(rng), gauss(rng)));
    }
    p.rotvec = so3::log(R_pair);
    track.relative_rotations.push_back(p);
  }
  return track;
}

SimulatedRig simulate_rig(const RigSpec& spec) {
  SimulatedRig rig;
  rig.trajectory = gen_trajectory(spec.seed, spec.duration, spec.richness,
                                  spec.trajectory_knot);
  rig.events = simulate_events(rig.trajectory, spec.event, spec.duration,
                               mix(spec.seed, 1));
  int idx = 0;
  for (const auto& sensor : spec.sensors) {
    const std::uint64_t sub = mix(spec.seed, 100 + idx++);
    if (sensor.kind == SensorKind::Imu) {
      rig.tracks.push_back(simulate_imu(rig.trajectory, sensor, spec.duration, sub));
    } else if (sensor.kind == SensorKind::Frame || sensor.kind == SensorKind::Lidar) {
      rig.tracks.push_back(
          simulate_relative_rotations(rig.trajectory, sensor, spec.duration, sub));
    } else {
      throw PreconditionError("simulate_rig: sensors list may not contain an event camera");
    }
  }
  return rig;
}

SensorTrack sample_trajectory_rates(const So3Spline& trajectory, double duration,
                                    double rate_hz, const std::string& id) {
  SensorTrack track;
  track.id = id;
  track.kind = SensorKind::Event;
  track.native_rate_hz = rate_hz;
  const long n = static_cast<long>(duration * rate_hz);
  for (long k = 0; k <= n; ++k) {
    AngularVelocitySample s;
    s.t = k / rate_hz;
    s.omega = trajectory.angular_velocity(s.t);
    track.samples.push_back(s);
  }
  return track;
}

}  // namespace evcal
