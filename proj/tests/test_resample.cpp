#include <doctest.h>

#include <random>

#include "evcal/errors.hpp"
#include "evcal/resample.hpp"
#include <functional>
#include "evcal/sim.hpp"
#include "test_util.hpp"

using namespace evcal;

namespace {

SensorTrack rate_track(const std::vector<double>& times,
                       const std::function<Vec3(double)>& f) {
  SensorTrack t;
  t.id = "t";
  t.kind = SensorKind::Imu;
  for (double tt : times) {
    AngularVelocitySample s;
    s.t = tt;
    s.omega = f(tt);
    t.samples.push_back(s);
  }
  return t;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int k = 0; k < n; ++k) v[k] = a + (b - a) * k / (n - 1);
  return v;
}

}  // namespace

TEST_CASE("interpolation is exact at the sample timestamps") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const auto track = rate_track(linspace(0, 1, 17), [&](double) {
    return Vec3(g(rng), g(rng), g(rng));
  });
  std::vector<double> queries;
  for (const auto& s : track.samples) queries.push_back(s.t);
  const auto out = resample_cubic(track, queries);
  for (size_t k = 0; k < queries.size(); ++k) {
    CHECK((out[k].omega - track.samples[k].omega).norm() < 1e-12);
  }
}

TEST_CASE("a cubic polynomial per axis is reconstructed exactly") {
  auto poly = [](double t) {
    return Vec3(1.0 - 2.0 * t + 0.5 * t * t + 0.25 * t * t * t,
                -0.3 + t * t - 0.1 * t * t * t,
                2.0 * t + 0.7 * t * t * t);
  };
  const auto track = rate_track(linspace(-1, 2, 13), poly);
  const auto queries = linspace(-1, 2, 211);
  const auto out = resample_cubic(track, queries);
  for (size_t k = 0; k < queries.size(); ++k) {
    CHECK((out[k].omega - poly(queries[k])).norm() < 1e-9);
  }
}

TEST_CASE("natural boundary bends near an end with curvature; not-a-knot does not") {
  auto poly = [](double t) { return Vec3(t * t * t, 0, 0); };  // f''(1) = 6
  const auto track = rate_track(linspace(0, 1, 21), poly);
  const auto nat = resample_cubic(track, std::vector<double>{0.975}, CubicBoundary::Natural);
  CHECK(std::abs(nat[0].omega.x() - poly(0.975).x()) > 1e-9);
  const auto nak = resample_cubic(track, std::vector<double>{0.975}, CubicBoundary::NotAKnot);
  CHECK(std::abs(nak[0].omega.x() - poly(0.975).x()) < 1e-12);
}

TEST_CASE("sinusoid resampled from 100 Hz to 1 kHz within 1e-5") {
  auto f = [](double t) {
    return Vec3(std::sin(2 * M_PI * t), std::cos(2 * M_PI * t), std::sin(4 * M_PI * t));
  };
  const auto track = rate_track(linspace(0, 2, 201), f);
  const auto queries = linspace(0, 2, 2001);
  const auto out = resample_cubic(track, queries);
  double worst = 0.0;
  for (size_t k = 0; k < queries.size(); ++k) {
    worst = std::max(worst, (out[k].omega - f(queries[k])).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("extrapolation requests throw") {
  const auto track = rate_track(linspace(0, 1, 8), [](double t) { return Vec3(t, 0, 0); });
  CHECK_THROWS_AS(resample_cubic(track, std::vector<double>{1.0001}), PreconditionError);
  CHECK_THROWS_AS(resample_cubic(track, std::vector<double>{-0.0001}), PreconditionError);
}

TEST_CASE("fewer than four samples are rejected") {
  const auto track = rate_track(linspace(0, 1, 3), [](double) { return Vec3::Zero(); });
  CHECK_THROWS_AS(resample_cubic(track, std::vector<double>{0.5}), PreconditionError);
}

TEST_CASE("time-shift equivariance of resampling") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  const auto track = rate_track(linspace(0, 1, 25), [&](double) {
    return Vec3(g(rng), g(rng), g(rng));
  });
  const double delta = 3.25;
  SensorTrack shifted = track;
  for (auto& s : shifted.samples) s.t += delta;

  const auto q = linspace(0.1, 0.9, 31);
  std::vector<double> q_shift;
  for (double t : q) q_shift.push_back(t + delta);
  const auto a = resample_cubic(track, q);
  const auto b = resample_cubic(shifted, q_shift);
  for (size_t k = 0; k < q.size(); ++k) {
    CHECK((a[k].omega - b[k].omega).norm() < 1e-9);
  }
}

TEST_CASE("no overshoot beyond three times the amplitude, no NaN") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  const auto track = rate_track(linspace(0, 1, 40), [&](double) {
    return Vec3(g(rng), g(rng), g(rng));
  });
  double amp = 0.0;
  for (const auto& s : track.samples) amp = std::max(amp, s.omega.cwiseAbs().maxCoeff());
  const auto out = resample_cubic(track, linspace(0, 1, 4001));
  for (const auto& s : out) {
    CHECK(s.omega.allFinite());
    CHECK(s.omega.cwiseAbs().maxCoeff() <= 3.0 * amp);
  }
}

TEST_CASE("identity relative rotation maps to zero rate at the midpoint") {
  RelativeRotationSample s;
  s.t_i = 1.0;
  s.t_j = 1.25;
  const auto w = relative_to_omega(s);
  CHECK(w.t == doctest::Approx(1.125));
  CHECK(w.omega.norm() == 0.0);
}

TEST_CASE("constant-rate pair recovers the body rate exactly") {
  // Body rate 0.1 rad/s about z over dt = 0.05 s: the later-from-earlier
  // relative rotation is exp(-dt * w).
  const Vec3 w_true(0, 0, 0.1);
  RelativeRotationSample s;
  s.t_i = 0.0;
  s.t_j = 0.05;
  s.rotvec = -0.05 * w_true;
  const auto w = relative_to_omega(s);
  CHECK((w.omega - w_true).norm() < 1e-10);
}

TEST_CASE("constant-rate track converts exactly") {
  const Vec3 w_true(0.2, -0.3, 0.15);
  std::vector<RelativeRotationSample> rel;
  for (int k = 0; k < 20; ++k) {
    RelativeRotationSample s;
    s.t_i = 0.1 * k;
    s.t_j = 0.1 * (k + 1);
    s.rotvec = -0.1 * w_true;
    rel.push_back(s);
  }
  for (const auto& w : relative_track_to_omega(rel)) {
    CHECK((w.omega - w_true).norm() < 1e-10);
  }
}

TEST_CASE("rotation angle at pi is rejected with advice") {
  RelativeRotationSample s;
  s.t_i = 0.0;
  s.t_j = 1.0;
  s.rotvec = Vec3(M_PI, 0, 0);
  CHECK_THROWS_AS(relative_to_omega(s), PreconditionError);
}

TEST_CASE("midpoint rate error shrinks fourfold when the pair rate doubles") {
  // Smooth trajectory; consecutive pairs at 20 Hz vs 40 Hz.
  const auto traj = gen_trajectory(5, 10.0, 1.0);
  auto midpoint_err = [&](double rate) {
    SensorSim cam;
    cam.id = "f";
    cam.kind = SensorKind::Frame;
    cam.rate_hz = rate;
    const auto track = simulate_relative_rotations(traj, cam, 10.0, 1);
    double ss = 0.0;
    for (const auto& p : track.relative_rotations) {
      const auto w = relative_to_omega(p);
      ss += (w.omega - traj.angular_velocity(w.t)).squaredNorm();
    }
    return std::sqrt(ss / track.relative_rotations.size());
  };
  const double e20 = midpoint_err(20.0);
  const double e40 = midpoint_err(40.0);
  CHECK(e40 < e20 / 2.5);  // O(dt^2): ideally 4x, allow slack
  CHECK(e20 < 0.1);
}
