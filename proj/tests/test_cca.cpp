#include <doctest.h>

#include <random>

#include "evcal/cca.hpp"
#include "evcal/errors.hpp"
#include "evcal/sim.hpp"
#include "test_util.hpp"

using namespace evcal;

namespace {

SensorTrack smooth_track(std::uint64_t seed, double duration, double rate_hz,
                         const std::string& id = "event0") {
  const auto traj = gen_trajectory(seed, duration, 1.0);
  return sample_trajectory_rates(traj, duration, rate_hz, id);
}

/// The other sensor records R' * omega_e at event-clock s and stamps s - tau.
SensorTrack derived_track(const SensorTrack& event_track, const Mat3& R_eo, double tau,
                          double sigma = 0.0, std::uint64_t seed = 1) {
  SensorTrack out;
  out.id = "other0";
  out.kind = SensorKind::Imu;
  out.native_rate_hz = event_track.native_rate_hz;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const Mat3 Rt = R_eo.transpose();
  for (const auto& s : event_track.samples) {
    AngularVelocitySample m;
    m.t = s.t - tau;
    m.omega = Rt * s.omega;
    if (sigma > 0.0) m.omega += sigma * Vec3(g(rng), g(rng), g(rng));
    out.samples.push_back(m);
  }
  return out;
}

}  // namespace

TEST_CASE("covariances of a track against itself coincide") {
  const auto e = smooth_track(1, 8.0, 100.0);
  const auto pairs = pair_tracks(e, e, 0.0);
  const auto c = covariances(pairs);
  CHECK((c.ee - c.oo).norm() < 1e-12);
  CHECK((c.ee - c.eo).norm() < 1e-12);
  CHECK((c.oe - c.eo.transpose()).norm() < 1e-15);
}

TEST_CASE("constant rates are degenerate excitation") {
  SensorTrack e;
  e.id = "e";
  e.kind = SensorKind::Event;
  e.native_rate_hz = 100.0;
  for (int k = 0; k < 200; ++k) {
    AngularVelocitySample s;
    s.t = 0.01 * k;
    s.omega = Vec3(0.1, 0.2, 0.3);
    e.samples.push_back(s);
  }
  CHECK_THROWS_AS(covariances(pair_tracks(e, e, 0.0)), PreconditionError);
}

TEST_CASE("covariances match a naive double-loop oracle") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  PairedRates pairs;
  for (int k = 0; k < 300; ++k) {
    pairs.times.push_back(0.01 * k);
    pairs.event.push_back(Vec3(g(rng), g(rng), g(rng)));
    pairs.other.push_back(Vec3(g(rng), g(rng), g(rng)));
  }
  const auto c = covariances(pairs);

  const int n = 300;
  Vec3 me = Vec3::Zero(), mo = Vec3::Zero();
  for (int k = 0; k < n; ++k) {
    me += pairs.event[k];
    mo += pairs.other[k];
  }
  me /= n;
  mo /= n;
  Mat3 ee = Mat3::Zero(), oo = Mat3::Zero(), eo = Mat3::Zero();
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        ee(i, j) += (pairs.event[k][i] - me[i]) * (pairs.event[k][j] - me[j]) / (n - 1);
        oo(i, j) += (pairs.other[k][i] - mo[i]) * (pairs.other[k][j] - mo[j]) / (n - 1);
        eo(i, j) += (pairs.event[k][i] - me[i]) * (pairs.other[k][j] - mo[j]) / (n - 1);
      }
    }
  }
  CHECK((c.ee - ee).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c.oo - oo).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((c.eo - eo).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fewer than 10 paired samples are rejected") {
  PairedRates pairs;
  for (int k = 0; k < 9; ++k) {
    pairs.times.push_back(k);
    pairs.event.push_back(Vec3(k, 0, 0));
    pairs.other.push_back(Vec3(0, k, 0));
  }
  CHECK_THROWS_AS(covariances(pairs), PreconditionError);
}

TEST_CASE("trace correlation of a rotated copy is one") {
  std::mt19937_64 rng(7);
  const auto e = smooth_track(2, 8.0, 100.0);
  const auto o = derived_track(e, testutil::random_rotation(rng), 0.0);
  const auto r = trace_correlation(covariances(pair_tracks(e, o, 0.0)));
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("trace correlation of the same track is one") {
  const auto e = smooth_track(3, 6.0, 50.0);
  const auto r = trace_correlation(covariances(pair_tracks(e, e, 0.0)));
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("independent white noise has near-zero trace correlation") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  PairedRates pairs;
  for (int k = 0; k < 10000; ++k) {
    pairs.times.push_back(k);
    pairs.event.push_back(Vec3(g(rng), g(rng), g(rng)));
    pairs.other.push_back(Vec3(g(rng), g(rng), g(rng)));
  }
  const auto r = trace_correlation(covariances(pairs));
  CHECK(r.value < 0.1);
}

TEST_CASE("trace correlation is invariant to re-expressing the other track") {
  std::mt19937_64 rng(13);
  const auto e = smooth_track(4, 8.0, 100.0);
  auto o = derived_track(e, testutil::random_rotation(rng), 0.0, 0.02, 5);
  const double r1 = trace_correlation(covariances(pair_tracks(e, o, 0.0))).value;
  const Mat3 Q = testutil::random_rotation(rng);
  for (auto& s : o.samples) s.omega = Q * s.omega;
  const double r2 = trace_correlation(covariances(pair_tracks(e, o, 0.0))).value;
  CHECK(std::abs(r1 - r2) < 1e-10);
}

TEST_CASE("a 35 ms shift is found within half a grid step, then 2 ms refined") {
  std::mt19937_64 rng(17);
  const auto e = smooth_track(5, 12.0, 100.0);
  const auto o = derived_track(e, testutil::random_rotation(rng), 0.035, 0.005, 7);
  const auto res = search_time_offset(e, o);
  CHECK(std::abs(res.tau_grid_opt - 0.035) <= 0.005 + 1e-12);
  CHECK(std::abs(res.tau - 0.035) <= 0.002);
}

TEST_CASE("zero shift lands on the zero grid point") {
  const auto e = smooth_track(6, 10.0, 100.0);
  const auto o = derived_track(e, Mat3::Identity(), 0.0, 0.01, 9);
  const auto res = search_time_offset(e, o);
  CHECK(std::abs(res.tau_grid_opt) <= 0.005 + 1e-12);
}

TEST_CASE("the peak is at the true shift across seeds") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::uniform_real_distribution<double> shift(-0.06, 0.06);
    const double tau = std::round(shift(rng) / 0.01) * 0.01;  // on-grid truth
    const auto e = smooth_track(100 + seed, 12.0, 100.0);
    const auto o = derived_track(e, testutil::random_rotation(rng), tau, 0.005, seed);
    const auto res = search_time_offset(e, o);
    CHECK(std::abs(res.tau_grid_opt - tau) <= 0.005 + 1e-12);
  }
}

TEST_CASE("argmax shifts opposite to a timestamp shift of the other track") {
  std::mt19937_64 rng(19);
  const auto e = smooth_track(7, 12.0, 100.0);
  auto o = derived_track(e, testutil::random_rotation(rng), 0.02, 0.005, 11);
  const auto before = search_time_offset(e, o);
  const double delta = 0.03;
  for (auto& s : o.samples) s.t += delta;
  const auto after = search_time_offset(e, o);
  CHECK(after.tau == doctest::Approx(before.tau - delta).epsilon(0.05));
}

TEST_CASE("a peak on the boundary asks for a wider range") {
  std::mt19937_64 rng(23);
  const auto e = smooth_track(8, 12.0, 100.0);
  const auto o = derived_track(e, Mat3::Identity(), 0.25);  // beyond the default range
  CHECK_THROWS_AS(search_time_offset(e, o), PreconditionError);
}

TEST_CASE("noise-free rotated rates recover the extrinsic rotation to 1e-9") {
  std::mt19937_64 rng(29);
  const Mat3 R_true = testutil::random_rotation(rng);
  const auto e = smooth_track(9, 10.0, 100.0);
  const auto o = derived_track(e, R_true, 0.0);
  const Mat3 R = extrinsic_rotation(covariances(pair_tracks(e, o, 0.0)));
  CHECK((R - R_true).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("identical tracks give the identity extrinsic") {
  const auto e = smooth_track(10, 8.0, 100.0);
  const Mat3 R = extrinsic_rotation(covariances(pair_tracks(e, e, 0.0)));
  CHECK((R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("single-axis excitation is reported as degenerate") {
  SensorTrack e;
  e.id = "e";
  e.kind = SensorKind::Event;
  e.native_rate_hz = 100.0;
  for (int k = 0; k < 500; ++k) {
    AngularVelocitySample s;
    s.t = 0.01 * k;
    s.omega = Vec3(std::sin(0.2 * k), 0.0, 0.0);
    e.samples.push_back(s);
  }
  CHECK_THROWS_AS(covariances(pair_tracks(e, e, 0.0)), PreconditionError);
}

TEST_CASE("rank-deficient cross-covariance names the unexcited directions") {
  CovarianceSet c;
  c.n = 100;
  c.ee = Mat3::Identity();
  c.oo = Mat3::Identity();
  c.eo = Vec3(1, 0, 0) * Vec3(1, 0, 0).transpose() * 0.9;
  c.oe = c.eo.transpose();
  CHECK_THROWS_AS(extrinsic_rotation(c), PreconditionError);
}

TEST_CASE("the determinant correction always lands in SO(3)") {
  CovarianceSet c;
  c.n = 100;
  c.ee = Mat3::Identity();
  c.oo = Mat3::Identity();
  Mat3 refl;
  refl << 1, 0, 0, 0, 1, 0, 0, 0, -1;  // reflection-inducing cross-covariance
  c.oe = refl;
  c.eo = refl.transpose();
  const Mat3 R = extrinsic_rotation(c);
  CHECK(so3::is_rotation(R, 1e-10));
}

TEST_CASE("rotation and offset recover together at gyro-grade noise") {
  std::mt19937_64 rng(31);
  const Mat3 R_true = testutil::random_rotation(rng);
  const double tau_true = 0.022;
  const auto e = smooth_track(11, 15.0, 100.0);
  const auto o = derived_track(e, R_true, tau_true, 0.01, 13);
  const auto res = cca_initialize(e, o);
  CHECK(std::abs(res.tau - tau_true) < 0.002);
  CHECK(so3::log(R_true.transpose() * res.rotation).norm() < M_PI / 180.0);
}

TEST_CASE("weak excitation is flagged but does not abort") {
  // Rates barely excited about one axis: above the hard conditioning
  // threshold, below the advisory one.
  SensorTrack e;
  e.id = "e";
  e.kind = SensorKind::Event;
  e.native_rate_hz = 100.0;
  std::mt19937_64 rng(37);
  std::normal_distribution<double> g;
  for (int k = 0; k < 1200; ++k) {
    AngularVelocitySample s;
    s.t = 0.01 * k;
    s.omega = Vec3(0.5 * std::sin(0.05 * k), 0.5 * std::cos(0.07 * k),
                   0.005 * std::sin(0.11 * k) + 1e-3 * g(rng));
    e.samples.push_back(s);
  }
  const auto o = derived_track(e, Mat3::Identity(), 0.0);
  const auto res = search_time_offset(e, o);
  CHECK(res.weak_excitation);
}
