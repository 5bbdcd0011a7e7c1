#include <doctest.h>

#include <random>

#include "evcal/errors.hpp"
#include "evcal/normal_flow.hpp"

using namespace evcal;

namespace {

// Surface whose stored times follow t = a*x + b*y + c in absolute pixel
// coordinates, optionally with additive noise.
TimeSurface plane_surface(int w, int h, double a, double b, double c,
                          std::mt19937_64* rng = nullptr, double sigma = 0.0) {
  double t_max = -1e300;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) t_max = std::max(t_max, a * x + b * y + c);
  }
  TimeSurface s(w, h, t_max + 10.0 * sigma + 1.0);
  std::normal_distribution<double> gauss(0.0, sigma);
  std::vector<Event> ev;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double t = a * x + b * y + c;
      if (rng) t += gauss(*rng);
      ev.push_back({t, x, y, 1});
    }
  }
  std::sort(ev.begin(), ev.end(), [](auto& p, auto& q) { return p.t < q.t; });
  for (const auto& e : ev) s.insert(e);
  return s;
}

PlaneFitConfig wide_open() {
  PlaneFitConfig cfg;
  cfg.max_age = 1e9;
  return cfg;
}

}  // namespace

TEST_CASE("exact plane is recovered with zero residual") {
  const auto s = plane_surface(5, 5, 0.01, 0.02, 5.0);
  const auto res = fit_local_plane(s, 2, 2, wide_open());
  REQUIRE(res.fit.has_value());
  CHECK(res.fit->a == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(res.fit->b == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(res.fit->c == doctest::Approx(0.01 * 2 + 0.02 * 2 + 5.0).epsilon(1e-12));
  CHECK(res.fit->rss < 1e-16);
  CHECK(res.fit->support == 25);
}

TEST_CASE("a stationary edge (flat surface) is rejected downstream") {
  const auto s = plane_surface(5, 5, 0.0, 0.0, 1.0);
  const auto res = fit_local_plane(s, 2, 2, wide_open());
  REQUIRE(res.fit.has_value());
  CHECK(std::abs(res.fit->a) < 1e-15);
  CHECK(std::abs(res.fit->b) < 1e-15);
  const auto nf = normal_flow(*res.fit, Vec2(2, 2), 1.0);
  CHECK(!nf.obs.has_value());
  CHECK(nf.reject == FlowReject::NearZeroGradient);
}

TEST_CASE("insufficient support and mixed polarity are rejected") {
  TimeSurface s(8, 8, 10.0);
  s.insert({1.0, 4, 4, 1});
  s.insert({1.1, 5, 4, -1});  // opposite polarity, must not count
  const auto res = fit_local_plane(s, 4, 4, wide_open());
  CHECK(!res.fit.has_value());
  CHECK(res.reject == FlowReject::InsufficientSupport);
}

TEST_CASE("noisy plane: estimate within 5 sigma, covariance matches Monte-Carlo") {
  std::mt19937_64 rng(101);
  const double sigma_t = 1e-4;
  const double a = 0.004, b = -0.003, c = 2.0;

  Eigen::Matrix<double, Eigen::Dynamic, 3> params(1000, 3);
  Mat3 cov_estimate_sum = Mat3::Zero();
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = plane_surface(5, 5, a, b, c, &rng, sigma_t);
    const auto res = fit_local_plane(s, 2, 2, wide_open());
    REQUIRE(res.fit.has_value());
    params.row(trial) << res.fit->a, res.fit->b, res.fit->c - (2 * a + 2 * b + c);
    cov_estimate_sum += res.fit->cov;
  }
  const Eigen::RowVector3d mean = params.colwise().mean();
  CHECK(std::abs(mean[0] - a) < 5.0 * sigma_t);
  CHECK(std::abs(mean[1] - b) < 5.0 * sigma_t);

  const Mat3 mc =
      (params.rowwise() - mean).transpose() * (params.rowwise() - mean) / (1000 - 1);
  const Mat3 avg_cov = cov_estimate_sum / 1000.0;
  for (int i = 0; i < 3; ++i) {
    CHECK(avg_cov(i, i) > 0.5 * mc(i, i));
    CHECK(avg_cov(i, i) < 2.0 * mc(i, i));
  }
}

TEST_CASE("normal flow of a pure-x gradient") {
  PlaneFit fit;
  fit.a = 0.5;
  fit.b = 0.0;
  const auto nf = normal_flow(fit, Vec2(0, 0), 0.0);
  REQUIRE(nf.obs.has_value());
  CHECK((nf.obs->flow - Vec2(2.0, 0.0)).norm() < 1e-12);
}

TEST_CASE("normal flow of a 3-4-5 gradient") {
  PlaneFit fit;
  fit.a = 0.3;
  fit.b = 0.4;
  const auto nf = normal_flow(fit, Vec2(0, 0), 0.0);
  REQUIRE(nf.obs.has_value());
  CHECK(nf.obs->flow.norm() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK((nf.obs->flow.normalized() - Vec2(0.6, 0.8)).norm() < 1e-12);
}

TEST_CASE("zero coefficient covariance propagates to zero flow variance") {
  PlaneFit fit;
  fit.a = 0.2;
  fit.b = -0.1;
  fit.cov = Mat3::Zero();
  const auto nf = normal_flow(fit, Vec2(0, 0), 0.0);
  REQUIRE(nf.obs.has_value());
  CHECK(nf.obs->var_norm == 0.0);
}

TEST_CASE("flow dotted with the gradient is one") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    PlaneFit fit;
    fit.a = u(rng);
    fit.b = u(rng);
    if (fit.a * fit.a + fit.b * fit.b < 1e-6) continue;
    const auto nf = normal_flow(fit, Vec2(0, 0), 0.0);
    REQUIRE(nf.obs.has_value());
    CHECK(std::abs(nf.obs->flow.dot(Vec2(fit.a, fit.b)) - 1.0) < 1e-12);
  }
}

TEST_CASE("flow-norm variance is nonnegative and scales with the covariance") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    PlaneFit fit;
    fit.a = u(rng) + 1.5;
    fit.b = u(rng);
    Eigen::Matrix3d A = Eigen::Matrix3d::NullaryExpr([&]() { return u(rng); });
    fit.cov = A * A.transpose();
    const auto nf = normal_flow(fit, Vec2(0, 0), 0.0);
    REQUIRE(nf.obs.has_value());
    CHECK(nf.obs->var_norm >= 0.0);

    const double s2 = 6.25;
    PlaneFit scaled = fit;
    scaled.cov *= s2;
    const auto nf2 = normal_flow(scaled, Vec2(0, 0), 0.0);
    CHECK(nf2.obs->var_norm == doctest::Approx(s2 * nf.obs->var_norm).epsilon(1e-12));
  }
}

TEST_CASE("variance filter keeps the smallest-variance observations") {
  std::vector<NormalFlowObservation> obs(10);
  for (int k = 0; k < 10; ++k) {
    obs[k].var_norm = k + 1.0;
    obs[k].t = 0.1 * k;
  }
  const auto kept = filter_by_variance(obs, 0.20);
  REQUIRE(kept.size() == 8);
  for (int k = 0; k < 8; ++k) CHECK(kept[k].var_norm == k + 1.0);
}

TEST_CASE("variance filter with fraction zero is the identity") {
  std::vector<NormalFlowObservation> obs(7);
  for (int k = 0; k < 7; ++k) obs[k].var_norm = 7.0 - k;
  const auto kept = filter_by_variance(obs, 0.0);
  CHECK(kept.size() == 7);
}

TEST_CASE("variance filter ties: the earlier timestamp survives") {
  std::vector<NormalFlowObservation> obs(4);
  for (int k = 0; k < 4; ++k) {
    obs[k].var_norm = 1.0;
    obs[k].t = 0.1 * k;
  }
  const auto kept = filter_by_variance(obs, 0.25);  // drops exactly one
  REQUIRE(kept.size() == 3);
  for (const auto& o : kept) CHECK(o.t < 0.3 - 1e-12);
}

TEST_CASE("variance filter against a sort oracle") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<NormalFlowObservation> obs(100);
  for (int k = 0; k < 100; ++k) {
    obs[k].var_norm = u(rng);
    obs[k].t = u(rng);
  }
  const auto kept = filter_by_variance(obs, 0.20);
  REQUIRE(kept.size() == 80);
  std::vector<double> vars;
  for (const auto& o : obs) vars.push_back(o.var_norm);
  std::sort(vars.begin(), vars.end());
  const double pct80 = vars[79];
  for (const auto& o : kept) CHECK(o.var_norm <= pct80 + 1e-15);
}

TEST_CASE("variance filter rejects empty input") {
  CHECK_THROWS_AS(filter_by_variance({}, 0.2), PreconditionError);
}
