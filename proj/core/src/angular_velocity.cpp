#include "evcal/angular_velocity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include "evcal/errors.hpp"
#include "evcal/time_surface.hpp"

namespace evcal {

namespace {

// Row of the rotation-only motion-field constraint for one observation.
struct ConstraintRow {
  Vec3 a;
  double b;
};

ConstraintRow constraint_row(const NormalFlowObservation& obs, const CameraIntrinsics& K) {
  const Vec2 xn = K.undistort(obs.pixel);
  const double x = xn.x(), y = xn.y();
  Eigen::Matrix<double, 2, 3> B;
  B << x * y, -(1.0 + x * x), y,
       1.0 + y * y, -x * y, -x;
  const Vec2 nS(obs.flow.x() * K.fx, obs.flow.y() * K.fy);
  // The raw constraint is n'S B w = ||n||^2; dividing by ||n|| puts every
  // row's residual in px/s so fast flows cannot dominate the solve.
  const double norm = obs.flow.norm();
  return {B.transpose() * nS / norm, norm};
}

double median(std::vector<double> v) {
  const size_t n = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + n, v.end());
  double m = v[n];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + n);
    m = 0.5 * (m + lo);
  }
  return m;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

AngularVelocitySample estimate_angular_velocity(
    const std::vector<NormalFlowObservation>& obs, const CameraIntrinsics& K,
    double t_mid, const RansacConfig& cfg) {
  const int n = static_cast<int>(obs.size());
  if (n < cfg.min_observations) {
    throw PreconditionError("estimate_angular_velocity: need >= " +
                            std::to_string(cfg.min_observations) + " observations, got " +
                            std::to_string(n));
  }

  std::vector<ConstraintRow> rows;
  rows.reserve(obs.size());
  for (const auto& o : obs) rows.push_back(constraint_row(o, K));

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);

  // Least-median-of-squares model selection: a contaminated hypothesis
  // cannot win by inflating its own threshold. The inlier threshold is set
  // from the winning model's median residual, with the configured floor.
  std::vector<double> absres(n);
  bool have_best = false;
  double best_med = 0.0;
  Vec3 best_w = Vec3::Zero();

  int needed = cfg.max_iterations;
  for (int it = 0; it < needed && it < cfg.max_iterations; ++it) {
    int i0 = pick(rng), i1 = pick(rng), i2 = pick(rng);
    if (i0 == i1 || i0 == i2 || i1 == i2) continue;
    Mat3 M;
    M.row(0) = rows[i0].a.transpose();
    M.row(1) = rows[i1].a.transpose();
    M.row(2) = rows[i2].a.transpose();
    Eigen::FullPivLU<Mat3> lu(M);
    if (lu.rank() < 3) continue;
    const Vec3 w = lu.solve(Vec3(rows[i0].b, rows[i1].b, rows[i2].b));

    for (int k = 0; k < n; ++k) absres[k] = std::abs(rows[k].a.dot(w) - rows[k].b);
    const double med = median(absres);
    if (!have_best || med < best_med) {
      have_best = true;
      best_med = med;
      best_w = w;
      // Adaptive iteration bound from the implied inlier fraction.
      const double thr = std::max(cfg.threshold_floor, cfg.mad_scale * med);
      int count = 0;
      for (int k = 0; k < n; ++k) count += absres[k] <= thr;
      const double frac = static_cast<double>(count) / n;
      const double denom = std::log(std::max(1e-12, 1.0 - frac * frac * frac));
      if (denom < 0.0) {
        const int est = static_cast<int>(std::ceil(std::log(1.0 - cfg.confidence) / denom));
        needed = std::min(cfg.max_iterations, std::max(est, it + 1));
      }
    }
  }
  if (!have_best) {
    throw PreconditionError("estimate_angular_velocity: no non-degenerate minimal sample");
  }

  const double threshold = std::max(cfg.threshold_floor, cfg.mad_scale * best_med);
  std::vector<char> best_mask(n, 0);
  int best_inliers = 0;
  for (int k = 0; k < n; ++k) {
    absres[k] = std::abs(rows[k].a.dot(best_w) - rows[k].b);
    best_mask[k] = absres[k] <= threshold;
    best_inliers += best_mask[k];
  }

  if (best_inliers < std::max(3, static_cast<int>(cfg.min_inlier_fraction * n))) {
    throw PreconditionError("estimate_angular_velocity: inlier support below " +
                            std::to_string(cfg.min_inlier_fraction));
  }

  // Refit on the consensus set.
  Eigen::MatrixXd A(best_inliers, 3);
  Eigen::VectorXd b(best_inliers);
  int r = 0;
  for (int k = 0; k < n; ++k) {
    if (!best_mask[k]) continue;
    A.row(r) = rows[k].a.transpose();
    b[r] = rows[k].b;
    ++r;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()(2) < 1e-8 * svd.singularValues()(0)) {
    throw PreconditionError("estimate_angular_velocity: degenerate (rank < 3) inlier set");
  }
  const Vec3 w = svd.solve(b);

  AngularVelocitySample out;
  out.t = t_mid;
  out.omega = w;
  out.inlier_count = best_inliers;
  out.support = static_cast<double>(best_inliers) / n;
  if (best_inliers > 3) {
    const double rss = (A * w - b).squaredNorm();
    const Mat3 cov = (rss / (best_inliers - 3)) * (A.transpose() * A).inverse();
    out.sigma = std::sqrt(std::max(0.0, cov.trace() / 3.0));
  }
  return out;
}

std::vector<AngularVelocitySample> angular_velocity_track(
    std::span<const Event> events, const CameraIntrinsics& K, const TrackConfig& cfg,
    TrackReport* report) {
  std::vector<AngularVelocitySample> track;
  if (report) *report = TrackReport{};
  if (events.empty()) return track;

  for (size_t k = 1; k < events.size(); ++k) {
    if (events[k].t < events[k - 1].t) {
      throw PreconditionError("angular_velocity_track: events not sorted");
    }
  }

  const double t_begin = events.front().t;
  const double t_end = events.back().t;
  const int windows = static_cast<int>((t_end - t_begin - cfg.window) / cfg.stride) + 1;

  auto time_lower = [&](double t) {
    return std::lower_bound(events.begin(), events.end(), t,
                            [](const Event& e, double v) { return e.t < v; });
  };

  for (int wi = 0; wi < std::max(0, windows); ++wi) {
    const double w0 = t_begin + wi * cfg.stride;
    const double w1 = w0 + cfg.window;
    const double t_mid = 0.5 * (w0 + w1);
    if (report) report->windows_total++;

    auto fail = [&](const std::string& why) {
      if (report) report->failures.push_back({wi, t_mid, why});
    };

    const auto hist_begin = time_lower(w0 - cfg.history);
    const auto win_begin = time_lower(w0);
    const auto win_end = time_lower(w1);
    if (win_begin == win_end) {
      fail("no events in window");
      continue;
    }

    TimeSurface surface(K.width, K.height, w1);
    for (auto it = hist_begin; it != win_end; ++it) surface.insert(*it);

    // Probe each pixel touched inside the window once, in first-event order.
    std::unordered_map<int, int> probe_of_pixel;
    std::vector<std::pair<int, int>> probes;
    std::vector<int> per_pixel_count;
    std::vector<double> per_pixel_first, per_pixel_last;
    for (auto it = win_begin; it != win_end; ++it) {
      const int key = it->y * K.width + it->x;
      auto [pos, inserted] = probe_of_pixel.try_emplace(key, static_cast<int>(probes.size()));
      if (inserted) {
        probes.emplace_back(it->x, it->y);
        per_pixel_count.push_back(1);
        per_pixel_first.push_back(it->t);
        per_pixel_last.push_back(it->t);
      } else {
        per_pixel_count[pos->second]++;
        per_pixel_last[pos->second] = it->t;
      }
    }

    PlaneFitConfig plane = cfg.plane;
    if (cfg.max_age > 0.0) {
      plane.max_age = cfg.max_age;
    } else {
      // 2x the median per-pixel inter-event time among multi-event pixels.
      std::vector<double> gaps;
      for (size_t p = 0; p < probes.size(); ++p) {
        if (per_pixel_count[p] >= 2) {
          gaps.push_back((per_pixel_last[p] - per_pixel_first[p]) /
                         (per_pixel_count[p] - 1));
        }
      }
      plane.max_age = gaps.empty() ? cfg.window : 2.0 * median(gaps);
    }

    std::vector<NormalFlowObservation> flows;
    for (const auto& [px, py] : probes) {
      const auto pf = fit_local_plane(surface, px, py, plane);
      if (!pf.fit) continue;
      const auto nf = normal_flow(*pf.fit, Vec2(px, py), surface.time_at(px, py), cfg.flow);
      if (!nf.obs) continue;
      flows.push_back(*nf.obs);
    }
    if (flows.empty()) {
      fail("no valid normal flows");
      continue;
    }

    RansacConfig ransac = cfg.ransac;
    ransac.seed = splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(wi)));
    try {
      const auto filtered = filter_by_variance(flows, cfg.discard_fraction);
      track.push_back(estimate_angular_velocity(filtered, K, t_mid, ransac));
      if (report) report->windows_ok++;
    } catch (const PreconditionError& e) {
      fail(e.what());
    }
  }
  return track;
}

}  // namespace evcal
