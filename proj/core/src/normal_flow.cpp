#include "evcal/normal_flow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "evcal/errors.hpp"

namespace evcal {

const char* to_string(FlowReject r) {
  switch (r) {
    case FlowReject::None: return "none";
    case FlowReject::InsufficientSupport: return "insufficient_support";
    case FlowReject::DegenerateGeometry: return "degenerate_geometry";
    case FlowReject::NearZeroGradient: return "near_zero_gradient";
  }
  return "unknown";
}

PlaneFitResult fit_local_plane(const TimeSurface& surface, int x, int y,
                               const PlaneFitConfig& cfg) {
  if (cfg.radius < 2) {
    throw PreconditionError("fit_local_plane: radius must be >= 2");
  }
  if (!surface.touched(x, y)) {
    return {std::nullopt, FlowReject::InsufficientSupport};
  }
  const double t_center = surface.time_at(x, y);
  const int pol_center = surface.polarity_at(x, y);

  // Accumulate X'X and X't with coordinates centered at the probe pixel
  // and times relative to the center time (c is shifted back afterwards).
  Mat3 XtX = Mat3::Zero();
  Vec3 Xtt = Vec3::Zero();
  double tt = 0.0;
  int n = 0;
  for (int dy = -cfg.radius; dy <= cfg.radius; ++dy) {
    for (int dx = -cfg.radius; dx <= cfg.radius; ++dx) {
      const int px = x + dx, py = y + dy;
      if (px < 0 || px >= surface.width() || py < 0 || py >= surface.height()) continue;
      if (!surface.touched(px, py)) continue;
      if (surface.polarity_at(px, py) != pol_center) continue;
      const double ti = surface.time_at(px, py);
      if (t_center - ti > cfg.max_age) continue;
      const Vec3 row(static_cast<double>(dx), static_cast<double>(dy), 1.0);
      const double dt = ti - t_center;
      XtX.noalias() += row * row.transpose();
      Xtt.noalias() += row * dt;
      tt += dt * dt;
      ++n;
    }
  }
  if (n < cfg.min_support) {
    return {std::nullopt, FlowReject::InsufficientSupport};
  }

  Eigen::SelfAdjointEigenSolver<Mat3> eig(XtX);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (lmin <= 0.0 || lmax / lmin > cfg.max_condition) {
    return {std::nullopt, FlowReject::DegenerateGeometry};
  }

  Eigen::LLT<Mat3> llt(XtX);
  const Vec3 p = llt.solve(Xtt);
  const double rss = std::max(0.0, tt - p.dot(Xtt));

  PlaneFit fit;
  fit.a = p[0];
  fit.b = p[1];
  fit.c = p[2] + t_center;
  fit.support = n;
  fit.rss = rss;
  fit.cov = rss * XtX.inverse() / static_cast<double>(n - 3);
  return {fit, FlowReject::None};
}

NormalFlowResult normal_flow(const PlaneFit& fit, const Vec2& pixel, double t,
                             const NormalFlowConfig& cfg) {
  const double g2 = fit.a * fit.a + fit.b * fit.b;
  const double g_min = 1.0 / cfg.max_flow;
  if (g2 < g_min * g_min) {
    return {std::nullopt, FlowReject::NearZeroGradient};
  }
  NormalFlowObservation obs;
  obs.pixel = pixel;
  obs.t = t;
  obs.flow = Vec2(fit.a, fit.b) / g2;
  // J = d||n||/dp with ||n|| = (a^2+b^2)^-1/2.
  const double s = -std::pow(g2, -1.5);
  const Vec3 J(fit.a * s, fit.b * s, 0.0);
  obs.var_norm = std::max(0.0, J.dot(fit.cov * J));
  return {obs, FlowReject::None};
}

std::vector<NormalFlowObservation> filter_by_variance(
    const std::vector<NormalFlowObservation>& obs, double discard_fraction) {
  if (obs.empty()) {
    throw PreconditionError("filter_by_variance: empty observation list");
  }
  if (discard_fraction < 0.0 || discard_fraction >= 1.0) {
    throw PreconditionError("filter_by_variance: fraction outside [0,1)");
  }
  const size_t drop = static_cast<size_t>(
      std::ceil(discard_fraction * static_cast<double>(obs.size())));
  if (drop == 0) return obs;

  // Pick the drop set: largest variance first, ties resolved so the later
  // timestamp is discarded first.
  std::vector<size_t> order(obs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
    if (obs[i].var_norm != obs[j].var_norm) return obs[i].var_norm > obs[j].var_norm;
    if (obs[i].t != obs[j].t) return obs[i].t > obs[j].t;
    return i > j;
  });
  std::vector<char> dropped(obs.size(), 0);
  for (size_t k = 0; k < drop; ++k) dropped[order[k]] = 1;

  std::vector<NormalFlowObservation> out;
  out.reserve(obs.size() - drop);
  for (size_t k = 0; k < obs.size(); ++k) {
    if (!dropped[k]) out.push_back(obs[k]);
  }
  return out;
}

}  // namespace evcal
