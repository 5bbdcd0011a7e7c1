#include "evcal/cca.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "evcal/errors.hpp"

namespace evcal {

namespace {

std::string axis_string(const Vec3& v) {
  std::ostringstream os;
  os << "[" << v.x() << ", " << v.y() << ", " << v.z() << "]";
  return os.str();
}

// tau-independent pairing state: the interpolated side's interpolant is
// built once per pair.
struct PairingContext {
  const SensorTrack* event_track;
  const SensorTrack* other_track;
  bool interpolate_other;  // true: other track is resampled on the event grid
  std::optional<CubicInterpolant> interp;
};

PairingContext make_context(const SensorTrack& e, const SensorTrack& o,
                            const PairingConfig& cfg) {
  if (e.samples.size() < 4 || o.samples.size() < 4) {
    throw PreconditionError("pair_tracks: both tracks need >= 4 rate samples");
  }
  PairingContext ctx{&e, &o, true, std::nullopt};
  if (cfg.target_grid == 1) {
    ctx.interpolate_other = true;
  } else if (cfg.target_grid == 2) {
    ctx.interpolate_other = false;
  } else {
    // Auto: the lower-rate track is the one interpolated.
    ctx.interpolate_other = o.native_rate_hz <= e.native_rate_hz;
  }
  const SensorTrack& low = ctx.interpolate_other ? o : e;
  std::vector<double> ts;
  std::vector<Vec3> ys;
  ts.reserve(low.samples.size());
  for (const auto& s : low.samples) {
    ts.push_back(s.t);
    ys.push_back(s.omega);
  }
  ctx.interp.emplace(std::move(ts), std::move(ys), cfg.boundary);
  return ctx;
}

PairedRates pair_at(const PairingContext& ctx, double tau) {
  PairedRates out;
  const auto& e = ctx.event_track->samples;
  const auto& o = ctx.other_track->samples;
  // The other sensor's stamp t maps to event-clock t + tau. Bounds are
  // checked directly against the interpolated track's domain so boundary
  // samples cannot fall out by a rounding ulp.
  if (ctx.interpolate_other) {
    const double lo = ctx.interp->min_time(), hi = ctx.interp->max_time();
    for (const auto& s : e) {
      const double q = s.t - tau;
      if (q < lo || q > hi) continue;
      out.times.push_back(s.t);
      out.event.push_back(s.omega);
      out.other.push_back((*ctx.interp)(q));
    }
  } else {
    const double lo = ctx.interp->min_time(), hi = ctx.interp->max_time();
    for (const auto& s : o) {
      const double t_ev = s.t + tau;
      if (t_ev < lo || t_ev > hi) continue;
      out.times.push_back(t_ev);
      out.event.push_back((*ctx.interp)(t_ev));
      out.other.push_back(s.omega);
    }
  }
  return out;
}

void check_conditioning(const Mat3& sigma, const char* name) {
  Eigen::SelfAdjointEigenSolver<Mat3> eig(sigma);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (lmin <= 0.0 || lmax / lmin > 1e10) {
    int idx = 0;
    eig.eigenvalues().minCoeff(&idx);
    throw PreconditionError(std::string("covariances: degenerate excitation, ") + name +
                            " near-singular along axis " +
                            axis_string(eig.eigenvectors().col(idx)));
  }
}

}  // namespace

PairedRates pair_tracks(const SensorTrack& event_track, const SensorTrack& other_track,
                        double tau, const PairingConfig& cfg) {
  return pair_at(make_context(event_track, other_track, cfg), tau);
}

CovarianceSet covariances(const PairedRates& pairs) {
  CovarianceSet c;
  c.n = static_cast<int>(pairs.event.size());
  if (c.n < 10) {
    throw PreconditionError("covariances: need >= 10 paired samples, got " +
                            std::to_string(c.n));
  }
  for (int k = 0; k < c.n; ++k) {
    c.mean_e += pairs.event[k];
    c.mean_o += pairs.other[k];
  }
  c.mean_e /= c.n;
  c.mean_o /= c.n;
  for (int k = 0; k < c.n; ++k) {
    const Vec3 de = pairs.event[k] - c.mean_e;
    const Vec3 d_o = pairs.other[k] - c.mean_o;
    c.ee.noalias() += de * de.transpose();
    c.oo.noalias() += d_o * d_o.transpose();
    c.eo.noalias() += de * d_o.transpose();
  }
  c.ee /= c.n - 1;
  c.oo /= c.n - 1;
  c.eo /= c.n - 1;
  c.oe = c.eo.transpose();
  check_conditioning(c.ee, "ee");
  check_conditioning(c.oo, "oo");
  return c;
}

TraceCorrelation trace_correlation(const CovarianceSet& c) {
  const Mat3 A = c.ee.llt().solve(c.eo);
  const Mat3 B = c.oo.llt().solve(c.oe);
  const double r2 = (A * B).trace() / 3.0;
  const double r = std::sqrt(std::max(0.0, r2));
  TraceCorrelation out;
  out.clamped = r > 1.0;
  out.value = std::min(1.0, r);
  return out;
}

CcaResult search_time_offset(const SensorTrack& event_track, const SensorTrack& other_track,
                             const CcaConfig& cfg) {
  const PairingContext ctx = make_context(event_track, other_track, cfg.pairing);
  const auto& e = event_track.samples;
  const auto& o = other_track.samples;
  for (double tau : {-cfg.search_range, cfg.search_range}) {
    const double overlap =
        std::min(e.back().t, o.back().t + tau) - std::max(e.front().t, o.front().t + tau);
    if (overlap < cfg.min_overlap) {
      throw PreconditionError("search_time_offset: tracks overlap less than " +
                              std::to_string(cfg.min_overlap) + " s at offset " +
                              std::to_string(tau));
    }
  }

  CcaResult res;
  const int K = static_cast<int>(std::round(cfg.search_range / cfg.search_step));
  for (int k = -K; k <= K; ++k) {
    const double tau = k * cfg.search_step;
    const auto c = covariances(pair_at(ctx, tau));
    const auto r = trace_correlation(c);
    res.tau_grid.push_back(tau);
    res.correlation.push_back(r.value);
    res.correlation_clamped |= r.clamped;
  }

  const auto best = std::max_element(res.correlation.begin(), res.correlation.end());
  const int bi = static_cast<int>(best - res.correlation.begin());
  if (bi == 0 || bi == static_cast<int>(res.correlation.size()) - 1) {
    throw PreconditionError(
        "search_time_offset: correlation peak on the range boundary; widen the range");
  }
  res.tau_grid_opt = res.tau_grid[bi];
  res.correlation_opt = res.correlation[bi];

  // One parabolic refinement through the three points around the peak.
  const double rm = res.correlation[bi - 1], r0 = res.correlation[bi],
               rp = res.correlation[bi + 1];
  const double denom = rm - 2.0 * r0 + rp;
  double delta = 0.0;
  if (denom < 0.0) {
    delta = 0.5 * cfg.search_step * (rm - rp) / denom;
    delta = std::clamp(delta, -cfg.search_step, cfg.search_step);
  }
  res.tau = res.tau_grid_opt + delta;

  const auto c_opt = covariances(pair_at(ctx, res.tau));
  Eigen::SelfAdjointEigenSolver<Mat3> eig(c_opt.ee);
  res.min_excitation_eig = eig.eigenvalues().minCoeff();
  res.weak_excitation = res.min_excitation_eig < cfg.min_excitation_eig;
  res.paired_samples = c_opt.n;
  return res;
}

Mat3 extrinsic_rotation(const CovarianceSet& c) {
  const Mat3 M = c.oo.llt().solve(c.oe);
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv(1) < 1e-6 * sv(0)) {
    // Rank < 2: motion excites (at most) one axis; report the blind input
    // directions.
    std::string axes = axis_string(svd.matrixV().col(1)) + ", " +
                       axis_string(svd.matrixV().col(2));
    throw PreconditionError(
        "extrinsic_rotation: rank-deficient excitation; unexcited directions " + axes);
  }
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant();
  const Mat3 R_oe = svd.matrixU() * D * svd.matrixV().transpose();
  // R_oe maps event rates into the other sensor's frame; the calibration
  // convention wants omega_e = R * omega_o.
  return R_oe.transpose();
}

CcaResult cca_initialize(const SensorTrack& event_track, const SensorTrack& other_track,
                         const CcaConfig& cfg) {
  CcaResult res = search_time_offset(event_track, other_track, cfg);
  const auto pairs = pair_tracks(event_track, other_track, res.tau, cfg.pairing);
  res.rotation = extrinsic_rotation(covariances(pairs));
  return res;
}

}  // namespace evcal
