#include "evcal/resample.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

#include "evcal/errors.hpp"

namespace evcal {

CubicInterpolant::CubicInterpolant(std::vector<double> times, std::vector<Vec3> values,
                                   CubicBoundary boundary)
    : t_(std::move(times)), y_(std::move(values)) {
  const int n = static_cast<int>(t_.size());
  if (n < 4 || y_.size() != t_.size()) {
    throw PreconditionError("CubicInterpolant: need >= 4 samples");
  }
  for (int k = 1; k < n; ++k) {
    if (!(t_[k] > t_[k - 1])) {
      throw PreconditionError("CubicInterpolant: timestamps not strictly increasing");
    }
  }

  std::vector<double> h(n - 1);
  for (int k = 0; k + 1 < n; ++k) h[k] = t_[k + 1] - t_[k];

  // Solve for the second derivatives M_k, one linear system shared by the
  // three components.
  Eigen::SparseMatrix<double> A(n, n);
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 3);
  for (int k = 1; k + 1 < n; ++k) {
    trip.emplace_back(k, k - 1, h[k - 1] / 6.0);
    trip.emplace_back(k, k, (h[k - 1] + h[k]) / 3.0);
    trip.emplace_back(k, k + 1, h[k] / 6.0);
    const Vec3 d = (y_[k + 1] - y_[k]) / h[k] - (y_[k] - y_[k - 1]) / h[k - 1];
    rhs.row(k) = d.transpose();
  }
  if (boundary == CubicBoundary::Natural) {
    trip.emplace_back(0, 0, 1.0);
    trip.emplace_back(n - 1, n - 1, 1.0);
  } else {
    // Not-a-knot: third-derivative continuity across the first and last
    // interior knots.
    trip.emplace_back(0, 0, h[1]);
    trip.emplace_back(0, 1, -(h[0] + h[1]));
    trip.emplace_back(0, 2, h[0]);
    trip.emplace_back(n - 1, n - 3, h[n - 2]);
    trip.emplace_back(n - 1, n - 2, -(h[n - 3] + h[n - 2]));
    trip.emplace_back(n - 1, n - 1, h[n - 3]);
  }
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
  if (lu.info() != Eigen::Success) {
    throw PreconditionError("CubicInterpolant: singular interpolation system");
  }
  const Eigen::MatrixXd M = lu.solve(rhs);
  m_.resize(n);
  for (int k = 0; k < n; ++k) m_[k] = M.row(k).transpose();
}

Vec3 CubicInterpolant::operator()(double t) const {
  if (t < min_time() || t > max_time()) {
    throw PreconditionError("CubicInterpolant: extrapolation request");
  }
  int k = static_cast<int>(std::upper_bound(t_.begin(), t_.end(), t) - t_.begin()) - 1;
  k = std::clamp(k, 0, static_cast<int>(t_.size()) - 2);
  const double h = t_[k + 1] - t_[k];
  const double a = t_[k + 1] - t, b = t - t_[k];
  return (m_[k] * a * a * a + m_[k + 1] * b * b * b) / (6.0 * h) +
         (y_[k] / h - m_[k] * h / 6.0) * a + (y_[k + 1] / h - m_[k + 1] * h / 6.0) * b;
}

AngularVelocitySample relative_to_omega(const RelativeRotationSample& s) {
  if (!(s.t_j > s.t_i)) {
    throw PreconditionError("relative_to_omega: t_j must exceed t_i");
  }
  const Vec3& r = s.rotvec;
  if (r.norm() >= M_PI - 1e-9) {
    throw PreconditionError(
        "relative_to_omega: rotation angle reaches pi; sample the sensor finer");
  }
  AngularVelocitySample out;
  out.t = 0.5 * (s.t_i + s.t_j);
  out.omega = -r / (s.t_j - s.t_i);
  return out;
}

std::vector<AngularVelocitySample> relative_track_to_omega(
    const std::vector<RelativeRotationSample>& rel) {
  std::vector<AngularVelocitySample> out;
  out.reserve(rel.size());
  for (const auto& s : rel) out.push_back(relative_to_omega(s));
  return out;
}

std::vector<AngularVelocitySample> resample_cubic(const SensorTrack& track,
                                                  std::span<const double> times,
                                                  CubicBoundary boundary) {
  if (track.samples.size() < 4) {
    throw PreconditionError("resample_cubic: track needs >= 4 rate samples");
  }
  std::vector<double> ts;
  std::vector<Vec3> ys;
  ts.reserve(track.samples.size());
  ys.reserve(track.samples.size());
  for (const auto& s : track.samples) {
    ts.push_back(s.t);
    ys.push_back(s.omega);
  }
  const CubicInterpolant interp(std::move(ts), std::move(ys), boundary);

  std::vector<AngularVelocitySample> out;
  out.reserve(times.size());
  for (double t : times) {
    AngularVelocitySample s;
    s.t = t;
    s.omega = interp(t);
    out.push_back(s);
  }
  return out;
}

}  // namespace evcal
