#include "evcal/spline_fit.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>

#include "evcal/errors.hpp"
#include "evcal/resample.hpp"

namespace evcal {

namespace {

double velocity_cost(const So3Spline& s, std::span<const AngularVelocitySample> samples) {
  double c = 0.0;
  for (const auto& m : samples) c += (s.angular_velocity(m.t) - m.omega).squaredNorm();
  return c;
}

}  // namespace

SplineFitResult fit_spline_to_samples(std::span<const AngularVelocitySample> samples,
                                      const SplineFitOptions& opts) {
  const double dt = opts.knot_interval;
  if (dt <= 0.0) throw PreconditionError("fit_spline_to_samples: knot interval must be > 0");
  if (samples.size() < 2) {
    throw PreconditionError("fit_spline_to_samples: need at least 2 samples");
  }
  for (size_t k = 1; k < samples.size(); ++k) {
    if (!(samples[k].t > samples[k - 1].t)) {
      throw PreconditionError("fit_spline_to_samples: timestamps not strictly increasing");
    }
  }
  if (samples.back().t - samples.front().t < 4.0 * dt) {
    throw PreconditionError("fit_spline_to_samples: span below 4 knot intervals");
  }

  const double t_first = samples.front().t - opts.margin;
  const double t_last = samples.back().t + opts.margin;
  const int n = static_cast<int>(std::ceil((t_last - t_first) / dt)) + 3;
  const double t0 = t_first - dt;

  // Integrate the rates (trapezoid in the body frame) to seed orientations
  // at the sample times, then place each knot on that track. Knots in the
  // margins continue at the end rates.
  std::vector<Mat3> q(samples.size());
  q[0] = Mat3::Identity();
  for (size_t k = 1; k < samples.size(); ++k) {
    const double h = samples[k].t - samples[k - 1].t;
    q[k] = q[k - 1] * so3::exp(0.5 * h * (samples[k - 1].omega + samples[k].omega));
  }

  std::vector<Mat3> poses(n + 1);
  size_t cursor = 0;
  for (int k = 0; k <= n; ++k) {
    const double tk = t0 + k * dt;
    if (tk <= samples.front().t) {
      poses[k] = q.front() * so3::exp((tk - samples.front().t) * samples.front().omega);
    } else if (tk >= samples.back().t) {
      poses[k] = q.back() * so3::exp((tk - samples.back().t) * samples.back().omega);
    } else {
      while (cursor + 2 < samples.size() && samples[cursor + 1].t < tk) ++cursor;
      const double h = samples[cursor + 1].t - samples[cursor].t;
      const double s = (tk - samples[cursor].t) / h;
      poses[k] = q[cursor] * so3::exp(s * so3::log(q[cursor].transpose() * q[cursor + 1]));
    }
  }

  So3Spline spline(t0, dt, std::move(poses));

  // Damped Gauss-Newton polish on the velocity residuals. The global
  // orientation is a gauge direction; the damping keeps the normal
  // equations solvable.
  const int vars = 3 * spline.num_poses();
  double lambda = 1e-6;
  double cost = velocity_cost(spline, samples);
  for (int it = 0; it < opts.max_iterations; ++it) {
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(vars);

    for (const auto& m : samples) {
      SplineVelocityJacobian jac;
      const Vec3 r = spline.angular_velocity(m.t, &jac) - m.omega;
      for (int a = 0; a < 4; ++a) {
        const int pa = jac.first_pose + a;
        g.segment<3>(3 * pa) += jac.d_pose[a].transpose() * r;
        for (int b = 0; b < 4; ++b) {
          const int pb = jac.first_pose + b;
          const Mat3 Hab = jac.d_pose[a].transpose() * jac.d_pose[b];
          for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
              trip.emplace_back(3 * pa + i, 3 * pb + j, Hab(i, j));
            }
          }
        }
      }
    }

    Eigen::SparseMatrix<double> H(vars, vars);
    H.setFromTriplets(trip.begin(), trip.end());

    bool accepted = false;
    for (int attempt = 0; attempt < 8 && !accepted; ++attempt) {
      Eigen::SparseMatrix<double> Hd = H;
      for (int k = 0; k < vars; ++k) {
        Hd.coeffRef(k, k) += lambda * std::max(H.coeff(k, k), 1e-8);
      }
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(Hd);
      if (solver.info() != Eigen::Success) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd step = solver.solve(-g);
      So3Spline candidate = spline;
      for (int k = 0; k < candidate.num_poses(); ++k) {
        candidate.control_poses()[k] =
            candidate.control_poses()[k] * so3::exp(step.segment<3>(3 * k));
      }
      const double c_new = velocity_cost(candidate, samples);
      if (c_new <= cost) {
        const double rel = (cost - c_new) / std::max(cost, 1e-300);
        spline = std::move(candidate);
        cost = c_new;
        lambda = std::max(1e-12, lambda * 0.3);
        accepted = true;
        if (rel < opts.tolerance) it = opts.max_iterations;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) break;
  }

  SplineFitResult out{std::move(spline), std::sqrt(cost / samples.size())};
  return out;
}

SplineFitResult fit_spline_to_samples(std::span<const RelativeRotationSample> samples,
                                      const SplineFitOptions& opts) {
  std::vector<AngularVelocitySample> rates;
  rates.reserve(samples.size());
  for (const auto& s : samples) rates.push_back(relative_to_omega(s));
  return fit_spline_to_samples(rates, opts);
}

}  // namespace evcal
