#include "evcal/refine.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "evcal/errors.hpp"
#include "evcal/spline_fit.hpp"

namespace evcal {

const char* to_string(ResidualClass c) {
  switch (c) {
    case ResidualClass::EventRate: return "event_rate";
    case ResidualClass::ImuRate: return "imu_rate";
    case ResidualClass::FramePair: return "frame_pair";
    case ResidualClass::LidarPair: return "lidar_pair";
  }
  return "unknown";
}

namespace {

double median_of(std::vector<double> v, double fallback) {
  if (v.empty()) return fallback;
  const size_t n = v.size() / 2;
  std::nth_element(v.begin(), v.end() - 1 - 0, v.end());
  std::nth_element(v.begin(), v.begin() + n, v.end());
  return v[n];
}

// One evaluated residual block with its sparse Jacobian entries.
struct EvaluatedTerm {
  Vec3 r = Vec3::Zero();
  // (first variable index, 3 x width) pairs; width 3 for rotation blocks,
  // 1 for the offset column.
  std::vector<std::pair<int, Eigen::Matrix<double, 3, Eigen::Dynamic>>> jac;
};

}  // namespace

struct CalibrationProblem::Workspace {
  Eigen::SparseMatrix<double> H;
  Eigen::VectorXd g;
  std::vector<Eigen::Triplet<double>> trip;
};

CalibrationProblem::CalibrationProblem(const SensorTrack& event_track,
                                       const std::vector<SensorTrack>& other_tracks,
                                       const std::map<std::string, SensorParameters>& init,
                                       const RefineOptions& opts)
    : opts_(opts) {
  if (!event_track.has_rate_samples()) {
    throw PreconditionError("CalibrationProblem: event track must carry rate samples");
  }
  for (const auto& [id, par] : init) {
    if (std::abs(par.offset) > opts_.tau_max) {
      throw PreconditionError("CalibrationProblem: initial offset for '" + id +
                              "' exceeds tau_max");
    }
  }

  // Trajectory seed: fit the event track with enough margin that every
  // |tau| <= tau_max keeps included queries evaluable.
  SplineFitOptions fit;
  fit.knot_interval = opts_.knot_interval;
  fit.margin = 2.0 * opts_.tau_max;
  state_.spline = fit_spline_to_samples(event_track.samples, fit).spline;
  for (const auto& t : other_tracks) {
    auto it = init.find(t.id);
    if (it == init.end()) {
      throw PreconditionError("CalibrationProblem: no initial parameters for '" + t.id + "'");
    }
    state_.sensors[t.id] = it->second;
  }

  build_terms(event_track, other_tracks, init);

  // Variable layout: control poses first, then per-sensor blocks.
  num_vars_ = 3 * state_.spline.num_poses();
  for (const auto& [id, cls] : classes_) {
    param_offset_[id] = num_vars_;
    num_vars_ += cls == ResidualClass::ImuRate ? 7 : 4;
  }

  // Class weights: inverse variance of each term's source, or unity in
  // paper-faithful mode.
  if (opts_.paper_faithful) {
    weights_[ResidualClass::EventRate] = 1.0;
    weights_[ResidualClass::ImuRate] = 1.0;
    weights_[ResidualClass::FramePair] = 1.0;
    weights_[ResidualClass::LidarPair] = 1.0;
  } else {
    std::vector<double> sigmas;
    for (const auto& s : event_track.samples) {
      if (s.sigma > 0.0) sigmas.push_back(s.sigma);
    }
    const double sigma_e = std::max(1e-4, median_of(std::move(sigmas), 1e-3));
    weights_[ResidualClass::EventRate] = 1.0 / (sigma_e * sigma_e);
    weights_[ResidualClass::ImuRate] = 1.0 / (opts_.sigma_gyro * opts_.sigma_gyro);
    for (ResidualClass cls : {ResidualClass::FramePair, ResidualClass::LidarPair}) {
      std::vector<double> dts;
      for (const auto& p : pair_terms_) {
        if (classes_.count(p.sensor) && classes_.at(p.sensor) == cls) {
          dts.push_back(p.t_j - p.t_i);
        }
      }
      const double dt = median_of(std::move(dts), 0.05);
      weights_[cls] = 1.0 / (dt * opts_.sigma_pair);
    }
  }
}

void CalibrationProblem::build_terms(const SensorTrack& event_track,
                                     const std::vector<SensorTrack>& other_tracks,
                                     const std::map<std::string, SensorParameters>& init) {
  const double lo = event_track.samples.front().t;
  const double hi = event_track.samples.back().t;

  for (const auto& s : event_track.samples) {
    rate_terms_.push_back({"", s.t, s.omega});
  }

  for (const auto& track : other_tracks) {
    const double tau0 = init.at(track.id).offset;
    int excluded = 0;
    if (track.kind == SensorKind::Imu) {
      classes_[track.id] = ResidualClass::ImuRate;
      for (const auto& s : track.samples) {
        if (s.t + tau0 < lo || s.t + tau0 > hi) {
          ++excluded;
          continue;
        }
        rate_terms_.push_back({track.id, s.t, s.omega});
      }
    } else if (track.kind == SensorKind::Frame || track.kind == SensorKind::Lidar) {
      classes_[track.id] = track.kind == SensorKind::Frame ? ResidualClass::FramePair
                                                           : ResidualClass::LidarPair;
      for (const auto& p : track.relative_rotations) {
        if (p.t_i + tau0 < lo || p.t_i + tau0 > hi || p.t_j + tau0 < lo ||
            p.t_j + tau0 > hi) {
          ++excluded;
          continue;
        }
        pair_terms_.push_back({track.id, p.t_i, p.t_j, p.rotation()});
      }
    } else {
      throw PreconditionError("CalibrationProblem: unexpected second event track '" +
                              track.id + "'");
    }
    excluded_[track.id] = excluded;

    const bool empty = (track.kind == SensorKind::Imu &&
                        std::none_of(rate_terms_.begin(), rate_terms_.end(),
                                     [&](const RateTerm& t) { return t.sensor == track.id; })) ||
                       (track.kind != SensorKind::Imu &&
                        std::none_of(pair_terms_.begin(), pair_terms_.end(),
                                     [&](const PairTerm& t) { return t.sensor == track.id; }));
    if (empty) {
      throw PreconditionError("CalibrationProblem: no usable residuals for sensor '" +
                              track.id + "'");
    }
  }
}

int CalibrationProblem::excluded_terms(const std::string& sensor_id) const {
  auto it = excluded_.find(sensor_id);
  return it == excluded_.end() ? 0 : it->second;
}

namespace {

// Rate residual r = w_spline(t + tau) - R (meas + bias); the event camera
// is the tau = 0, R = I, bias = 0 case.
EvaluatedTerm rate_residual(const CalibrationState& st, const std::string& sensor,
                            double t, const Vec3& meas, bool with_jacobians,
                            int sensor_var, bool has_bias) {
  EvaluatedTerm out;
  if (sensor.empty()) {
    if (with_jacobians) {
      SplineVelocityJacobian jac;
      out.r = st.spline.angular_velocity(t, &jac) - meas;
      for (int k = 0; k < 4; ++k) {
        out.jac.emplace_back(3 * (jac.first_pose + k), jac.d_pose[k]);
      }
    } else {
      out.r = st.spline.angular_velocity(t) - meas;
    }
    return out;
  }

  const SensorParameters& par = st.sensors.at(sensor);
  const double te = t + par.offset;
  const Vec3 rate = meas + par.gyro_bias;
  if (with_jacobians) {
    SplineVelocityJacobian jac;
    out.r = st.spline.angular_velocity(te, &jac) - par.extrinsic * rate;
    for (int k = 0; k < 4; ++k) {
      out.jac.emplace_back(3 * (jac.first_pose + k), jac.d_pose[k]);
    }
    out.jac.emplace_back(sensor_var, par.extrinsic * so3::hat(rate));    // d/d extrinsic
    out.jac.emplace_back(sensor_var + 3, st.spline.angular_acceleration(te));  // d/d tau
    if (has_bias) {
      out.jac.emplace_back(sensor_var + 4,
                           Eigen::Matrix<double, 3, Eigen::Dynamic>(-par.extrinsic));
    }
  } else {
    out.r = st.spline.angular_velocity(te) - par.extrinsic * rate;
  }
  return out;
}

// Pair residual r = log(G' Ri' Rj G M).
EvaluatedTerm pair_residual(const CalibrationState& st, const std::string& sensor,
                            double t_i, double t_j, const Mat3& M, bool with_jacobians,
                            int sensor_var) {
  EvaluatedTerm out;
  const SensorParameters& par = st.sensors.at(sensor);
  const Mat3& G = par.extrinsic;
  const double si = t_i + par.offset;
  const double sj = t_j + par.offset;

  SplineJacobian ji, jj;
  const Mat3 Ri = st.spline.evaluate(si, with_jacobians ? &ji : nullptr);
  const Mat3 Rj = st.spline.evaluate(sj, with_jacobians ? &jj : nullptr);
  const Mat3 W = G.transpose() * Ri.transpose() * Rj * G;
  const Mat3 F = W * M;
  out.r = so3::log(F);
  if (!with_jacobians) return out;

  const Mat3 L = so3::right_jacobian_inv(out.r);
  const Mat3 Ji_phi = -L * F.transpose() * G.transpose();  // d r / d (right tangent of Ri)
  const Mat3 Jj_phi = L * M.transpose() * G.transpose();   // d r / d (right tangent of Rj)

  // The two 4-pose windows usually overlap; accumulate per pose.
  std::map<int, Mat3> per_pose;
  for (int k = 0; k < 4; ++k) {
    per_pose[ji.first_pose + k] = Ji_phi * ji.d_pose[k];
  }
  for (int k = 0; k < 4; ++k) {
    auto [it, inserted] = per_pose.try_emplace(jj.first_pose + k, Mat3::Zero());
    it->second += Jj_phi * jj.d_pose[k];
  }
  for (const auto& [pose, Jp] : per_pose) {
    out.jac.emplace_back(3 * pose, Jp);
  }

  out.jac.emplace_back(sensor_var, L * M.transpose() * (Mat3::Identity() - W.transpose()));
  const Vec3 Jtau = Ji_phi * st.spline.angular_velocity(si) +
                    Jj_phi * st.spline.angular_velocity(sj);
  out.jac.emplace_back(sensor_var + 3, Jtau);
  return out;
}

}  // namespace

double CalibrationProblem::accumulate(const CalibrationState& st, Workspace* ws,
                                      ResidualReport* report) const {
  double total = 0.0;
  if (ws) {
    ws->trip.clear();
    ws->g = Eigen::VectorXd::Zero(num_vars_);
  }
  if (report) {
    report->blocks.clear();
    report->blocks[ResidualClass::EventRate].weight = weights_.at(ResidualClass::EventRate);
  }

  auto absorb = [&](const EvaluatedTerm& term, ResidualClass cls) {
    const double w = weights_.at(cls);
    const double norm2 = term.r.squaredNorm();
    double scale = w;        // effective weight after the robust loss
    double cost = w * norm2;
    if (opts_.huber_delta > 0.0) {
      const double e = std::sqrt(cost);
      if (e > opts_.huber_delta) {
        cost = 2.0 * opts_.huber_delta * e - opts_.huber_delta * opts_.huber_delta;
        scale = w * opts_.huber_delta / e;
      }
    }
    total += cost;
    if (report) {
      auto& b = report->blocks[cls];
      b.count++;
      b.rms += norm2;
      b.max_norm = std::max(b.max_norm, std::sqrt(norm2));
      b.weight = w;
      b.cost += cost;
      b.norms.push_back(std::sqrt(norm2));
    }
    if (ws) {
      // Gauss-Newton blocks of the scaled residual sqrt(scale) * r.
      for (const auto& [col_a, Ja] : term.jac) {
        ws->g.segment(col_a, Ja.cols()) += scale * Ja.transpose() * term.r;
        for (const auto& [col_b, Jb] : term.jac) {
          const Eigen::MatrixXd Hab = scale * Ja.transpose() * Jb;
          for (int i = 0; i < Hab.rows(); ++i) {
            for (int j = 0; j < Hab.cols(); ++j) {
              ws->trip.emplace_back(col_a + i, col_b + j, Hab(i, j));
            }
          }
        }
      }
    }
  };

  for (const auto& t : rate_terms_) {
    const bool is_event = t.sensor.empty();
    const ResidualClass cls = is_event ? ResidualClass::EventRate : ResidualClass::ImuRate;
    const int var = is_event ? -1 : param_offset_.at(t.sensor);
    absorb(rate_residual(st, t.sensor, t.t, t.omega, ws != nullptr, var, !is_event), cls);
  }
  for (const auto& p : pair_terms_) {
    const ResidualClass cls = classes_.at(p.sensor);
    absorb(pair_residual(st, p.sensor, p.t_i, p.t_j, p.rotation, ws != nullptr,
                         param_offset_.at(p.sensor)),
           cls);
  }

  if (ws) {
    ws->H.resize(num_vars_, num_vars_);
    ws->H.setFromTriplets(ws->trip.begin(), ws->trip.end());
  }
  if (report) {
    for (auto& [cls, b] : report->blocks) {
      b.rms = b.count > 0 ? std::sqrt(b.rms / b.count) : 0.0;
    }
    report->total_cost = total;
  }
  return total;
}

ResidualReport CalibrationProblem::evaluate(const CalibrationState& s) const {
  ResidualReport report;
  accumulate(s, nullptr, &report);
  return report;
}

namespace {

CalibrationState apply_step(const CalibrationState& st, const Eigen::VectorXd& step,
                            const std::map<std::string, int>& offsets,
                            const std::map<std::string, ResidualClass>& classes) {
  CalibrationState out = st;
  for (int k = 0; k < out.spline.num_poses(); ++k) {
    out.spline.control_poses()[k] =
        out.spline.control_poses()[k] * so3::exp(step.segment<3>(3 * k));
  }
  for (auto& [id, par] : out.sensors) {
    const int v = offsets.at(id);
    par.extrinsic = par.extrinsic * so3::exp(step.segment<3>(v));
    par.offset += step[v + 3];
    if (classes.at(id) == ResidualClass::ImuRate) {
      par.gyro_bias += step.segment<3>(v + 4);
    }
  }
  return out;
}

std::string smallest_eigenvalues(const Eigen::SparseMatrix<double>& H, int count) {
  const Eigen::MatrixXd Hd(H);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Hd);
  std::ostringstream os;
  os << "smallest normal-equation eigenvalues:";
  for (int k = 0; k < std::min<int>(count, eig.eigenvalues().size()); ++k) {
    os << " " << eig.eigenvalues()[k];
  }
  return os.str();
}

}  // namespace

OptimizeSummary CalibrationProblem::optimize() {
  OptimizeSummary summary;
  Workspace ws;
  double cost = accumulate(state_, &ws, nullptr);
  summary.initial_cost = cost;
  summary.accepted_costs.push_back(cost);
  if (!std::isfinite(cost)) {
    throw ConvergenceError("optimize: initial cost not finite");
  }

  double lambda = 1e-6;
  bool any_accepted = false;
  for (int it = 0; it < opts_.max_iterations; ++it) {
    summary.iterations = it + 1;
    if (ws.g.lpNorm<Eigen::Infinity>() < opts_.gradient_tolerance) {
      summary.converged = true;
      summary.stop_reason = "gradient below tolerance";
      break;
    }

    Eigen::VectorXd diag(num_vars_);
    for (int k = 0; k < num_vars_; ++k) diag[k] = std::max(ws.H.coeff(k, k), 1e-8);

    bool accepted = false;
    double c_new = cost;
    CalibrationState candidate;
    while (!accepted) {
      Eigen::SparseMatrix<double> Hd = ws.H;
      for (int k = 0; k < num_vars_; ++k) Hd.coeffRef(k, k) += lambda * diag[k];
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(Hd);
      if (solver.info() == Eigen::Success) {
        const Eigen::VectorXd step = solver.solve(-ws.g);
        candidate = apply_step(state_, step, param_offset_, classes_);
        bool tau_ok = true;
        for (const auto& [id, par] : candidate.sensors) {
          tau_ok &= std::abs(par.offset) <= opts_.tau_max;
        }
        if (tau_ok) {
          c_new = accumulate(candidate, nullptr, nullptr);
          if (std::isfinite(c_new) && c_new <= cost) {
            accepted = true;
            break;
          }
        }
      }
      lambda *= 10.0;
      if (lambda > 1e14) break;
    }

    if (!accepted) {
      if (!any_accepted) {
        throw ConvergenceError("optimize: no acceptable step at maximum damping; " +
                               smallest_eigenvalues(ws.H, 6));
      }
      summary.converged = true;
      summary.stop_reason = "no further decrease at maximum damping";
      break;
    }

    any_accepted = true;
    const double rel = (cost - c_new) / std::max(cost, 1e-300);
    state_ = std::move(candidate);
    cost = c_new;
    summary.accepted_costs.push_back(cost);
    lambda = std::max(1e-12, lambda * 0.3);
    if (rel < opts_.cost_tolerance) {
      summary.converged = true;
      summary.stop_reason = "relative cost decrease below tolerance";
      break;
    }
    cost = accumulate(state_, &ws, nullptr);
  }

  if (summary.stop_reason.empty()) {
    summary.converged = true;
    summary.stop_reason = "iteration limit";
  }
  summary.final_cost = cost;
  return summary;
}

double CalibrationProblem::max_jacobian_deviation(int probes, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  const size_t n_terms = rate_terms_.size() + pair_terms_.size();
  std::uniform_int_distribution<size_t> pick_term(0, n_terms - 1);
  const double h = 1e-6;
  double worst = 0.0;

  for (int probe = 0; probe < probes; ++probe) {
    const size_t ti = pick_term(rng);
    auto eval_term = [&](const CalibrationState& st, bool jac) {
      if (ti < rate_terms_.size()) {
        const auto& t = rate_terms_[ti];
        const bool ev = t.sensor.empty();
        return rate_residual(st, t.sensor, t.t, t.omega, jac,
                             ev ? -1 : param_offset_.at(t.sensor), !ev);
      }
      const auto& p = pair_terms_[ti - rate_terms_.size()];
      return pair_residual(st, p.sensor, p.t_i, p.t_j, p.rotation, jac,
                           param_offset_.at(p.sensor));
    };

    const EvaluatedTerm base = eval_term(state_, true);
    if (base.jac.empty()) continue;
    std::uniform_int_distribution<size_t> pick_block(0, base.jac.size() - 1);
    const auto& [col, J] = base.jac[pick_block(rng)];
    std::uniform_int_distribution<int> pick_col(0, static_cast<int>(J.cols()) - 1);
    const int c = pick_col(rng);

    Eigen::VectorXd dp = Eigen::VectorXd::Zero(num_vars_);
    dp[col + c] = h;
    const CalibrationState plus = apply_step(state_, dp, param_offset_, classes_);
    dp[col + c] = -h;
    const CalibrationState minus = apply_step(state_, dp, param_offset_, classes_);
    const Vec3 fd = (eval_term(plus, false).r - eval_term(minus, false).r) / (2.0 * h);
    const Vec3 an = J.col(c);
    worst = std::max(worst, (an - fd).norm() / std::max(1.0, fd.norm()));
  }
  return worst;
}

}  // namespace evcal
