#pragma once

#include <map>
#include <string>
#include <vector>

#include "evcal/spline.hpp"
#include "evcal/types.hpp"

namespace evcal {

/// Per-sensor calibration parameters relative to the event camera:
/// rates satisfy omega_e(t + offset) = extrinsic * (omega_o(t) + bias).
struct SensorParameters {
  Mat3 extrinsic = Mat3::Identity();  // R^e_o
  double offset = 0.0;                // tau^e_o, s
  Vec3 gyro_bias = Vec3::Zero();      // rad/s, IMU only
};

struct CalibrationState {
  So3Spline spline;
  std::map<std::string, SensorParameters> sensors;
};

enum class ResidualClass { EventRate, ImuRate, FramePair, LidarPair };
const char* to_string(ResidualClass c);

struct ResidualBlockStats {
  int count = 0;
  double rms = 0.0;       // unweighted residual norm RMS
  double max_norm = 0.0;  // unweighted
  double weight = 1.0;    // class weight applied inside the cost
  double cost = 0.0;      // weighted squared contribution
  std::vector<double> norms;  // per-term unweighted norms (report evaluation only)
};

struct ResidualReport {
  std::map<ResidualClass, ResidualBlockStats> blocks;
  double total_cost = 0.0;
};

struct RefineOptions {
  double knot_interval = 0.1;  // s
  double tau_max = 0.2;        // s, hard bound on |offset|
  bool paper_faithful = false; // unit weights instead of inverse variances
  double huber_delta = 0.0;    // robust loss on block norms; 0 disables
  double sigma_gyro = 0.005;   // rad/s, IMU datasheet noise for weighting
  double sigma_pair = 8.7e-4;  // rad, per-pair rotation noise for weighting
  int max_iterations = 100;
  double cost_tolerance = 1e-10;      // relative decrease of accepted steps
  double gradient_tolerance = 1e-8;   // infinity norm
};

struct OptimizeSummary {
  bool converged = false;
  std::string stop_reason;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::vector<double> accepted_costs;
};

/// Joint refinement of the trajectory control poses, per-sensor extrinsic
/// rotations, time offsets, and the IMU gyro bias.
///
/// The cost sums four residual classes over the trajectory R(t):
///   event rates:  || w(t_m) - omega_e(t_m) ||^2
///   IMU rates:    || w(t_n + tau) - R (omega_i(t_n) + b) ||^2
///   frame pairs:  || log(R_x' R(t_i+tau)' R(t_j+tau) R_x M_ij) ||^2
///   LiDAR pairs:  same form,
/// with w(.) the spline's body angular velocity. Offsets enter through the
/// evaluation time; terms whose shifted timestamps leave the evaluable
/// span at build time are excluded and counted.
class CalibrationProblem {
public:
  CalibrationProblem(const SensorTrack& event_track,
                     const std::vector<SensorTrack>& other_tracks,
                     const std::map<std::string, SensorParameters>& init,
                     const RefineOptions& opts = {});

  const CalibrationState& state() const { return state_; }
  CalibrationState& state() { return state_; }

  ResidualReport evaluate() const { return evaluate(state_); }
  ResidualReport evaluate(const CalibrationState& s) const;

  /// Levenberg-Marquardt on the product manifold (control poses and
  /// extrinsics via right-multiplicative increments, offsets and bias
  /// Euclidean). Accepted steps never increase the cost. Throws
  /// ConvergenceError when no step can be accepted at maximum damping;
  /// the message reports the smallest normal-equation eigenvalues.
  OptimizeSummary optimize();

  /// Max relative deviation between the analytic Jacobian and a central
  /// finite difference (h = 1e-6) over `probes` random residual/variable
  /// pairs. Deterministic in `seed`.
  double max_jacobian_deviation(int probes, std::uint64_t seed) const;

  int excluded_terms(const std::string& sensor_id) const;
  const std::map<std::string, ResidualClass>& sensor_classes() const { return classes_; }

private:
  struct RateTerm {
    std::string sensor;  // empty = event camera
    double t = 0.0;
    Vec3 omega = Vec3::Zero();
  };
  struct PairTerm {
    std::string sensor;
    double t_i = 0.0, t_j = 0.0;
    Mat3 rotation = Mat3::Identity();
  };

  void build_terms(const SensorTrack& event_track,
                   const std::vector<SensorTrack>& other_tracks,
                   const std::map<std::string, SensorParameters>& init);

  struct Workspace;
  double accumulate(const CalibrationState& s, Workspace* ws, ResidualReport* report) const;

  RefineOptions opts_;
  CalibrationState state_;
  std::vector<RateTerm> rate_terms_;
  std::vector<PairTerm> pair_terms_;
  std::map<std::string, ResidualClass> classes_;
  std::map<std::string, int> excluded_;
  std::map<ResidualClass, double> weights_;
  std::map<std::string, int> param_offset_;  // first variable index per sensor
  int num_vars_ = 0;
};

}  // namespace evcal
