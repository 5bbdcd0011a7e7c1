#pragma once

#include <map>
#include <string>

#include "evcal/calibrate.hpp"
#include "evcal/sim.hpp"

namespace evcal {

/// Rotation as a per-axis rotation vector in degrees (the presentation all
/// reports use).
Vec3 rotation_vector_deg(const Mat3& R);
Mat3 rotation_from_vector_deg(const Vec3& deg);

/// Ground-truth sidecar: the rig spec with every true parameter.
void write_sidecar(const std::string& path, const RigSpec& spec);
RigSpec read_sidecar(const std::string& path);

/// Machine-readable calibration result (JSON) and its human-readable twin.
void write_calibration_result(const std::string& path, const CalibrationOutcome& outcome);
void write_calibration_report_text(const std::string& path,
                                   const CalibrationOutcome& outcome);

/// Minimal view of a result file needed for evaluation.
struct LoadedSensorResult {
  SensorKind kind = SensorKind::Imu;
  Vec3 rotation_deg = Vec3::Zero();
  double offset_ms = 0.0;
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 init_rotation_deg = Vec3::Zero();
  double init_offset_ms = 0.0;
};
std::map<std::string, LoadedSensorResult> read_calibration_result(const std::string& path);

/// Per-sensor errors of a result against the ground-truth sidecar:
/// rotation-vector error per axis (deg), offset error (ms), bias error
/// (rad/s). Throws on mismatched sensor sets.
struct SensorErrors {
  Vec3 rotation_deg = Vec3::Zero();
  double offset_ms = 0.0;
  Vec3 gyro_bias = Vec3::Zero();
};
std::map<std::string, SensorErrors> evaluate_against_sidecar(
    const std::map<std::string, LoadedSensorResult>& result, const RigSpec& sidecar);

void write_metrics(const std::string& path,
                   const std::map<std::string, SensorErrors>& errors);

/// Reproducibility manifest: config hash (FNV-1a 64 of the config text),
/// seed, tool version.
void write_manifest(const std::string& path, const std::string& config_text,
                    std::uint64_t seed);

/// r(tau) curve dump: "tau_s,trace_corr".
void write_correlation_curve(const std::string& path, const CcaResult& cca);

}  // namespace evcal
