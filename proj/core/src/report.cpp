#include "evcal/report.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "evcal/errors.hpp"
#include "evcal/version.hpp"

using nlohmann::json;

namespace evcal {

namespace {

constexpr double kRad2Deg = 180.0 / M_PI;

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }

void dump(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

json load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Vec3 rotation_vector_deg(const Mat3& R) { return kRad2Deg * so3::log(R); }

Mat3 rotation_from_vector_deg(const Vec3& deg) { return so3::exp(deg / kRad2Deg); }

void write_sidecar(const std::string& path, const RigSpec& spec) {
  json j;
  j["seed"] = spec.seed;
  j["duration_s"] = spec.duration;
  j["richness"] = spec.richness;
  j["trajectory_knot_s"] = spec.trajectory_knot;
  json ev;
  ev["width"] = spec.event.intrinsics.width;
  ev["height"] = spec.event.intrinsics.height;
  ev["fx"] = spec.event.intrinsics.fx;
  ev["fy"] = spec.event.intrinsics.fy;
  ev["cx"] = spec.event.intrinsics.cx;
  ev["cy"] = spec.event.intrinsics.cy;
  ev["distortion"] = json::array({spec.event.intrinsics.k1, spec.event.intrinsics.k2,
                                  spec.event.intrinsics.p1, spec.event.intrinsics.p2,
                                  spec.event.intrinsics.k3});
  ev["landmarks"] = spec.event.landmarks;
  ev["edge_points"] = spec.event.edge_points;
  ev["edge_length_px"] = spec.event.edge_length_px;
  ev["contrast_step_px"] = spec.event.contrast_step_px;
  ev["timestamp_jitter_s"] = spec.event.timestamp_jitter;
  ev["spurious_rate_hz"] = spec.event.spurious_rate_hz;
  j["event"] = ev;
  json sensors = json::object();
  for (const auto& s : spec.sensors) {
    json js;
    js["kind"] = to_string(s.kind);
    js["rotation_vector_deg"] = vec3_json(rotation_vector_deg(s.extrinsic));
    js["offset_ms"] = 1e3 * s.offset;
    js["rate_hz"] = s.rate_hz;
    js["sigma"] = s.sigma;
    if (s.kind == SensorKind::Imu) js["gyro_bias_rad_s"] = vec3_json(s.gyro_bias);
    sensors[s.id] = js;
  }
  j["sensors"] = sensors;
  dump(path, j);
}

RigSpec read_sidecar(const std::string& path) {
  const json j = load(path);
  RigSpec spec;
  spec.seed = j.at("seed");
  spec.duration = j.at("duration_s");
  spec.richness = j.at("richness");
  spec.trajectory_knot = j.at("trajectory_knot_s");
  const json& ev = j.at("event");
  spec.event.intrinsics.width = ev.at("width");
  spec.event.intrinsics.height = ev.at("height");
  spec.event.intrinsics.fx = ev.at("fx");
  spec.event.intrinsics.fy = ev.at("fy");
  spec.event.intrinsics.cx = ev.at("cx");
  spec.event.intrinsics.cy = ev.at("cy");
  spec.event.intrinsics.k1 = ev.at("distortion").at(0);
  spec.event.intrinsics.k2 = ev.at("distortion").at(1);
  spec.event.intrinsics.p1 = ev.at("distortion").at(2);
  spec.event.intrinsics.p2 = ev.at("distortion").at(3);
  spec.event.intrinsics.k3 = ev.at("distortion").at(4);
  spec.event.landmarks = ev.at("landmarks");
  spec.event.edge_points = ev.at("edge_points");
  spec.event.edge_length_px = ev.at("edge_length_px");
  spec.event.contrast_step_px = ev.at("contrast_step_px");
  spec.event.timestamp_jitter = ev.at("timestamp_jitter_s");
  spec.event.spurious_rate_hz = ev.at("spurious_rate_hz");
  for (const auto& [id, js] : j.at("sensors").items()) {
    SensorSim s;
    s.id = id;
    s.kind = sensor_kind_from_string(js.at("kind"));
    s.extrinsic = rotation_from_vector_deg(vec3_from(js.at("rotation_vector_deg")));
    s.offset = 1e-3 * js.at("offset_ms").get<double>();
    s.rate_hz = js.at("rate_hz");
    s.sigma = js.at("sigma");
    if (js.contains("gyro_bias_rad_s")) s.gyro_bias = vec3_from(js.at("gyro_bias_rad_s"));
    spec.sensors.push_back(s);
  }
  return spec;
}

namespace {

json residual_json(const ResidualReport& r) {
  json j;
  for (const auto& [cls, b] : r.blocks) {
    json jb;
    jb["count"] = b.count;
    jb["rms"] = b.rms;
    jb["max"] = b.max_norm;
    jb["weight"] = b.weight;
    jb["cost"] = b.cost;
    j[to_string(cls)] = jb;
  }
  j["total_cost"] = r.total_cost;
  return j;
}

}  // namespace

void write_calibration_result(const std::string& path, const CalibrationOutcome& outcome) {
  json j;
  j["version"] = kVersion;
  j["stage"] = outcome.init_only ? "init" : "full";
  json sensors = json::object();
  for (const auto& [id, sr] : outcome.sensors) {
    json js;
    js["kind"] = to_string(sr.kind);
    js["rotation_vector_deg"] = vec3_json(rotation_vector_deg(sr.refined.extrinsic));
    js["offset_ms"] = 1e3 * sr.refined.offset;
    if (sr.kind == SensorKind::Imu) {
      js["gyro_bias_rad_s"] = vec3_json(sr.refined.gyro_bias);
    }
    js["init_rotation_vector_deg"] = vec3_json(rotation_vector_deg(sr.init.extrinsic));
    js["init_offset_ms"] = 1e3 * sr.init.offset;
    js["trace_correlation"] = sr.cca.correlation_opt;
    js["weak_excitation"] = sr.cca.weak_excitation;
    js["excluded_terms"] = sr.excluded_terms;
    sensors[id] = js;
  }
  j["sensors"] = sensors;
  j["residuals"] = residual_json(outcome.residuals);
  if (!outcome.init_only) {
    json opt;
    opt["iterations"] = outcome.summary.iterations;
    opt["converged"] = outcome.summary.converged;
    opt["stop_reason"] = outcome.summary.stop_reason;
    opt["initial_cost"] = outcome.summary.initial_cost;
    opt["final_cost"] = outcome.summary.final_cost;
    j["optimization"] = opt;
  }
  dump(path, j);
}

void write_calibration_report_text(const std::string& path,
                                   const CalibrationOutcome& outcome) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  char buf[256];
  out << "calibration report (stage: " << (outcome.init_only ? "init" : "full") << ")\n";
  out << "----------------------------------------------------------------------\n";
  for (const auto& [id, sr] : outcome.sensors) {
    const Vec3 r = rotation_vector_deg(sr.refined.extrinsic);
    const Vec3 r0 = rotation_vector_deg(sr.init.extrinsic);
    out << id << " (" << to_string(sr.kind) << ")\n";
    std::snprintf(buf, sizeof(buf),
                  "  rotation [deg]   x %+9.4f  y %+9.4f  z %+9.4f\n", r.x(), r.y(), r.z());
    out << buf;
    std::snprintf(buf, sizeof(buf), "  offset [ms]      %+9.4f\n", 1e3 * sr.refined.offset);
    out << buf;
    if (sr.kind == SensorKind::Imu) {
      std::snprintf(buf, sizeof(buf),
                    "  gyro bias [rad/s] %+.6f %+.6f %+.6f\n", sr.refined.gyro_bias.x(),
                    sr.refined.gyro_bias.y(), sr.refined.gyro_bias.z());
      out << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "  init rotation [deg] x %+9.4f  y %+9.4f  z %+9.4f   init offset [ms] %+9.4f\n",
                  r0.x(), r0.y(), r0.z(), 1e3 * sr.init.offset);
    out << buf;
    std::snprintf(buf, sizeof(buf), "  trace correlation %.6f%s   excluded terms %d\n",
                  sr.cca.correlation_opt, sr.cca.weak_excitation ? " (weak excitation!)" : "",
                  sr.excluded_terms);
    out << buf;
  }
  out << "----------------------------------------------------------------------\n";
  out << "residuals\n";
  for (const auto& [cls, b] : outcome.residuals.blocks) {
    std::snprintf(buf, sizeof(buf), "  %-11s count %7d  rms %.6g  max %.6g\n",
                  to_string(cls), b.count, b.rms, b.max_norm);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "  total cost %.9g\n", outcome.residuals.total_cost);
  out << buf;
  if (!outcome.init_only) {
    std::snprintf(buf, sizeof(buf), "optimizer: %d iterations, %s (%s)\n",
                  outcome.summary.iterations,
                  outcome.summary.converged ? "converged" : "NOT converged",
                  outcome.summary.stop_reason.c_str());
    out << buf;
  }
}

std::map<std::string, LoadedSensorResult> read_calibration_result(const std::string& path) {
  const json j = load(path);
  std::map<std::string, LoadedSensorResult> out;
  for (const auto& [id, js] : j.at("sensors").items()) {
    LoadedSensorResult r;
    r.kind = sensor_kind_from_string(js.at("kind"));
    r.rotation_deg = vec3_from(js.at("rotation_vector_deg"));
    r.offset_ms = js.at("offset_ms");
    if (js.contains("gyro_bias_rad_s")) r.gyro_bias = vec3_from(js.at("gyro_bias_rad_s"));
    r.init_rotation_deg = vec3_from(js.at("init_rotation_vector_deg"));
    r.init_offset_ms = js.at("init_offset_ms");
    out[id] = r;
  }
  return out;
}

std::map<std::string, SensorErrors> evaluate_against_sidecar(
    const std::map<std::string, LoadedSensorResult>& result, const RigSpec& sidecar) {
  std::map<std::string, SensorErrors> errors;
  if (result.size() != sidecar.sensors.size()) {
    throw PreconditionError("evaluate: result and sidecar sensor sets differ in size");
  }
  for (const auto& truth : sidecar.sensors) {
    auto it = result.find(truth.id);
    if (it == result.end()) {
      throw PreconditionError("evaluate: sensor '" + truth.id + "' missing from result");
    }
    const Mat3 R_est = rotation_from_vector_deg(it->second.rotation_deg);
    SensorErrors e;
    e.rotation_deg = kRad2Deg * so3::log(truth.extrinsic.transpose() * R_est);
    e.offset_ms = it->second.offset_ms - 1e3 * truth.offset;
    e.gyro_bias = it->second.gyro_bias - truth.gyro_bias;
    errors[truth.id] = e;
  }
  return errors;
}

void write_metrics(const std::string& path,
                   const std::map<std::string, SensorErrors>& errors) {
  json j = json::object();
  for (const auto& [id, e] : errors) {
    json je;
    je["rotation_error_deg"] = vec3_json(e.rotation_deg);
    je["offset_error_ms"] = e.offset_ms;
    je["gyro_bias_error_rad_s"] = vec3_json(e.gyro_bias);
    j[id] = je;
  }
  dump(path, j);
}

void write_manifest(const std::string& path, const std::string& config_text,
                    std::uint64_t seed) {
  json j;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a(config_text)));
  j["config_fnv1a64"] = hex;
  j["seed"] = seed;
  j["version"] = kVersion;
  dump(path, j);
}

void write_correlation_curve(const std::string& path, const CcaResult& cca) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "tau_s,trace_corr\n";
  char buf[80];
  for (size_t k = 0; k < cca.tau_grid.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", cca.tau_grid[k], cca.correlation[k]);
    out << buf;
  }
}

}  // namespace evcal
