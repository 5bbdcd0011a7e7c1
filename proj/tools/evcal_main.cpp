// evcal: batch front door for the calibration toolkit. Subcommands:
//   simulate   write a synthetic rig (events + motion tracks + truth sidecar)
//   calibrate  run the full pipeline (or the correlation init only)
//   evaluate   score a result against a sidecar; optional duration sweep
#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "evcal/angular_velocity.hpp"
#include "evcal/calibrate.hpp"
#include "evcal/errors.hpp"
#include "evcal/report.hpp"
#include "evcal/sim.hpp"
#include "evcal/track_io.hpp"
#include "evcal/version.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace evcal;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitConvergence = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json parse_config(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

CameraIntrinsics intrinsics_from(const json& j) {
  CameraIntrinsics K = default_event_camera();
  if (j.contains("width")) K.width = j.at("width");
  if (j.contains("height")) K.height = j.at("height");
  if (j.contains("fx")) K.fx = j.at("fx");
  if (j.contains("fy")) K.fy = j.at("fy");
  if (j.contains("cx")) K.cx = j.at("cx");
  if (j.contains("cy")) K.cy = j.at("cy");
  if (j.contains("distortion")) {
    const auto& d = j.at("distortion");
    K.k1 = d.at(0);
    K.k2 = d.at(1);
    K.p1 = d.at(2);
    K.p2 = d.at(3);
    if (d.size() > 4) K.k3 = d.at(4);
  }
  return K;
}

json intrinsics_to(const CameraIntrinsics& K) {
  json j;
  j["width"] = K.width;
  j["height"] = K.height;
  j["fx"] = K.fx;
  j["fy"] = K.fy;
  j["cx"] = K.cx;
  j["cy"] = K.cy;
  j["distortion"] = {K.k1, K.k2, K.p1, K.p2, K.k3};
  return j;
}

// Minimal self-contained SVG line chart.
void write_svg_lines(const std::string& path, const std::string& title,
                     const std::vector<std::pair<double, double>>& points) {
  if (points.empty()) return;
  const int W = 640, H = 400, M = 50;
  double x0 = points[0].first, x1 = x0, y0 = points[0].second, y1 = y0;
  for (const auto& [x, y] : points) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double x) { return M + (W - 2 * M) * (x - x0) / (x1 - x0); };
  auto py = [&](double y) { return H - M - (H - 2 * M) * (y - y0) / (y1 - y0); };

  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
      << "</text>\n";
  out << "<line x1='" << M << "' y1='" << H - M << "' x2='" << W - M << "' y2='" << H - M
      << "' stroke='black'/>\n";
  out << "<line x1='" << M << "' y1='" << M << "' x2='" << M << "' y2='" << H - M
      << "' stroke='black'/>\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", x0);
  out << "<text x='" << M << "' y='" << H - M + 18 << "' font-size='11'>" << buf
      << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.4g", x1);
  out << "<text x='" << W - M << "' y='" << H - M + 18
      << "' text-anchor='end' font-size='11'>" << buf << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.4g", y0);
  out << "<text x='" << M - 4 << "' y='" << H - M << "' text-anchor='end' font-size='11'>"
      << buf << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%.4g", y1);
  out << "<text x='" << M - 4 << "' y='" << M << "' text-anchor='end' font-size='11'>"
      << buf << "</text>\n";
  out << "<polyline fill='none' stroke='#1f6fb2' stroke-width='1.5' points='";
  for (const auto& [x, y] : points) out << px(x) << "," << py(y) << " ";
  out << "'/>\n</svg>\n";
}

void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::vector<double>& values, int bins = 40) {
  if (values.empty()) return;
  const double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (hi == lo) hi = lo + 1e-12;
  std::vector<double> counts(bins, 0.0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    counts[std::clamp(b, 0, bins - 1)] += 1.0;
  }
  std::vector<std::pair<double, double>> pts;
  for (int b = 0; b < bins; ++b) {
    pts.emplace_back(lo + (b + 0.5) * (hi - lo) / bins, counts[b]);
  }
  write_svg_lines(path, title, pts);
}

// ---------------------------------------------------------------- simulate

RigSpec rig_from_config(const json& sim, std::uint64_t seed) {
  RigSpec spec;
  spec.seed = seed;
  spec.duration = sim.value("duration_s", 30.0);
  spec.richness = sim.value("richness", 1.0);
  spec.trajectory_knot = sim.value("trajectory_knot_s", 0.05);
  if (sim.contains("event")) {
    const json& ev = sim.at("event");
    spec.event.intrinsics = intrinsics_from(ev);
    spec.event.landmarks = ev.value("landmarks", spec.event.landmarks);
    spec.event.edge_points = ev.value("edge_points", spec.event.edge_points);
    spec.event.edge_length_px = ev.value("edge_length_px", spec.event.edge_length_px);
    spec.event.contrast_step_px = ev.value("contrast_step_px", spec.event.contrast_step_px);
    spec.event.timestamp_jitter = ev.value("timestamp_jitter_s", spec.event.timestamp_jitter);
    spec.event.spurious_rate_hz = ev.value("spurious_rate_hz", spec.event.spurious_rate_hz);
  } else {
    spec.event.intrinsics = default_event_camera();
  }
  if (!sim.contains("sensors")) {
    throw PreconditionError("simulate config: missing 'sensors'");
  }
  for (const auto& [id, js] : sim.at("sensors").items()) {
    SensorSim s;
    s.id = id;
    s.kind = sensor_kind_from_string(js.at("kind"));
    if (s.kind == SensorKind::Event) {
      throw PreconditionError("simulate config: the event camera is implicit; "
                              "'sensors' lists the other modalities");
    }
    if (js.contains("rotation_vector_deg")) {
      const auto& r = js.at("rotation_vector_deg");
      s.extrinsic = rotation_from_vector_deg(Vec3(r.at(0), r.at(1), r.at(2)));
    }
    s.offset = 1e-3 * js.value("offset_ms", 0.0);
    s.rate_hz = js.value("rate_hz", s.kind == SensorKind::Imu ? 200.0 : 20.0);
    s.sigma = js.value("sigma", 0.0);
    if (js.contains("gyro_bias_rad_s")) {
      const auto& b = js.at("gyro_bias_rad_s");
      s.gyro_bias = Vec3(b.at(0), b.at(1), b.at(2));
    }
    spec.sensors.push_back(s);
  }
  return spec;
}

int cmd_simulate(const std::string& config_path, std::uint64_t seed,
                 const std::string& out_dir) {
  const json cfg = parse_config(config_path);
  if (!cfg.contains("simulate")) throw PreconditionError("config: missing 'simulate'");
  const RigSpec spec = rig_from_config(cfg.at("simulate"), seed);
  const bool binary_events = cfg.at("simulate").value("event_format", "binary") == "binary";

  fs::create_directories(out_dir);
  const auto rig = simulate_rig(spec);

  const std::string event_file =
      (fs::path(out_dir) / (binary_events ? "events.bin" : "events.txt")).string();
  if (binary_events) {
    save_events_binary(event_file, rig.events);
  } else {
    save_events_text(event_file, rig.events);
  }

  json inputs;
  inputs["event0"] = {{"kind", "event"}, {"path", event_file}};
  for (const auto& track : rig.tracks) {
    const std::string path = (fs::path(out_dir) / (track.id + ".csv")).string();
    save_track(path, track);
    inputs[track.id] = {{"kind", to_string(track.kind)}, {"path", path}};
  }

  write_sidecar((fs::path(out_dir) / "sidecar.json").string(), spec);

  // A calibrate-ready config pointing at the generated files.
  json run;
  run["calibrate"] = cfg.value("calibrate", json::object());
  run["calibrate"]["inputs"] = inputs;
  run["calibrate"]["intrinsics"] = intrinsics_to(spec.event.intrinsics);
  {
    std::ofstream out(fs::path(out_dir) / "run_config.json");
    out << run.dump(2) << "\n";
  }
  write_manifest((fs::path(out_dir) / "manifest.json").string(), cfg.dump(), seed);
  std::cout << "simulated rig: " << rig.events.events.size() << " events, "
            << rig.tracks.size() << " sensor tracks -> " << out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------- calibrate

struct LoadedInputs {
  SensorTrack event_track;
  std::vector<SensorTrack> others;
  TrackReport event_report;
};

LoadedInputs load_inputs(const json& cal, std::uint64_t seed) {
  if (!cal.contains("inputs")) throw PreconditionError("config: missing 'calibrate.inputs'");
  LoadedInputs out;
  bool have_event = false;
  for (const auto& [id, js] : cal.at("inputs").items()) {
    const SensorKind kind = sensor_kind_from_string(js.at("kind"));
    const std::string path = js.at("path");
    if (kind == SensorKind::Event) {
      if (have_event) throw PreconditionError("config: exactly one event track required");
      have_event = true;
      const auto stream = load_events(path);
      CameraIntrinsics K = cal.contains("intrinsics")
                               ? intrinsics_from(cal.at("intrinsics"))
                               : default_event_camera();
      if (K.width != stream.width || K.height != stream.height) {
        K.width = stream.width;
        K.height = stream.height;
      }
      TrackConfig tc;
      tc.window = cal.value("window_s", tc.window);
      tc.stride = cal.value("stride_s", tc.stride);
      tc.discard_fraction = cal.value("discard_fraction", tc.discard_fraction);
      tc.seed = seed;
      if (cal.contains("ransac")) {
        const json& r = cal.at("ransac");
        tc.ransac.max_iterations = r.value("iterations", tc.ransac.max_iterations);
        tc.ransac.threshold_floor = r.value("threshold_floor", tc.ransac.threshold_floor);
        tc.ransac.mad_scale = r.value("mad_scale", tc.ransac.mad_scale);
        tc.ransac.min_inlier_fraction =
            r.value("min_inlier_fraction", tc.ransac.min_inlier_fraction);
      }
      out.event_track.id = id;
      out.event_track.kind = SensorKind::Event;
      out.event_track.samples =
          angular_velocity_track(stream.events, K, tc, &out.event_report);
      if (out.event_track.samples.size() >= 2) {
        out.event_track.native_rate_hz =
            (out.event_track.samples.size() - 1) /
            (out.event_track.samples.back().t - out.event_track.samples.front().t);
      }
    } else {
      TrackLoadOptions opts;
      opts.invert_relative_rotations = cal.value("invert_relative_rotations", false);
      auto track = load_track(path, kind, opts);
      track.id = id;
      out.others.push_back(std::move(track));
    }
  }
  if (!have_event) {
    throw PreconditionError("config: an event track is required (kind 'event')");
  }
  return out;
}

CalibrateConfig calibrate_config_from(const json& cal, bool paper_faithful,
                                      bool init_only) {
  CalibrateConfig cfg;
  if (cal.contains("cca")) {
    const json& c = cal.at("cca");
    cfg.cca.search_range = c.value("range_s", cfg.cca.search_range);
    cfg.cca.search_step = c.value("step_s", cfg.cca.search_step);
    cfg.cca.min_overlap = c.value("min_overlap_s", cfg.cca.min_overlap);
  }
  if (cal.contains("refine")) {
    const json& r = cal.at("refine");
    cfg.refine.knot_interval = r.value("knot_interval_s", cfg.refine.knot_interval);
    cfg.refine.tau_max = r.value("tau_max_s", cfg.refine.tau_max);
    cfg.refine.huber_delta = r.value("huber_delta", cfg.refine.huber_delta);
    cfg.refine.sigma_gyro = r.value("sigma_gyro", cfg.refine.sigma_gyro);
    cfg.refine.sigma_pair = r.value("sigma_pair_rad", cfg.refine.sigma_pair);
    cfg.refine.max_iterations = r.value("max_iterations", cfg.refine.max_iterations);
  }
  cfg.refine.paper_faithful = paper_faithful;
  cfg.init_only = init_only;
  return cfg;
}

int cmd_calibrate(const std::string& config_path, std::uint64_t seed,
                  const std::string& stage, bool paper_faithful,
                  const std::string& out_dir) {
  const json cfg = parse_config(config_path);
  if (!cfg.contains("calibrate")) throw PreconditionError("config: missing 'calibrate'");
  const json& cal = cfg.at("calibrate");
  fs::create_directories(out_dir);

  const auto inputs = load_inputs(cal, seed);
  if (inputs.event_report.windows_total > 0) {
    std::cout << "event windows: " << inputs.event_report.windows_ok << "/"
              << inputs.event_report.windows_total << " usable\n";
  }
  save_omega_track_csv((fs::path(out_dir) / "event_rates.csv").string(),
                       inputs.event_track.id, inputs.event_track.samples);

  const CalibrateConfig ccfg = calibrate_config_from(cal, paper_faithful, stage == "init");
  const auto outcome = calibrate(inputs.event_track, inputs.others, ccfg);

  write_calibration_result((fs::path(out_dir) / "calibration_result.json").string(),
                           outcome);
  write_calibration_report_text((fs::path(out_dir) / "calibration_report.txt").string(),
                                outcome);
  for (const auto& [id, sr] : outcome.sensors) {
    write_correlation_curve((fs::path(out_dir) / ("cca_" + id + ".csv")).string(), sr.cca);
    std::vector<std::pair<double, double>> pts;
    for (size_t k = 0; k < sr.cca.tau_grid.size(); ++k) {
      pts.emplace_back(sr.cca.tau_grid[k], sr.cca.correlation[k]);
    }
    write_svg_lines((fs::path(out_dir) / ("cca_" + id + ".svg")).string(),
                    "trace correlation vs offset [s]: " + id, pts);
  }
  for (const auto& [cls, b] : outcome.residuals.blocks) {
    write_histogram_svg(
        (fs::path(out_dir) / ("residuals_" + std::string(to_string(cls)) + ".svg")).string(),
        std::string("residual norms: ") + to_string(cls), b.norms);
  }
  write_manifest((fs::path(out_dir) / "manifest.json").string(), cfg.dump(), seed);

  std::cout << "stage: " << (ccfg.init_only ? "init" : "full") << "\n";
  for (const auto& [id, sr] : outcome.sensors) {
    const Vec3 r = rotation_vector_deg(sr.refined.extrinsic);
    std::cout << id << ": rot [deg] = (" << r.x() << ", " << r.y() << ", " << r.z()
              << "), offset = " << 1e3 * sr.refined.offset << " ms\n";
  }
  return 0;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const std::string& result_path, const std::string& sidecar_path,
                 const std::string& out_dir) {
  fs::create_directories(out_dir);
  const auto result = read_calibration_result(result_path);
  const auto sidecar = read_sidecar(sidecar_path);
  const auto errors = evaluate_against_sidecar(result, sidecar);
  write_metrics((fs::path(out_dir) / "metrics.json").string(), errors);
  for (const auto& [id, e] : errors) {
    std::cout << id << ": rot err [deg] = (" << e.rotation_deg.x() << ", "
              << e.rotation_deg.y() << ", " << e.rotation_deg.z()
              << "), offset err = " << e.offset_ms << " ms\n";
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& sidecar_path,
              std::uint64_t seed, const std::vector<double>& durations,
              const std::string& out_dir) {
  const json cfg = parse_config(config_path);
  if (!cfg.contains("calibrate")) throw PreconditionError("config: missing 'calibrate'");
  const json& cal = cfg.at("calibrate");
  fs::create_directories(out_dir);

  const auto inputs = load_inputs(cal, seed);
  const auto sidecar = read_sidecar(sidecar_path);
  const CalibrateConfig ccfg = calibrate_config_from(cal, false, false);

  const double t0 = inputs.event_track.samples.front().t;
  const double t1 = inputs.event_track.samples.back().t;
  std::mt19937_64 rng(seed);

  std::ofstream csv(fs::path(out_dir) / "duration_sweep.csv");
  csv << "duration_s,sensor,rot_err_deg,offset_err_ms\n";
  std::vector<std::pair<double, double>> trend;

  for (double d : durations) {
    if (d > t1 - t0) {
      throw PreconditionError("sweep: window longer than the data span");
    }
    std::uniform_real_distribution<double> off(0.0, (t1 - t0) - d);
    const double w0 = t0 + off(rng);
    const double w1 = w0 + d;

    auto slice_rates = [&](const SensorTrack& t) {
      SensorTrack out = t;
      out.samples.clear();
      for (const auto& s : t.samples) {
        if (s.t >= w0 && s.t <= w1) out.samples.push_back(s);
      }
      return out;
    };
    auto slice_pairs = [&](const SensorTrack& t) {
      SensorTrack out = t;
      out.relative_rotations.clear();
      for (const auto& p : t.relative_rotations) {
        if (p.t_i >= w0 && p.t_j <= w1) out.relative_rotations.push_back(p);
      }
      return out;
    };

    const SensorTrack ev = slice_rates(inputs.event_track);
    std::vector<SensorTrack> others;
    for (const auto& t : inputs.others) {
      others.push_back(t.has_rate_samples() ? slice_rates(t) : slice_pairs(t));
    }
    const auto outcome = calibrate(ev, others, ccfg);

    double worst_rot = 0.0;
    for (const auto& truth : sidecar.sensors) {
      const auto& sr = outcome.sensors.at(truth.id);
      const Vec3 rerr = rotation_vector_deg(truth.extrinsic.transpose() *
                                            sr.refined.extrinsic * Mat3::Identity());
      const double offset_err = 1e3 * (sr.refined.offset - truth.offset);
      csv << d << ',' << truth.id << ',' << rerr.norm() << ',' << offset_err << "\n";
      worst_rot = std::max(worst_rot, rerr.norm());
    }
    trend.emplace_back(d, worst_rot);
  }
  write_svg_lines((fs::path(out_dir) / "duration_sweep.svg").string(),
                  "worst rotation error [deg] vs window [s]", trend);
  write_manifest((fs::path(out_dir) / "manifest.json").string(), cfg.dump(), seed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"targetless temporal & rotational calibration for event-centric rigs"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", result_path, sidecar_path;
  std::string stage = "full";
  std::uint64_t seed = 1;
  bool paper_faithful = false;
  bool sweep = false;
  std::vector<double> durations{5.0, 10.0, 20.0, 30.0};

  auto* sim = app.add_subcommand("simulate", "write a synthetic rig");
  sim->add_option("--config", config_path, "config file (JSON)")->required();
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("--out", out_dir, "output directory");

  auto* cal = app.add_subcommand("calibrate", "run the calibration pipeline");
  cal->add_option("--config", config_path, "config file (JSON)")->required();
  cal->add_option("--seed", seed, "random seed");
  cal->add_option("--stage", stage, "init|full")->check(CLI::IsMember({"init", "full"}));
  cal->add_flag("--paper-faithful", paper_faithful, "unit residual weights");
  cal->add_option("--out", out_dir, "output directory");

  auto* eva = app.add_subcommand("evaluate", "score a result against a sidecar");
  eva->add_option("--result", result_path, "calibration_result.json");
  eva->add_option("--sidecar", sidecar_path, "ground-truth sidecar")->required();
  eva->add_flag("--sweep", sweep, "duration-sweep mode (re-runs calibration)");
  eva->add_option("--config", config_path, "config file (sweep mode)");
  eva->add_option("--seed", seed, "random seed (sweep windows)");
  eva->add_option("--durations", durations, "sweep window lengths [s]");
  eva->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, seed, out_dir);
    if (cal->parsed()) {
      return cmd_calibrate(config_path, seed, stage, paper_faithful, out_dir);
    }
    if (sweep) {
      if (config_path.empty()) {
        throw PreconditionError("evaluate --sweep requires --config");
      }
      return cmd_sweep(config_path, sidecar_path, seed, durations, out_dir);
    }
    if (result_path.empty()) {
      throw PreconditionError("evaluate requires --result (or --sweep)");
    }
    return cmd_evaluate(result_path, sidecar_path, out_dir);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
