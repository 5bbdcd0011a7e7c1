#include "evcal/track_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "evcal/errors.hpp"
#include "evcal/resample.hpp"

static_assert(std::endian::native == std::endian::little,
              "packed event records assume a little-endian host");

namespace evcal {

namespace {

constexpr char kEventMagic[4] = {'E', 'V', 'T', '1'};
constexpr size_t kEventRecordSize = 14;  // f64 t, u16 x, u16 y, i8 p, 1 pad

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& why) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + why);
}

bool is_binary_events(std::ifstream& in) {
  char magic[4];
  in.read(magic, 4);
  const bool binary = in.gcount() == 4 && std::memcmp(magic, kEventMagic, 4) == 0;
  in.clear();
  in.seekg(0);
  return binary;
}

EventStream load_events_text(std::ifstream& in, const std::string& path) {
  EventStream stream;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  double prev_t = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      int w = 0, h = 0;
      if (std::sscanf(line.c_str(), "# events width=%d height=%d", &w, &h) == 2) {
        stream.width = w;
        stream.height = h;
        have_header = true;
      }
      continue;
    }
    if (!have_header) parse_fail(path, lineno, "missing '# events width=W height=H' header");
    Event e;
    double t;
    int x, y, p;
    if (std::sscanf(line.c_str(), "%lf %d %d %d", &t, &x, &y, &p) != 4) {
      parse_fail(path, lineno, "expected 't x y p'");
    }
    if (p != 0 && p != 1) parse_fail(path, lineno, "polarity must be 0 or 1");
    if (x < 0 || x >= stream.width || y < 0 || y >= stream.height) {
      parse_fail(path, lineno, "pixel out of bounds");
    }
    if (t < prev_t) parse_fail(path, lineno, "event times must be non-decreasing");
    prev_t = t;
    e.t = t;
    e.x = x;
    e.y = y;
    e.polarity = p == 1 ? 1 : -1;
    stream.events.push_back(e);
  }
  return stream;
}

EventStream load_events_binary(std::ifstream& in, const std::string& path) {
  char magic[4];
  in.read(magic, 4);
  std::uint16_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 2);
  in.read(reinterpret_cast<char*>(&h), 2);
  if (!in) throw ParseError(path + ": truncated binary event header");

  EventStream stream;
  stream.width = w;
  stream.height = h;
  char rec[kEventRecordSize];
  double prev_t = -std::numeric_limits<double>::infinity();
  size_t n = 0;
  while (in.read(rec, kEventRecordSize)) {
    ++n;
    Event e;
    double t;
    std::uint16_t x, y;
    std::int8_t p;
    std::memcpy(&t, rec, 8);
    std::memcpy(&x, rec + 8, 2);
    std::memcpy(&y, rec + 10, 2);
    std::memcpy(&p, rec + 12, 1);
    if (p != 1 && p != -1) {
      throw ParseError(path + ": record " + std::to_string(n) + ": polarity must be +-1");
    }
    if (x >= stream.width || y >= stream.height) {
      throw ParseError(path + ": record " + std::to_string(n) + ": pixel out of bounds");
    }
    if (t < prev_t) {
      throw ParseError(path + ": record " + std::to_string(n) + ": times must be non-decreasing");
    }
    prev_t = t;
    e.t = t;
    e.x = x;
    e.y = y;
    e.polarity = p;
    stream.events.push_back(e);
  }
  if (in.gcount() != 0) throw ParseError(path + ": trailing partial event record");
  return stream;
}

}  // namespace

EventStream load_events(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  if (is_binary_events(in)) return load_events_binary(in, path);
  return load_events_text(in, path);
}

void save_events_text(const std::string& path, const EventStream& stream) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "# events width=" << stream.width << " height=" << stream.height << "\n";
  char buf[64];
  for (const Event& e : stream.events) {
    std::snprintf(buf, sizeof(buf), "%.9f %d %d %d\n", e.t, e.x, e.y,
                  e.polarity > 0 ? 1 : 0);
    out << buf;
  }
}

void save_events_binary(const std::string& path, const EventStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out.write(kEventMagic, 4);
  const std::uint16_t w = static_cast<std::uint16_t>(stream.width);
  const std::uint16_t h = static_cast<std::uint16_t>(stream.height);
  out.write(reinterpret_cast<const char*>(&w), 2);
  out.write(reinterpret_cast<const char*>(&h), 2);
  char rec[kEventRecordSize];
  for (const Event& e : stream.events) {
    const std::uint16_t x = static_cast<std::uint16_t>(e.x);
    const std::uint16_t y = static_cast<std::uint16_t>(e.y);
    const std::int8_t p = static_cast<std::int8_t>(e.polarity);
    std::memcpy(rec, &e.t, 8);
    std::memcpy(rec + 8, &x, 2);
    std::memcpy(rec + 10, &y, 2);
    std::memcpy(rec + 12, &p, 1);
    rec[13] = 0;
    out.write(rec, kEventRecordSize);
  }
}

SensorTrack load_track(const std::string& path, SensorKind kind,
                       const TrackLoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");

  SensorTrack track;
  track.kind = kind;
  const bool rate_kind = kind == SensorKind::Imu || kind == SensorKind::Event;
  bool invert = opts.invert_relative_rotations;

  std::string line;
  int lineno = 0;
  double prev_t = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hdr(line.substr(1));
      std::string tok;
      while (hdr >> tok) {
        if (tok.rfind("sensor_id=", 0) == 0) track.id = tok.substr(10);
        if (tok == "convention=earlier_from_later") invert = !opts.invert_relative_rotations;
      }
      continue;
    }
    if (rate_kind) {
      AngularVelocitySample s;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &s.t, &s.omega.x(), &s.omega.y(),
                      &s.omega.z()) != 4) {
        parse_fail(path, lineno, "expected 't,wx,wy,wz'");
      }
      if (s.t <= prev_t) {
        parse_fail(path, lineno, "timestamps must be strictly increasing");
      }
      prev_t = s.t;
      track.samples.push_back(s);
    } else {
      double ti, tj;
      Vec3 r;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &ti, &tj, &r.x(), &r.y(),
                      &r.z()) != 5) {
        parse_fail(path, lineno, "expected 't_i,t_j,rx,ry,rz'");
      }
      if (!(tj > ti)) parse_fail(path, lineno, "t_j must exceed t_i");
      if (ti <= prev_t) {
        parse_fail(path, lineno, "timestamps must be strictly increasing");
      }
      prev_t = ti;
      RelativeRotationSample s;
      s.t_i = ti;
      s.t_j = tj;
      s.rotvec = invert ? Vec3(-r) : r;
      track.relative_rotations.push_back(s);
    }
  }
  if (track.samples.empty() && track.relative_rotations.empty()) {
    throw ParseError(path + ": no samples");
  }
  const double span = track.end_time() - track.begin_time();
  const size_t n = rate_kind ? track.samples.size() : track.relative_rotations.size();
  track.native_rate_hz = span > 0.0 ? (n - 1) / span : 0.0;
  return track;
}

void save_track(const std::string& path, const SensorTrack& track) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "# sensor_id=" << track.id << " kind=" << to_string(track.kind);
  if (track.has_rate_samples()) {
    out << " convention=body_rate\n# columns: t,wx,wy,wz\n";
    for (const auto& s : track.samples) {
      out << fmt_double(s.t) << ',' << fmt_double(s.omega.x()) << ','
          << fmt_double(s.omega.y()) << ',' << fmt_double(s.omega.z()) << '\n';
    }
  } else {
    out << " convention=later_from_earlier\n# columns: t_i,t_j,rx,ry,rz\n";
    for (const auto& s : track.relative_rotations) {
      const Vec3& r = s.rotvec;
      out << fmt_double(s.t_i) << ',' << fmt_double(s.t_j) << ',' << fmt_double(r.x())
          << ',' << fmt_double(r.y()) << ',' << fmt_double(r.z()) << '\n';
    }
  }
}

void save_omega_track_csv(const std::string& path, const std::string& sensor_id,
                          std::span<const AngularVelocitySample> samples) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << "# sensor_id=" << sensor_id << " kind=event convention=body_rate\n";
  out << "# columns: t,wx,wy,wz,inliers,support\n";
  for (const auto& s : samples) {
    out << fmt_double(s.t) << ',' << fmt_double(s.omega.x()) << ','
        << fmt_double(s.omega.y()) << ',' << fmt_double(s.omega.z()) << ','
        << s.inlier_count << ',' << fmt_double(s.support) << '\n';
  }
}

std::vector<AngularVelocitySample> load_omega_track_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::vector<AngularVelocitySample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    AngularVelocitySample s;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%d,%lf", &s.t, &s.omega.x(),
                    &s.omega.y(), &s.omega.z(), &s.inlier_count, &s.support) != 6) {
      parse_fail(path, lineno, "expected 't,wx,wy,wz,inliers,support'");
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace evcal
