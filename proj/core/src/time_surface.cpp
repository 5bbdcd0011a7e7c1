#include "evcal/time_surface.hpp"

#include "evcal/errors.hpp"

namespace evcal {

TimeSurface::TimeSurface(int width, int height, double t_ref)
    : width_(width),
      height_(height),
      t_ref_(t_ref),
      times_(static_cast<size_t>(width) * height, never()),
      polarities_(static_cast<size_t>(width) * height, 0) {}

void TimeSurface::insert(const Event& e) {
  if (e.x < 0 || e.x >= width_ || e.y < 0 || e.y >= height_) {
    throw PreconditionError("TimeSurface::insert: pixel out of bounds");
  }
  if (e.t > t_ref_) {
    throw PreconditionError("TimeSurface::insert: event time past t_ref");
  }
  const int k = idx(e.x, e.y);
  if (e.t >= times_[k]) {
    times_[k] = e.t;
    polarities_[k] = static_cast<std::int8_t>(e.polarity);
  }
}

TimeSurface build_time_surface(std::span<const Event> events, int width, int height,
                               double t_ref) {
  TimeSurface surface(width, height, t_ref);
  double prev = -std::numeric_limits<double>::infinity();
  for (const Event& e : events) {
    if (e.t < prev) {
      throw PreconditionError("build_time_surface: events not sorted by time");
    }
    prev = e.t;
    surface.insert(e);
  }
  return surface;
}

}  // namespace evcal
