#pragma once

#include <limits>
#include <span>
#include <vector>

#include "evcal/types.hpp"

namespace evcal {

/// Per-pixel map of the most recent event time (and its polarity) up to a
/// reference time. Untouched pixels hold `never()`.
class TimeSurface {
public:
  TimeSurface(int width, int height, double t_ref);

  static constexpr double never() { return -std::numeric_limits<double>::infinity(); }

  int width() const { return width_; }
  int height() const { return height_; }
  double t_ref() const { return t_ref_; }

  double time_at(int x, int y) const { return times_[idx(x, y)]; }
  int polarity_at(int x, int y) const { return polarities_[idx(x, y)]; }
  bool touched(int x, int y) const { return times_[idx(x, y)] != never(); }

  /// Insert one event (t <= t_ref). A pixel's stored time never decreases.
  void insert(const Event& e);

private:
  int idx(int x, int y) const { return y * width_ + x; }

  int width_, height_;
  double t_ref_;
  std::vector<double> times_;
  std::vector<std::int8_t> polarities_;
};

/// Build a surface from a time-sorted event span; every event must satisfy
/// t <= t_ref. Throws PreconditionError on unsorted input.
TimeSurface build_time_surface(std::span<const Event> events, int width, int height,
                               double t_ref);

}  // namespace evcal
