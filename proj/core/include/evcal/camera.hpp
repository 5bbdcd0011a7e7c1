#pragma once

#include "evcal/so3.hpp"

namespace evcal {

/// Pinhole intrinsics with Brown-Conrady distortion (k1, k2, p1, p2, k3).
struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0;  // px
  double cx = 0.0, cy = 0.0;  // px
  double k1 = 0.0, k2 = 0.0, p1 = 0.0, p2 = 0.0, k3 = 0.0;
  int width = 0, height = 0;

  bool has_distortion() const {
    return k1 != 0.0 || k2 != 0.0 || p1 != 0.0 || p2 != 0.0 || k3 != 0.0;
  }

  /// Normalized camera coordinates -> distorted pixel coordinates.
  Vec2 project(const Vec2& normalized) const;

  /// Distorted pixel coordinates -> undistorted normalized coordinates
  /// (iterative inverse of the distortion model).
  Vec2 undistort(const Vec2& pixel) const;

  /// Unit bearing vector (camera frame) for a pixel.
  Vec3 bearing(const Vec2& pixel) const;

  /// Project a camera-frame direction; returns false when behind the camera.
  bool project_bearing(const Vec3& dir, Vec2* pixel) const;
};

/// Sane defaults mirroring a small event-camera array; used by the
/// simulator and tests.
CameraIntrinsics default_event_camera();

}  // namespace evcal
