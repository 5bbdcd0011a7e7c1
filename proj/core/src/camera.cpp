#include "evcal/camera.hpp"

#include <cmath>

namespace evcal {

namespace {

Vec2 distort(const CameraIntrinsics& K, const Vec2& p) {
  const double x = p.x(), y = p.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (K.k1 + r2 * (K.k2 + r2 * K.k3));
  const double xd = x * radial + 2.0 * K.p1 * x * y + K.p2 * (r2 + 2.0 * x * x);
  const double yd = y * radial + K.p1 * (r2 + 2.0 * y * y) + 2.0 * K.p2 * x * y;
  return Vec2(xd, yd);
}

}  // namespace

Vec2 CameraIntrinsics::project(const Vec2& normalized) const {
  const Vec2 d = has_distortion() ? distort(*this, normalized) : normalized;
  return Vec2(fx * d.x() + cx, fy * d.y() + cy);
}

Vec2 CameraIntrinsics::undistort(const Vec2& pixel) const {
  Vec2 d((pixel.x() - cx) / fx, (pixel.y() - cy) / fy);
  if (!has_distortion()) return d;
  // Fixed-point inversion of the distortion model.
  Vec2 u = d;
  for (int it = 0; it < 12; ++it) {
    const Vec2 delta = distort(*this, u) - u;
    u = d - delta;
  }
  return u;
}

Vec3 CameraIntrinsics::bearing(const Vec2& pixel) const {
  const Vec2 u = undistort(pixel);
  return Vec3(u.x(), u.y(), 1.0).normalized();
}

bool CameraIntrinsics::project_bearing(const Vec3& dir, Vec2* pixel) const {
  if (dir.z() <= 1e-9) return false;
  *pixel = project(Vec2(dir.x() / dir.z(), dir.y() / dir.z()));
  return true;
}

CameraIntrinsics default_event_camera() {
  CameraIntrinsics K;
  K.fx = 230.0;
  K.fy = 230.0;
  K.cx = 172.5;
  K.cy = 129.5;
  K.width = 346;
  K.height = 260;
  return K;
}

}  // namespace evcal
