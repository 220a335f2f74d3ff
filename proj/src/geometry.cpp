#include "pcflow/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace pcflow {

Mat3 Mat3::exp(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) return Mat3::identity();
  const Vec3 a = w / theta;
  const double c = std::cos(theta), s = std::sin(theta), t = 1.0 - c;
  Mat3 r;
  r.m = {t * a.x * a.x + c,       t * a.x * a.y - s * a.z, t * a.x * a.z + s * a.y,
         t * a.x * a.y + s * a.z, t * a.y * a.y + c,       t * a.y * a.z - s * a.x,
         t * a.x * a.z - s * a.y, t * a.y * a.z + s * a.x, t * a.z * a.z + c};
  return r;
}

Vec3 Mat3::log() const {
  const Mat3& R = *this;
  const double tr = R(0, 0) + R(1, 1) + R(2, 2);
  const double cos_theta = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  if (theta < 1e-10) return {0, 0, 0};
  if (theta > 3.141592653589793 - 1e-6) {
    // Near pi the antisymmetric part vanishes; recover the axis from R + I.
    int k = 0;
    double best = R(0, 0);
    for (int i = 1; i < 3; ++i)
      if (R(i, i) > best) { best = R(i, i); k = i; }
    Vec3 a{R(0, k), R(1, k), R(2, k)};
    if (k == 0) a.x += 1.0;
    if (k == 1) a.y += 1.0;
    if (k == 2) a.z += 1.0;
    a = a.normalized();
    return a * theta;
  }
  const double f = theta / (2.0 * std::sin(theta));
  return {f * (R(2, 1) - R(1, 2)), f * (R(0, 2) - R(2, 0)), f * (R(1, 0) - R(0, 1))};
}

bool Mat3::is_rotation(double tol) const {
  const Mat3 rtr = transposed() * (*this);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = (i == j) ? 1.0 : 0.0;
      if (std::abs(rtr(i, j) - want) > tol) return false;
    }
  return std::abs(det() - 1.0) <= tol;
}

Pose interpolate_pose(const Pose& a, const Pose& b, double s) {
  Pose r;
  r.translation = a.translation + (b.translation - a.translation) * s;
  const Mat3 rel = a.rotation.transposed() * b.rotation;
  r.rotation = a.rotation * Mat3::exp(rel.log() * s);
  return r;
}

bool is_dynamic(Category c) { return c != Category::kStatic; }

std::string category_name(Category c) {
  switch (c) {
    case Category::kVehicle: return "vehicle";
    case Category::kPedestrian: return "pedestrian";
    case Category::kCyclist: return "cyclist";
    case Category::kStatic: return "static";
  }
  return "static";
}

Category category_from_name(const std::string& name) {
  if (name == "vehicle") return Category::kVehicle;
  if (name == "pedestrian") return Category::kPedestrian;
  if (name == "cyclist") return Category::kCyclist;
  if (name == "static") return Category::kStatic;
  throw std::invalid_argument("unknown category: " + name);
}

bool box_contains(const BBox3D& box, const Vec3& p, double margin) {
  const Vec3 local = box.pose.apply_inverse(p);
  return std::abs(local.x) <= box.dims.x * 0.5 + margin &&
         std::abs(local.y) <= box.dims.y * 0.5 + margin &&
         std::abs(local.z) <= box.dims.z * 0.5 + margin;
}

}  // namespace pcflow
