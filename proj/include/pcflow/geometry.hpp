#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

namespace pcflow {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const { return *this / norm(); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Row-major 3x3 matrix. Only used for rotations in this project.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return Mat3{}; }

  double operator()(int r, int c) const { return m[std::size_t(3 * r + c)]; }
  double& operator()(int r, int c) { return m[std::size_t(3 * r + c)]; }

  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }

  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }

  static Mat3 rot_x(double rad) {
    Mat3 r;
    const double c = std::cos(rad), s = std::sin(rad);
    r.m = {1, 0, 0, 0, c, -s, 0, s, c};
    return r;
  }
  static Mat3 rot_y(double rad) {
    Mat3 r;
    const double c = std::cos(rad), s = std::sin(rad);
    r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
    return r;
  }
  static Mat3 rot_z(double rad) {
    Mat3 r;
    const double c = std::cos(rad), s = std::sin(rad);
    r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
    return r;
  }

  // Rodrigues formula; axis need not be unit length (angle = |w|).
  static Mat3 exp(const Vec3& w);
  // Inverse of exp for proper rotations; returns axis*angle with angle in [0, pi].
  Vec3 log() const;

  // RtR = I and det = +1, both within tol.
  bool is_rotation(double tol = 1e-9) const;
};

// Rigid transform mapping local coordinates into the parent frame.
struct Pose {
  Mat3 rotation;
  Vec3 translation;

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_inverse(const Vec3& p) const { return rotation.transposed() * (p - translation); }

  Pose inverse() const {
    Pose r;
    r.rotation = rotation.transposed();
    r.translation = -(r.rotation * translation);
    return r;
  }

  // this * other: first apply other, then this.
  Pose operator*(const Pose& o) const {
    Pose r;
    r.rotation = rotation * o.rotation;
    r.translation = rotation * o.translation + translation;
    return r;
  }
};

// Constant-angular-velocity interpolation between two poses; s in [0, 1].
Pose interpolate_pose(const Pose& a, const Pose& b, double s);

enum class Category : std::uint8_t { kVehicle, kPedestrian, kCyclist, kStatic };

bool is_dynamic(Category c);
std::string category_name(Category c);
Category category_from_name(const std::string& name);

// Per-frame 3D box annotation. pose maps the box canonical frame (x forward
// along length, y left along width, z up along height, origin at box center)
// into the world.
struct BBox3D {
  std::string track_id;
  Category category = Category::kVehicle;
  Pose pose;
  Vec3 dims;  // (length, width, height), meters
};

// True iff p (world) lies inside the box grown by margin on every axis.
bool box_contains(const BBox3D& box, const Vec3& p, double margin);

// Pinhole camera. Local frame: +z forward, +x right, +y down. pose maps
// camera coordinates into its parent frame (the ego rig inside a Scene, the
// world once resolved for a specific frame).
struct CameraModel {
  std::string name;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Pose pose;
};

inline Vec3 world_to_camera(const Vec3& p, const CameraModel& cam) {
  return cam.pose.apply_inverse(p);
}
inline Vec3 camera_to_world(const Vec3& p, const CameraModel& cam) { return cam.pose.apply(p); }

constexpr double kDegToRad = 0.017453292519943295;

}  // namespace pcflow
