#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pcflow/geometry.hpp"

namespace pcflow {

enum class PointFlag : std::uint8_t { kObserved = 0, kCompleted = 1 };

// Coordinate frame a cloud lives in. kCanonical clouds are object-centric
// (the annotated box frame of track_id); kSensor tags a single frame's raw
// returns before ego-motion compensation.
struct FrameTag {
  enum class Kind : std::uint8_t { kWorld = 0, kCanonical = 1, kSensor = 2 };
  Kind kind = Kind::kWorld;
  std::string track_id;  // kCanonical only
  int frame = -1;        // kSensor only

  static FrameTag world() { return {}; }
  static FrameTag canonical(std::string track) {
    FrameTag t;
    t.kind = Kind::kCanonical;
    t.track_id = std::move(track);
    return t;
  }
  static FrameTag sensor(int frame) {
    FrameTag t;
    t.kind = Kind::kSensor;
    t.frame = frame;
    return t;
  }
  bool operator==(const FrameTag&) const = default;
};

// Positions/colors are float32 (the on-disk precision); all rigid-transform
// math runs in double and rounds once on write-back. Color (0,0,0) is the
// untextured/black sentinel; completed points always carry it.
struct PointCloud {
  std::vector<std::array<float, 3>> positions;
  std::vector<std::array<float, 3>> colors;
  std::vector<PointFlag> flags;
  FrameTag frame_tag;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }

  void reserve(std::size_t n) {
    positions.reserve(n);
    colors.reserve(n);
    flags.reserve(n);
  }

  void push(const Vec3& p, const std::array<float, 3>& color, PointFlag flag) {
    positions.push_back({float(p.x), float(p.y), float(p.z)});
    colors.push_back(color);
    flags.push_back(flag);
  }

  void append(const PointCloud& other) {
    positions.insert(positions.end(), other.positions.begin(), other.positions.end());
    colors.insert(colors.end(), other.colors.begin(), other.colors.end());
    flags.insert(flags.end(), other.flags.begin(), other.flags.end());
  }

  Vec3 position(std::size_t i) const {
    return {positions[i][0], positions[i][1], positions[i][2]};
  }

  // Throws std::runtime_error on the first violated invariant.
  void validate() const;
};

constexpr std::array<float, 3> kBlack{0.0f, 0.0f, 0.0f};

// New cloud with every position mapped through pose (double math, rounded to
// float32); colors, flags and tag-kind handling are the caller's business.
PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose, FrameTag new_tag);

// Axis-aligned bounds; requires a non-empty cloud.
struct Bounds3 {
  Vec3 min, max;
  Vec3 extent() const { return max - min; }
  double diagonal() const { return extent().norm(); }
  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
};
Bounds3 cloud_bounds(const PointCloud& cloud);

// Symmetric mean nearest-neighbor distance between two point sets.
double chamfer_distance(const PointCloud& a, const PointCloud& b);

}  // namespace pcflow
