#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pcflow/geometry.hpp"
#include "pcflow/image.hpp"
#include "pcflow/pointcloud.hpp"

#include "json.hpp"

namespace pcflow {

// One timestep of a recording: ego pose, world-frame LiDAR returns, the
// reference capture (image + depth) per camera, and box annotations.
// lidar_track carries the id of the primitive each return hit (-1 for
// untracked statics); synthetic provenance that real recordings would lack,
// kept because the aggregation invariants are tested against it.
struct SceneFrame {
  int index = 0;
  Pose ego_pose;
  PointCloud lidar;
  std::vector<std::int32_t> lidar_track;
  std::map<std::string, Image> reference_images;
  std::map<std::string, DepthMap> reference_depths;
  std::vector<BBox3D> boxes;

  const BBox3D* find_box(const std::string& track_id) const {
    for (const auto& b : boxes)
      if (b.track_id == track_id) return &b;
    return nullptr;
  }
};

struct SceneMetadata {
  std::uint64_t seed = 0;
  std::string generator;
  nlohmann::json extra;  // resolved generator spec, free-form
};

// Cameras are stored as rig mounts: CameraModel::pose maps camera -> ego.
// camera_at resolves the world-frame model for one frame.
struct Scene {
  std::vector<SceneFrame> frames;
  std::vector<CameraModel> cameras;
  SceneMetadata metadata;

  int frame_count() const { return int(frames.size()); }

  const CameraModel& camera(const std::string& name) const;
  CameraModel camera_at(const std::string& name, int frame) const;

  // Every frame index where track_id is annotated, ascending.
  std::vector<int> track_frames(const std::string& track_id) const;
  Category track_category(const std::string& track_id) const;

  // Throws std::runtime_error naming the violated invariant.
  void validate() const;
};

}  // namespace pcflow
