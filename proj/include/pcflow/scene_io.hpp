#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "pcflow/scene.hpp"

namespace pcflow {

// Aggregated per-scene assets, persisted under <scene>/assets/.
// vehicle clouds are canonical-frame (completed when built through the full
// pipeline); deformable clouds are canonical-frame per (track, frame).
struct SceneAssets {
  PointCloud static_cloud;
  std::map<std::string, PointCloud> vehicles;
  std::map<std::string, std::map<int, PointCloud>> deformables;
  bool completed = false;

  bool has_track(const std::string& track_id) const {
    return vehicles.count(track_id) || deformables.count(track_id);
  }
};

// Scene directory format: manifest.json plus one little-endian float32 blob
// per array (row-major), uint8 flag blobs, int32 track blobs, and P6 PPM
// reference images. save -> load round-trips bit-identically.
void save_scene(const Scene& scene, const std::filesystem::path& dir);
Scene load_scene(const std::filesystem::path& dir);

void save_assets(const SceneAssets& assets, const std::filesystem::path& scene_dir);
SceneAssets load_assets(const std::filesystem::path& scene_dir);
bool has_assets(const std::filesystem::path& scene_dir);

// Raw blob helpers shared with checkpoints and condition dumps.
void write_f32_blob(const std::filesystem::path& path, const float* data, std::size_t count);
std::vector<float> read_f32_blob(const std::filesystem::path& path, std::size_t expect_count,
                                 const std::string& what);

nlohmann::json pose_to_json(const Pose& pose);
Pose pose_from_json(const nlohmann::json& j, const std::string& where);

}  // namespace pcflow
