#pragma once

#include <string>
#include <vector>

#include "pcflow/scene.hpp"
#include "pcflow/scene_io.hpp"

namespace pcflow {

// Margin used when separating dynamic-actor returns from static background;
// absorbs annotation slack.
constexpr double kDynamicBoxMargin = 0.1;

// Union of every frame's LiDAR points that fall inside no dynamic box,
// frame-major then point-major. Colors/flags pass through unchanged.
PointCloud accumulate_static(const Scene& scene);

// Union over all frames of the track's box-interior points, each frame
// mapped into the box canonical frame through that frame's annotated pose.
PointCloud aggregate_vehicle(const Scene& scene, const std::string& track_id);

// Deformable variant: only frames within +-window of frame_index contribute,
// window clipped at the scene ends. Output is canonical-frame; composing with
// the box pose at frame_index reproduces the points in world coordinates.
PointCloud aggregate_deformable(const Scene& scene, const std::string& track_id, int frame_index,
                                int window = 2);

// Assigns each point the RGB of the first camera (in camera_order) where it
// projects in front of the camera (z > 0.1 m), inside the image, and passes
// the depth-consistency gate against the stored reference depth. Points that
// fail everywhere stay black.
PointCloud colorize(const PointCloud& cloud, const Scene& scene, int frame,
                    const std::vector<std::string>& camera_order);

constexpr double kColorizeNearZ = 0.1;
constexpr double kColorizeDepthSlack = 0.2;

struct AssetBuildParams {
  int completion_points = 8192;
  int deformable_window = 2;
  bool complete_vehicles = true;
};

// Full asset build for one scene: per-frame colorization, static
// accumulation, per-vehicle canonical aggregation + completion, per-frame
// deformable aggregation.
SceneAssets build_assets(const Scene& scene, const AssetBuildParams& params);

}  // namespace pcflow
