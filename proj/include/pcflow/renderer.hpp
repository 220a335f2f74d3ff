#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcflow/editing.hpp"
#include "pcflow/scene.hpp"

namespace pcflow {

// Projection of a colored point cloud: color raster (black background) plus
// a depth raster (+inf where nothing was written).
struct PseudoImage {
  Image color;
  DepthMap depth;
  int frame_index = 0;

  bool operator==(const PseudoImage&) const = default;
};

struct ConditionSequence {
  std::vector<PseudoImage> frames;
  Image reference;
  int anchor_index = 0;  // scene frame the reference was recorded at
  int first_frame = 0;   // scene frame of frames[0]
  std::string camera;

  int length() const { return int(frames.size()); }
};

// Pixel rule shared by every consumer: u = fx*x/z + cx, pixel = floor(u),
// camera-frame z must exceed 0.1.
struct ProjectedPoint {
  int u = 0, v = 0;
  double z = 0.0;
};
std::optional<ProjectedPoint> project_point(const CameraModel& cam, const Vec3& world);

// Splats each point as a (2r+1)^2 square; nearest depth wins, ties broken by
// lower point index. Black completed points write like any other.
PseudoImage project_points(const PointCloud& cloud, const CameraModel& cam, int splat_radius);

namespace kernels {
// Serial reference and chunk-merging OpenMP variant; bit-identical outputs
// for any thread count.
void splat_serial(const PointCloud& cloud, const CameraModel& cam, int splat_radius,
                  PseudoImage& out);
void splat_parallel(const PointCloud& cloud, const CameraModel& cam, int splat_radius,
                    PseudoImage& out);
}  // namespace kernels

struct RenderParams {
  std::string camera = "front";
  int first_frame = 0;
  int clip_length = 0;  // 0 = to scene end
  int anchor = -1;      // -1 = first frame
  int splat_radius = 1;
};

// Per-frame assemble + project under the plan's pose/ego overrides; the
// reference image comes from the recorded capture at the anchor frame
// (original camera pose, never edited).
ConditionSequence render_sequence(const Scene& scene, const SceneAssets& assets,
                                  const EditPlan& plan, const RenderParams& params);

// Frames whose in-clip index is not a multiple of k become fully blank.
ConditionSequence subsample_conditions(const ConditionSequence& seq, int k);

enum class MaskKind : std::uint8_t { kDepthEdge, kBlock };

struct MaskParams {
  MaskKind kind = MaskKind::kDepthEdge;
  double depth_threshold = 1.0;  // meters, kDepthEdge
  int dilate = 2;                // pixels, kDepthEdge
  int block_count = 2;           // kBlock
  int block_min = 4, block_max = 12;
};

// Blacks out pixels (color -> 0, depth -> +inf). Deterministic in seed.
PseudoImage mask_augment(const PseudoImage& img, const MaskParams& params, std::uint64_t seed);

// IO for condition dumps (render CLI): color PPM + raw f32 depth per frame.
void save_condition_sequence(const ConditionSequence& seq, const std::filesystem::path& dir);

}  // namespace pcflow
