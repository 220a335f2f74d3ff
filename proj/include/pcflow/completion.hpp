#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pcflow/pointcloud.hpp"
#include "pcflow/rng.hpp"

namespace pcflow {

constexpr int kCompletionMinPoints = 32;

// Indices of points that are vertices of the 3D convex hull. Degenerate
// inputs (rank < 3) return every index. Deterministic.
std::vector<std::uint32_t> convex_hull_vertices(const std::vector<Vec3>& points);

// Hidden-point removal by spherical flipping (flip radius = 100x cloud
// diameter, widened only if the viewpoint sits outside that sphere): a point
// survives iff its flipped image lies on the convex hull of the flipped
// cloud plus the viewpoint. Throws if the viewpoint is inside the bounding
// box.
PointCloud simulate_partial(const PointCloud& cloud, const Vec3& viewpoint);

// The appendix-style single-sided visibility ring: n azimuths at a fixed
// elevation angle, at `radius_scale` x diameter from the cloud center.
std::vector<Vec3> standard_viewpoints(const PointCloud& cloud, int n = 16,
                                      double elevation_deg = 20.0, double radius_scale = 3.0);

// Exactly n points: without replacement when the cloud is large enough,
// with replacement otherwise. Deterministic in seed.
PointCloud resample(const PointCloud& cloud, int n, std::uint64_t seed);

enum class CloudAugmentation : std::uint8_t { kRangeNoise, kMirrorX, kMirrorZ };

PointCloud augment_cloud(const PointCloud& cloud, CloudAugmentation kind, double sigma,
                         std::uint64_t seed);

struct CompletionParams {
  int out_n = 8192;
  double near_duplicate = 0.05;  // delta: reject completed points this close to observed ones
  double infill_spacing = 0.05;
  // Annotated box dims in the canonical frame; when absent the box is
  // inferred by symmetrizing the cloud bounds about the origin.
  std::optional<Vec3> box_dims;
};

// Deterministic symmetry completer behind the learned-network contract:
// observed points keep their colors, completed points (lateral mirror +
// box-face infill) are black-flagged, output resampled to exactly out_n.
PointCloud complete_vehicle(const PointCloud& cloud, const CompletionParams& params = {});

}  // namespace pcflow
