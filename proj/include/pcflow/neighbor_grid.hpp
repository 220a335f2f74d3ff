#pragma once

#include <cstdint>
#include <tuple>
#include <vector>

#include "pcflow/pointcloud.hpp"

namespace pcflow {

// Uniform voxel grid for exact nearest-neighbor and radius queries over a
// fixed cloud. Ring search expands until the best hit is provably nearest.
class NeighborGrid {
 public:
  NeighborGrid(const PointCloud& cloud, double cell);

  double nearest_sq(const Vec3& q) const;
  bool any_within(const Vec3& q, double radius) const {
    return nearest_sq(q) <= radius * radius;
  }

 private:
  int dim(double extent) const;
  std::tuple<int, int, int> coords(const Vec3& p) const;
  void scan_cell(int x, int y, int z, const Vec3& q, double& best) const;
  void scan_ring(int qx, int qy, int qz, int ring, const Vec3& q, double& best) const;

  const PointCloud& cloud_;
  double cell_;
  Bounds3 b_;
  int nx_ = 1, ny_ = 1, nz_ = 1;
  std::vector<std::vector<std::uint32_t>> cells_;
};

}  // namespace pcflow
