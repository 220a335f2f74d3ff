#include "pcflow/pointcloud.hpp"

#include <omp.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pcflow/neighbor_grid.hpp"
#include "pcflow/parallel.hpp"

namespace pcflow {

void PointCloud::validate() const {
  if (colors.size() != positions.size() || flags.size() != positions.size())
    throw std::runtime_error("point cloud: positions/colors/flags length mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    if (flags[i] == PointFlag::kCompleted && colors[i] != kBlack)
      throw std::runtime_error("point cloud: completed point with non-black color");
  }
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose, FrameTag new_tag) {
  PointCloud out;
  out.frame_tag = std::move(new_tag);
  out.colors = cloud.colors;
  out.flags = cloud.flags;
  out.positions.resize(cloud.size());
  const std::int64_t n = std::int64_t(cloud.size());
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::int64_t i = 0; i < n; ++i) {
    const Vec3 p = pose.apply(cloud.position(std::size_t(i)));
    out.positions[std::size_t(i)] = {float(p.x), float(p.y), float(p.z)};
  }
  return out;
}

Bounds3 cloud_bounds(const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("cloud_bounds: empty cloud");
  Bounds3 b{cloud.position(0), cloud.position(0)};
  for (std::size_t i = 1; i < cloud.size(); ++i) {
    const Vec3 p = cloud.position(i);
    b.min.x = std::min(b.min.x, p.x);
    b.min.y = std::min(b.min.y, p.y);
    b.min.z = std::min(b.min.z, p.z);
    b.max.x = std::max(b.max.x, p.x);
    b.max.y = std::max(b.max.y, p.y);
    b.max.z = std::max(b.max.z, p.z);
  }
  return b;
}

NeighborGrid::NeighborGrid(const PointCloud& cloud, double cell) : cloud_(cloud), cell_(cell) {
  b_ = cloud_bounds(cloud);
  nx_ = dim(b_.max.x - b_.min.x);
  ny_ = dim(b_.max.y - b_.min.y);
  nz_ = dim(b_.max.z - b_.min.z);
  cells_.resize(std::size_t(nx_) * std::size_t(ny_) * std::size_t(nz_));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto [x, y, z] = coords(cloud.position(i));
    cells_[(std::size_t(z) * std::size_t(ny_) + std::size_t(y)) * std::size_t(nx_) +
           std::size_t(x)]
        .push_back(std::uint32_t(i));
  }
}

int NeighborGrid::dim(double extent) const { return std::max(1, int(extent / cell_) + 1); }

std::tuple<int, int, int> NeighborGrid::coords(const Vec3& p) const {
  auto clampi = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
  return {clampi(int((p.x - b_.min.x) / cell_), nx_), clampi(int((p.y - b_.min.y) / cell_), ny_),
          clampi(int((p.z - b_.min.z) / cell_), nz_)};
}

void NeighborGrid::scan_cell(int x, int y, int z, const Vec3& q, double& best) const {
  if (x < 0 || y < 0 || z < 0 || x >= nx_ || y >= ny_ || z >= nz_) return;
  const std::size_t idx =
      (std::size_t(z) * std::size_t(ny_) + std::size_t(y)) * std::size_t(nx_) + std::size_t(x);
  for (std::uint32_t pi : cells_[idx]) {
    const Vec3 d = cloud_.position(pi) - q;
    best = std::min(best, d.dot(d));
  }
}

void NeighborGrid::scan_ring(int qx, int qy, int qz, int ring, const Vec3& q, double& best) const {
  if (ring == 0) {
    scan_cell(qx, qy, qz, q, best);
    return;
  }
  for (int dz = -ring; dz <= ring; ++dz)
    for (int dy = -ring; dy <= ring; ++dy)
      for (int dx = -ring; dx <= ring; ++dx) {
        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
        scan_cell(qx + dx, qy + dy, qz + dz, q, best);
      }
}

double NeighborGrid::nearest_sq(const Vec3& q) const {
  const auto [qx, qy, qz] = coords(q);
  double best = std::numeric_limits<double>::infinity();
  // The query may land outside the grid bounds; widen the ring budget by the
  // out-of-bounds cell distance so the search still terminates correctly.
  const int max_ring = nx_ + ny_ + nz_ +
                       int((std::abs(q.x - b_.min.x) + std::abs(q.y - b_.min.y) +
                            std::abs(q.z - b_.min.z)) /
                           cell_);
  for (int ring = 0; ring <= max_ring; ++ring) {
    if (std::isfinite(best)) {
      const double safe = (double(ring) - 1.0) * cell_;
      if (safe > 0.0 && best <= safe * safe) break;
    }
    scan_ring(qx, qy, qz, ring, q, best);
  }
  return best;
}

namespace {

double mean_nearest(const PointCloud& from, const PointCloud& to) {
  const double cell = std::max(1e-6, cloud_bounds(to).diagonal() / 32.0);
  NeighborGrid grid(to, cell);
  const std::int64_t n = std::int64_t(from.size());
  std::vector<double> d(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::int64_t i = 0; i < n; ++i)
    d[std::size_t(i)] = std::sqrt(grid.nearest_sq(from.position(std::size_t(i))));
  double sum = 0.0;
  for (double v : d) sum += v;  // fixed-order combine
  return sum / double(n);
}

}  // namespace

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer_distance: empty cloud");
  return 0.5 * (mean_nearest(a, b) + mean_nearest(b, a));
}

}  // namespace pcflow
