#include "pcflow/renderer.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "pcflow/parallel.hpp"
#include "pcflow/rng.hpp"
#include "pcflow/scene_io.hpp"

namespace pcflow {

std::optional<ProjectedPoint> project_point(const CameraModel& cam, const Vec3& world) {
  const Vec3 c = world_to_camera(world, cam);
  if (c.z <= 0.1) return std::nullopt;
  const double u = cam.fx * c.x / c.z + cam.cx;
  const double v = cam.fy * c.y / c.z + cam.cy;
  return ProjectedPoint{int(std::floor(u)), int(std::floor(v)), c.z};
}

namespace kernels {

namespace {

// Winner record per pixel: depth first, point index breaks ties.
struct Winner {
  float depth = kDepthEmpty;
  std::uint32_t index = 0xffffffffu;

  bool beats(const Winner& o) const {
    return depth < o.depth || (depth == o.depth && index < o.index);
  }
};

void splat_range(const PointCloud& cloud, const CameraModel& cam, int splat_radius,
                 std::uint32_t begin, std::uint32_t end, std::vector<Winner>& buf) {
  const int W = cam.width, H = cam.height;
  for (std::uint32_t i = begin; i < end; ++i) {
    const auto proj = project_point(cam, cloud.position(i));
    if (!proj) continue;
    const float z = float(proj->z);
    const int x0 = std::max(0, proj->u - splat_radius);
    const int x1 = std::min(W - 1, proj->u + splat_radius);
    const int y0 = std::max(0, proj->v - splat_radius);
    const int y1 = std::min(H - 1, proj->v + splat_radius);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        Winner& w = buf[std::size_t(y) * std::size_t(W) + std::size_t(x)];
        const Winner cand{z, i};
        if (cand.beats(w)) w = cand;
      }
  }
}

void winners_to_image(const PointCloud& cloud, const std::vector<Winner>& buf, PseudoImage& out) {
  const std::size_t n = buf.size();
  for (std::size_t p = 0; p < n; ++p) {
    const Winner& w = buf[p];
    if (w.index == 0xffffffffu) continue;
    out.depth.depth[p] = w.depth;
    const auto& c = cloud.colors[w.index];
    out.color.rgb[3 * p + 0] = c[0];
    out.color.rgb[3 * p + 1] = c[1];
    out.color.rgb[3 * p + 2] = c[2];
  }
}

}  // namespace

void splat_serial(const PointCloud& cloud, const CameraModel& cam, int splat_radius,
                  PseudoImage& out) {
  out.color = Image(cam.width, cam.height);
  out.depth = DepthMap(cam.width, cam.height);
  std::vector<Winner> buf(std::size_t(cam.width) * std::size_t(cam.height));
  splat_range(cloud, cam, splat_radius, 0, std::uint32_t(cloud.size()), buf);
  winners_to_image(cloud, buf, out);
}

void splat_parallel(const PointCloud& cloud, const CameraModel& cam, int splat_radius,
                    PseudoImage& out) {
  out.color = Image(cam.width, cam.height);
  out.depth = DepthMap(cam.width, cam.height);
  const std::size_t px = std::size_t(cam.width) * std::size_t(cam.height);
  // Fixed chunking (independent of thread count): per-chunk winner buffers,
  // then a serial merge. min-by-(depth,index) is order-free, so the merged
  // result matches the serial scan bit for bit.
  constexpr std::uint32_t kGrain = 16384;
  const int chunks = std::max(1, kernels::chunk_count(std::int64_t(cloud.size()), kGrain));
  std::vector<std::vector<Winner>> bufs(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int c = 0; c < chunks; ++c) {
    bufs[std::size_t(c)].assign(px, Winner{});
    const std::uint32_t begin = std::uint32_t(c) * kGrain;
    const std::uint32_t end =
        std::min<std::uint32_t>(begin + kGrain, std::uint32_t(cloud.size()));
    splat_range(cloud, cam, splat_radius, begin, end, bufs[std::size_t(c)]);
  }
  std::vector<Winner>& merged = bufs[0];
  for (int c = 1; c < chunks; ++c)
    for (std::size_t p = 0; p < px; ++p)
      if (bufs[std::size_t(c)][p].beats(merged[p])) merged[p] = bufs[std::size_t(c)][p];
  winners_to_image(cloud, merged, out);
}

}  // namespace kernels

PseudoImage project_points(const PointCloud& cloud, const CameraModel& cam, int splat_radius) {
  if (splat_radius < 0) throw std::invalid_argument("project_points: splat_radius must be >= 0");
  PseudoImage out;
  kernels::splat_parallel(cloud, cam, splat_radius, out);
  return out;
}

ConditionSequence render_sequence(const Scene& scene, const SceneAssets& assets,
                                  const EditPlan& plan, const RenderParams& params) {
  const int T = scene.frame_count();
  const int first = params.first_frame;
  const int len = params.clip_length > 0 ? params.clip_length : T - first;
  const int anchor = params.anchor >= 0 ? params.anchor : first;
  if (first < 0 || first + len > T) throw std::invalid_argument("render_sequence: clip out of range");
  if (anchor < first || anchor >= first + len)
    throw std::invalid_argument("render_sequence: anchor outside clip");

  const CameraModel mount = scene.camera(params.camera);

  ConditionSequence seq;
  seq.camera = params.camera;
  seq.anchor_index = anchor;
  seq.first_frame = first;
  seq.frames.resize(std::size_t(len));
  for (int i = 0; i < len; ++i) {
    const int f = first + i;
    const PointCloud world = assemble_world(scene, assets, plan, f);
    CameraModel cam = mount;
    cam.pose = effective_ego_pose(scene, plan, f) * mount.pose;
    PseudoImage img = project_points(world, cam, params.splat_radius);
    img.frame_index = f;
    seq.frames[std::size_t(i)] = std::move(img);
  }
  // Anchor reference: the recorded capture under the original camera pose.
  seq.reference = scene.frames[std::size_t(anchor)].reference_images.at(params.camera);
  return seq;
}

ConditionSequence subsample_conditions(const ConditionSequence& seq, int k) {
  if (k < 1) throw std::invalid_argument("subsample_conditions: k must be >= 1");
  if (k == 1) return seq;
  ConditionSequence out = seq;
  for (int i = 0; i < out.length(); ++i) {
    if (i % k == 0) continue;
    PseudoImage& img = out.frames[std::size_t(i)];
    const int fi = img.frame_index;
    img.color = Image(img.color.width, img.color.height);
    img.depth = DepthMap(img.depth.width, img.depth.height);
    img.frame_index = fi;
  }
  return out;
}

PseudoImage mask_augment(const PseudoImage& img, const MaskParams& params, std::uint64_t seed) {
  PseudoImage out = img;
  const int W = img.color.width, H = img.color.height;
  auto black_out = [&](int x, int y) {
    float* px = out.color.pixel(x, y);
    px[0] = px[1] = px[2] = 0.0f;
    out.depth.at(x, y) = kDepthEmpty;
  };

  if (params.kind == MaskKind::kDepthEdge) {
    if (params.depth_threshold <= 0.0 || params.dilate < 0)
      throw std::invalid_argument("mask_augment: depth_edge parameters must be positive");
    // A pixel is an edge when its right or down neighbor differs by more
    // than the threshold (one finite/one empty counts as a discontinuity).
    std::vector<std::uint8_t> edge(std::size_t(W) * std::size_t(H), 0);
    auto differs = [&](float a, float b) {
      const bool fa = std::isfinite(a), fb = std::isfinite(b);
      if (fa != fb) return true;
      if (!fa) return false;
      return std::abs(a - b) > float(params.depth_threshold);
    };
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const float d = img.depth.at(x, y);
        if ((x + 1 < W && differs(d, img.depth.at(x + 1, y))) ||
            (y + 1 < H && differs(d, img.depth.at(x, y + 1))))
          edge[std::size_t(y) * std::size_t(W) + std::size_t(x)] = 1;
      }
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        bool masked = false;
        for (int dy = -params.dilate; dy <= params.dilate && !masked; ++dy)
          for (int dx = -params.dilate; dx <= params.dilate && !masked; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
            masked = edge[std::size_t(ny) * std::size_t(W) + std::size_t(nx)] != 0;
          }
        if (masked) black_out(x, y);
      }
    return out;
  }

  if (params.block_min <= 0 || params.block_max < params.block_min || params.block_count < 0)
    throw std::invalid_argument("mask_augment: block parameters must be positive");
  Rng rng = Rng(seed).fork("mask-block");
  for (int b = 0; b < params.block_count; ++b) {
    const int bw = params.block_min + int(rng.below(std::uint32_t(params.block_max - params.block_min + 1)));
    const int bh = params.block_min + int(rng.below(std::uint32_t(params.block_max - params.block_min + 1)));
    const int x0 = int(rng.below(std::uint32_t(std::max(1, W - bw + 1))));
    const int y0 = int(rng.below(std::uint32_t(std::max(1, H - bh + 1))));
    for (int y = y0; y < std::min(H, y0 + bh); ++y)
      for (int x = x0; x < std::min(W, x0 + bw); ++x) black_out(x, y);
  }
  return out;
}

void save_condition_sequence(const ConditionSequence& seq, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["camera"] = seq.camera;
  m["anchor_index"] = seq.anchor_index;
  m["first_frame"] = seq.first_frame;
  m["length"] = seq.length();
  write_ppm(dir / "reference.ppm", seq.reference);
  for (int i = 0; i < seq.length(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "cond_%04d.ppm", i);
    write_ppm(dir / name, seq.frames[std::size_t(i)].color);
    std::snprintf(name, sizeof name, "depth_%04d.f32", i);
    write_f32_blob(dir / name, seq.frames[std::size_t(i)].depth.depth.data(),
                   seq.frames[std::size_t(i)].depth.depth.size());
  }
  std::ofstream out(dir / "condition.json");
  out << m.dump(2) << "\n";
}

}  // namespace pcflow
