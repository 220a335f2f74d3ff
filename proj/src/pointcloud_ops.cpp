#include "pcflow/pointcloud_ops.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pcflow/completion.hpp"
#include "pcflow/parallel.hpp"

namespace pcflow {

PointCloud accumulate_static(const Scene& scene) {
  if (scene.frames.empty()) throw std::invalid_argument("accumulate_static: empty scene");
  PointCloud out;
  out.frame_tag = FrameTag::world();
  for (const SceneFrame& frame : scene.frames) {
    const PointCloud& cloud = frame.lidar;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Vec3 p = cloud.position(i);
      bool inside = false;
      for (const BBox3D& box : frame.boxes) {
        if (box_contains(box, p, kDynamicBoxMargin)) {
          inside = true;
          break;
        }
      }
      if (!inside) out.push(p, cloud.colors[i], cloud.flags[i]);
    }
  }
  return out;
}

namespace {

// Box-interior points of one frame mapped into the box canonical frame.
void collect_canonical(const SceneFrame& frame, const BBox3D& box, PointCloud& out) {
  const Pose inv = box.pose.inverse();
  const PointCloud& cloud = frame.lidar;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 p = cloud.position(i);
    if (!box_contains(box, p, 0.0)) continue;
    out.push(inv.apply(p), cloud.colors[i], cloud.flags[i]);
  }
}

}  // namespace

PointCloud aggregate_vehicle(const Scene& scene, const std::string& track_id) {
  if (scene.track_category(track_id) != Category::kVehicle)
    throw std::invalid_argument("aggregate_vehicle: track " + track_id + " is not a vehicle");
  PointCloud out;
  out.frame_tag = FrameTag::canonical(track_id);
  for (const SceneFrame& frame : scene.frames) {
    if (const BBox3D* box = frame.find_box(track_id)) collect_canonical(frame, *box, out);
  }
  return out;
}

PointCloud aggregate_deformable(const Scene& scene, const std::string& track_id, int frame_index,
                                int window) {
  const Category cat = scene.track_category(track_id);
  if (cat != Category::kPedestrian && cat != Category::kCyclist)
    throw std::invalid_argument("aggregate_deformable: track " + track_id +
                                " is not pedestrian/cyclist");
  if (frame_index < 0 || frame_index >= scene.frame_count())
    throw std::invalid_argument("aggregate_deformable: frame out of range");
  PointCloud out;
  out.frame_tag = FrameTag::canonical(track_id);
  const int lo = std::max(0, frame_index - window);
  const int hi = std::min(scene.frame_count() - 1, frame_index + window);
  for (int f = lo; f <= hi; ++f) {
    const SceneFrame& frame = scene.frames[std::size_t(f)];
    if (const BBox3D* box = frame.find_box(track_id)) collect_canonical(frame, *box, out);
  }
  return out;
}

PointCloud colorize(const PointCloud& cloud, const Scene& scene, int frame,
                    const std::vector<std::string>& camera_order) {
  if (cloud.frame_tag.kind != FrameTag::Kind::kWorld)
    throw std::invalid_argument("colorize: cloud must be in the world frame");
  if (frame < 0 || frame >= scene.frame_count())
    throw std::invalid_argument("colorize: frame out of range");

  struct View {
    CameraModel cam;
    const Image* image;
    const DepthMap* depth;
  };
  std::vector<View> views;
  const SceneFrame& sf = scene.frames[std::size_t(frame)];
  for (const std::string& name : camera_order) {
    View v;
    v.cam = scene.camera_at(name, frame);
    v.image = &sf.reference_images.at(name);
    v.depth = &sf.reference_depths.at(name);
    views.push_back(v);
  }

  PointCloud out = cloud;
  const std::int64_t n = std::int64_t(cloud.size());
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::int64_t i = 0; i < n; ++i) {
    const Vec3 p = cloud.position(std::size_t(i));
    for (const View& view : views) {
      const Vec3 c = world_to_camera(p, view.cam);
      if (c.z <= kColorizeNearZ) continue;
      const int u = int(std::floor(view.cam.fx * c.x / c.z + view.cam.cx));
      const int v = int(std::floor(view.cam.fy * c.y / c.z + view.cam.cy));
      if (u < 0 || v < 0 || u >= view.cam.width || v >= view.cam.height) continue;
      const float rendered = view.depth->at(u, v);
      if (!(c.z <= double(rendered) + kColorizeDepthSlack)) continue;
      const float* px = view.image->pixel(u, v);
      out.colors[std::size_t(i)] = {px[0], px[1], px[2]};
      break;
    }
  }
  return out;
}

SceneAssets build_assets(const Scene& scene, const AssetBuildParams& params) {
  scene.validate();
  // Colorize every frame's returns in place on a scene copy, then run the
  // plain aggregation ops against it.
  std::vector<std::string> camera_order;
  for (const auto& cam : scene.cameras) camera_order.push_back(cam.name);

  Scene colored = scene;
  for (int f = 0; f < scene.frame_count(); ++f)
    colored.frames[std::size_t(f)].lidar =
        colorize(scene.frames[std::size_t(f)].lidar, scene, f, camera_order);

  SceneAssets assets;
  assets.static_cloud = accumulate_static(colored);

  for (const SceneFrame& frame : colored.frames) {
    for (const BBox3D& box : frame.boxes) {
      if (assets.has_track(box.track_id)) continue;
      if (box.category == Category::kVehicle) {
        PointCloud canonical = aggregate_vehicle(colored, box.track_id);
        if (params.complete_vehicles && int(canonical.size()) >= kCompletionMinPoints) {
          CompletionParams cp;
          cp.out_n = params.completion_points;
          assets.vehicles[box.track_id] = complete_vehicle(canonical, cp);
        } else {
          assets.vehicles[box.track_id] = std::move(canonical);
        }
      } else {
        auto& per_frame = assets.deformables[box.track_id];
        for (int f : colored.track_frames(box.track_id))
          per_frame[f] = aggregate_deformable(colored, box.track_id, f, params.deformable_window);
      }
    }
  }
  assets.completed = params.complete_vehicles;
  return assets;
}

}  // namespace pcflow
