#include "pcflow/scene.hpp"

#include <stdexcept>

namespace pcflow {

const CameraModel& Scene::camera(const std::string& name) const {
  for (const auto& c : cameras)
    if (c.name == name) return c;
  throw std::invalid_argument("unknown camera: " + name);
}

CameraModel Scene::camera_at(const std::string& name, int frame) const {
  if (frame < 0 || frame >= frame_count())
    throw std::invalid_argument("camera_at: frame out of range");
  CameraModel cam = camera(name);
  cam.pose = frames[std::size_t(frame)].ego_pose * cam.pose;
  return cam;
}

std::vector<int> Scene::track_frames(const std::string& track_id) const {
  std::vector<int> out;
  for (const auto& f : frames)
    if (f.find_box(track_id)) out.push_back(f.index);
  return out;
}

Category Scene::track_category(const std::string& track_id) const {
  for (const auto& f : frames)
    if (const BBox3D* b = f.find_box(track_id)) return b->category;
  throw std::invalid_argument("unknown track: " + track_id);
}

void Scene::validate() const {
  if (frames.empty()) throw std::runtime_error("empty scene");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const SceneFrame& f = frames[i];
    const std::string where = "frames[" + std::to_string(i) + "]";
    if (f.index != int(i)) throw std::runtime_error(where + ".index: not contiguous from 0");
    if (!f.ego_pose.rotation.is_rotation())
      throw std::runtime_error(where + ".ego_pose: non-orthonormal rotation");
    f.lidar.validate();
    if (!f.lidar_track.empty() && f.lidar_track.size() != f.lidar.size())
      throw std::runtime_error(where + ".lidar_track: length mismatch");
    if (f.reference_images.size() != cameras.size())
      throw std::runtime_error(where + ".reference_images: camera set mismatch");
    for (const auto& cam : cameras) {
      if (!f.reference_images.count(cam.name))
        throw std::runtime_error(where + ".reference_images: missing camera " + cam.name);
    }
    for (const auto& b : f.boxes) {
      const std::string bwhere = where + ".boxes[" + b.track_id + "]";
      if (b.category == Category::kStatic)
        throw std::runtime_error(bwhere + ": dynamic box with Static category");
      if (b.dims.x <= 0 || b.dims.y <= 0 || b.dims.z <= 0)
        throw std::runtime_error(bwhere + ".dims: not strictly positive");
      if (!b.pose.rotation.is_rotation())
        throw std::runtime_error(bwhere + ".pose: non-orthonormal rotation");
    }
  }
  for (const auto& cam : cameras) {
    if (cam.fx <= 0 || cam.fy <= 0) throw std::runtime_error("camera " + cam.name + ": fx/fy <= 0");
    if (cam.cx < 0 || cam.cx >= cam.width || cam.cy < 0 || cam.cy >= cam.height)
      throw std::runtime_error("camera " + cam.name + ": principal point outside image");
    if (!cam.pose.rotation.is_rotation())
      throw std::runtime_error("camera " + cam.name + ".pose: non-orthonormal rotation");
  }
}

}  // namespace pcflow
