#include "pcflow/scene_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pcflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

void write_bytes(const fs::path& path, const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  out.write(static_cast<const char*>(data), std::streamsize(bytes));
  if (!out) throw std::runtime_error("short write: " + path.string());
}

std::vector<char> read_bytes(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error(what + ": missing blob " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<char> buf(static_cast<std::size_t>(size));
  in.read(buf.data(), size);
  if (in.gcount() != size) throw std::runtime_error(what + ": truncated blob " + path.string());
  return buf;
}

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error(where + ": expected [x,y,z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void write_cloud_blobs(const fs::path& dir, const std::string& stem, const PointCloud& cloud,
                       json& entry) {
  entry["count"] = cloud.size();
  entry["positions"] = stem + "_points.f32";
  entry["colors"] = stem + "_colors.f32";
  entry["flags"] = stem + "_flags.u8";
  write_bytes(dir / (stem + "_points.f32"), cloud.positions.data(), cloud.size() * 12);
  write_bytes(dir / (stem + "_colors.f32"), cloud.colors.data(), cloud.size() * 12);
  write_bytes(dir / (stem + "_flags.u8"), cloud.flags.data(), cloud.size());
}

PointCloud read_cloud_blobs(const fs::path& dir, const json& entry, FrameTag tag,
                            const std::string& where) {
  PointCloud cloud;
  cloud.frame_tag = std::move(tag);
  const std::size_t n = entry.at("count").get<std::size_t>();
  auto pos = read_bytes(dir / entry.at("positions").get<std::string>(), where);
  auto col = read_bytes(dir / entry.at("colors").get<std::string>(), where);
  auto flg = read_bytes(dir / entry.at("flags").get<std::string>(), where);
  if (pos.size() != n * 12)
    throw std::runtime_error(where + ".positions: shape mismatch: manifest declares " +
                             std::to_string(n) + " points, blob holds " +
                             std::to_string(pos.size() / 12));
  if (col.size() != n * 12) throw std::runtime_error(where + ".colors: shape mismatch");
  if (flg.size() != n) throw std::runtime_error(where + ".flags: shape mismatch");
  cloud.positions.resize(n);
  cloud.colors.resize(n);
  cloud.flags.resize(n);
  std::memcpy(cloud.positions.data(), pos.data(), pos.size());
  std::memcpy(cloud.colors.data(), col.data(), col.size());
  std::memcpy(cloud.flags.data(), flg.data(), flg.size());
  return cloud;
}

json camera_to_json(const CameraModel& cam) {
  json j;
  j["name"] = cam.name;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["mount_pose"] = pose_to_json(cam.pose);
  return j;
}

CameraModel camera_from_json(const json& j, const std::string& where) {
  CameraModel cam;
  cam.name = j.at("name").get<std::string>();
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  cam.pose = pose_from_json(j.at("mount_pose"), where + ".mount_pose");
  return cam;
}

json box_to_json(const BBox3D& b) {
  json j;
  j["track_id"] = b.track_id;
  j["category"] = category_name(b.category);
  j["pose"] = pose_to_json(b.pose);
  j["dims"] = vec3_to_json(b.dims);
  return j;
}

BBox3D box_from_json(const json& j, const std::string& where) {
  BBox3D b;
  b.track_id = j.at("track_id").get<std::string>();
  b.category = category_from_name(j.at("category").get<std::string>());
  b.pose = pose_from_json(j.at("pose"), where + ".pose");
  b.dims = vec3_from_json(j.at("dims"), where + ".dims");
  return b;
}

void write_depth(const fs::path& path, const DepthMap& d) {
  write_bytes(path, d.depth.data(), d.depth.size() * 4);
}

DepthMap read_depth(const fs::path& path, int w, int h, const std::string& where) {
  auto buf = read_bytes(path, where);
  if (buf.size() != std::size_t(w) * std::size_t(h) * 4)
    throw std::runtime_error(where + ": shape mismatch");
  DepthMap d(w, h);
  std::memcpy(d.depth.data(), buf.data(), buf.size());
  return d;
}

}  // namespace

json pose_to_json(const Pose& pose) {
  json j;
  j["r"] = pose.rotation.m;
  j["t"] = vec3_to_json(pose.translation);
  return j;
}

Pose pose_from_json(const json& j, const std::string& where) {
  Pose p;
  const auto& r = j.at("r");
  if (!r.is_array() || r.size() != 9) throw std::runtime_error(where + ".r: expected 9 values");
  for (int i = 0; i < 9; ++i) p.rotation.m[std::size_t(i)] = r[std::size_t(i)].get<double>();
  p.translation = vec3_from_json(j.at("t"), where + ".t");
  if (!p.rotation.is_rotation()) throw std::runtime_error(where + ".r: non-orthonormal rotation");
  return p;
}

void write_f32_blob(const fs::path& path, const float* data, std::size_t count) {
  write_bytes(path, data, count * 4);
}

std::vector<float> read_f32_blob(const fs::path& path, std::size_t expect_count,
                                 const std::string& what) {
  auto buf = read_bytes(path, what);
  if (buf.size() != expect_count * 4)
    throw std::runtime_error(what + ": shape mismatch: expected " + std::to_string(expect_count) +
                             " floats, blob holds " + std::to_string(buf.size() / 4));
  std::vector<float> out(expect_count);
  std::memcpy(out.data(), buf.data(), buf.size());
  return out;
}

void save_scene(const Scene& scene, const fs::path& dir) {
  scene.validate();
  fs::create_directories(dir / "frames");
  json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["metadata"]["seed"] = scene.metadata.seed;
  manifest["metadata"]["generator"] = scene.metadata.generator;
  manifest["metadata"]["extra"] = scene.metadata.extra;
  manifest["cameras"] = json::array();
  for (const auto& cam : scene.cameras) manifest["cameras"].push_back(camera_to_json(cam));
  manifest["frame_count"] = scene.frame_count();

  json frames = json::array();
  for (const auto& f : scene.frames) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "frames/frame_%04d", f.index);
    json jf;
    jf["index"] = f.index;
    jf["ego_pose"] = pose_to_json(f.ego_pose);
    write_cloud_blobs(dir, stem, f.lidar, jf["lidar"]);
    if (!f.lidar_track.empty()) {
      jf["lidar_track"] = std::string(stem) + "_track.i32";
      write_bytes(dir / (std::string(stem) + "_track.i32"), f.lidar_track.data(),
                  f.lidar_track.size() * 4);
    }
    for (const auto& [name, img] : f.reference_images) {
      const std::string ppm = std::string(stem) + "_" + name + ".ppm";
      write_ppm(dir / ppm, img);
      jf["images"][name]["file"] = ppm;
      jf["images"][name]["width"] = img.width;
      jf["images"][name]["height"] = img.height;
    }
    for (const auto& [name, depth] : f.reference_depths) {
      const std::string df = std::string(stem) + "_" + name + "_depth.f32";
      write_depth(dir / df, depth);
      jf["depths"][name]["file"] = df;
      jf["depths"][name]["width"] = depth.width;
      jf["depths"][name]["height"] = depth.height;
    }
    jf["boxes"] = json::array();
    for (const auto& b : f.boxes) jf["boxes"].push_back(box_to_json(b));
    frames.push_back(std::move(jf));
  }
  manifest["frames"] = std::move(frames);

  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write manifest: " + (dir / "manifest.json").string());
}

Scene load_scene(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing manifest: " + (dir / "manifest.json").string());
  json manifest = json::parse(in);

  Scene scene;
  scene.metadata.seed = manifest.at("metadata").at("seed").get<std::uint64_t>();
  scene.metadata.generator = manifest.at("metadata").at("generator").get<std::string>();
  scene.metadata.extra = manifest.at("metadata").value("extra", json());
  for (std::size_t i = 0; i < manifest.at("cameras").size(); ++i)
    scene.cameras.push_back(
        camera_from_json(manifest["cameras"][i], "cameras[" + std::to_string(i) + "]"));

  const int frame_count = manifest.at("frame_count").get<int>();
  if (frame_count <= 0) throw std::runtime_error("empty scene");
  if (manifest.at("frames").size() != std::size_t(frame_count))
    throw std::runtime_error("frames: count mismatch with frame_count");

  for (int fi = 0; fi < frame_count; ++fi) {
    const json& jf = manifest["frames"][std::size_t(fi)];
    const std::string where = "frames[" + std::to_string(fi) + "]";
    SceneFrame f;
    f.index = jf.at("index").get<int>();
    f.ego_pose = pose_from_json(jf.at("ego_pose"), where + ".ego_pose");
    f.lidar = read_cloud_blobs(dir, jf.at("lidar"), FrameTag::world(), where + ".lidar");
    if (jf.contains("lidar_track")) {
      auto buf = read_bytes(dir / jf["lidar_track"].get<std::string>(), where + ".lidar_track");
      if (buf.size() != f.lidar.size() * 4)
        throw std::runtime_error(where + ".lidar_track: shape mismatch");
      f.lidar_track.resize(f.lidar.size());
      std::memcpy(f.lidar_track.data(), buf.data(), buf.size());
    }
    if (jf.contains("images")) {
      for (const auto& [name, je] : jf["images"].items()) {
        Image img = read_ppm(dir / je.at("file").get<std::string>());
        if (img.width != je.at("width").get<int>() || img.height != je.at("height").get<int>())
          throw std::runtime_error(where + ".images." + name + ": shape mismatch");
        f.reference_images[name] = std::move(img);
      }
    }
    if (jf.contains("depths")) {
      for (const auto& [name, je] : jf["depths"].items()) {
        f.reference_depths[name] =
            read_depth(dir / je.at("file").get<std::string>(), je.at("width").get<int>(),
                       je.at("height").get<int>(), where + ".depths." + name);
      }
    }
    for (std::size_t bi = 0; bi < jf.at("boxes").size(); ++bi)
      f.boxes.push_back(
          box_from_json(jf["boxes"][bi], where + ".boxes[" + std::to_string(bi) + "]"));
    scene.frames.push_back(std::move(f));
  }
  scene.validate();
  return scene;
}

void save_assets(const SceneAssets& assets, const fs::path& scene_dir) {
  const fs::path dir = scene_dir / "assets";
  fs::create_directories(dir);
  json m;
  m["completed"] = assets.completed;
  write_cloud_blobs(dir, "static", assets.static_cloud, m["static"]);
  m["vehicles"] = json::object();
  for (const auto& [track, cloud] : assets.vehicles)
    write_cloud_blobs(dir, "vehicle_" + track, cloud, m["vehicles"][track]);
  m["deformables"] = json::object();
  for (const auto& [track, per_frame] : assets.deformables) {
    json jt = json::object();
    for (const auto& [frame, cloud] : per_frame) {
      char stem[96];
      std::snprintf(stem, sizeof stem, "deform_%s_f%04d", track.c_str(), frame);
      write_cloud_blobs(dir, stem, cloud, jt[std::to_string(frame)]);
    }
    m["deformables"][track] = std::move(jt);
  }
  std::ofstream out(dir / "assets.json");
  out << m.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write assets manifest");
}

SceneAssets load_assets(const fs::path& scene_dir) {
  const fs::path dir = scene_dir / "assets";
  std::ifstream in(dir / "assets.json");
  if (!in) throw std::runtime_error("missing assets manifest: " + (dir / "assets.json").string());
  json m = json::parse(in);
  SceneAssets assets;
  assets.completed = m.at("completed").get<bool>();
  assets.static_cloud = read_cloud_blobs(dir, m.at("static"), FrameTag::world(), "assets.static");
  for (const auto& [track, je] : m.at("vehicles").items())
    assets.vehicles[track] =
        read_cloud_blobs(dir, je, FrameTag::canonical(track), "assets.vehicles." + track);
  for (const auto& [track, jt] : m.at("deformables").items())
    for (const auto& [frame, je] : jt.items())
      assets.deformables[track][std::stoi(frame)] =
          read_cloud_blobs(dir, je, FrameTag::canonical(track), "assets.deformables." + track);
  return assets;
}

bool has_assets(const fs::path& scene_dir) {
  return fs::exists(scene_dir / "assets" / "assets.json");
}

}  // namespace pcflow
