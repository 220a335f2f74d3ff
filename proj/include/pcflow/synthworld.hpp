#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pcflow/rng.hpp"
#include "pcflow/scene.hpp"

namespace pcflow {

// Flat per-face coloring for box primitives: uniform, or a 2x2 checker per
// face so that colorization and generation quality stay measurable.
struct ColorPattern {
  enum class Kind : std::uint8_t { kUniform, kChecker };
  Kind kind = Kind::kUniform;
  std::array<float, 3> a{0.5f, 0.5f, 0.5f};
  std::array<float, 3> b{0.5f, 0.5f, 0.5f};

  static ColorPattern uniform(std::array<float, 3> c) { return {Kind::kUniform, c, c}; }
  static ColorPattern checker(std::array<float, 3> a, std::array<float, 3> b) {
    return {Kind::kChecker, a, b};
  }
};

// Everything in the synthetic world is an oriented box with a color pattern.
// actor_index is -1 for statics, else the index into WorldSpec::actors.
struct Primitive {
  std::string id;
  int actor_index = -1;
  Pose pose;
  Vec3 dims;
  ColorPattern pattern;
};

// Face ids: 0:+x 1:-x 2:+y 3:-y 4:+z 5:-z (local axes).
struct RayHit {
  double t = 0.0;
  int primitive = -1;
  int face = -1;
};

// Nearest intersection of the world-frame ray with any primitive in (eps, tmax].
std::optional<RayHit> intersect_ray(const std::vector<Primitive>& prims, const Vec3& origin,
                                    const Vec3& dir, double tmax);

// Flat color of the face cell containing the local-frame point.
std::array<float, 3> face_color(const Primitive& prim, int face, const Vec3& local);
// Convenience: color at a world-frame surface point (face from largest normalized axis).
std::array<float, 3> surface_color(const Primitive& prim, const Vec3& world_point);
// Distance from a world point to the primitive's surface (0 on the surface).
double surface_distance(const Primitive& prim, const Vec3& world_point);

struct ActorSpec {
  std::string track_id;
  Category category = Category::kVehicle;
  Vec3 dims;
  ColorPattern pattern;
  std::vector<Vec3> positions;  // exactly T_scene entries
  std::vector<double> yaw_deg;  // exactly T_scene entries
};

struct StaticSpec {
  std::string id;
  Pose pose;
  Vec3 dims;
  ColorPattern pattern;
};

struct CameraRigSpec {
  std::string name = "front";
  double fx = 40, fy = 40, cx = 32, cy = 32;
  int width = 64, height = 64;
  Pose mount;  // camera -> ego

  // Forward-looking mount: camera +z along ego +x, +x right, +y down.
  static Pose forward_mount(const Vec3& offset);
};

struct LidarSpec {
  int azimuth_count = 180;
  int elevation_count = 20;
  double elevation_min_deg = -18.0;
  double elevation_max_deg = 6.0;
  double max_range = 80.0;
  double range_noise_sigma = 0.0;
  Vec3 mount_offset{0.0, 0.0, 1.6};  // sensor origin in the ego frame
};

struct EgoSpec {
  std::vector<Vec3> positions;  // exactly T_scene entries
  std::vector<double> yaw_deg;
};

struct WorldSpec {
  int frames = 49;
  EgoSpec ego;
  std::vector<ActorSpec> actors;
  std::vector<StaticSpec> statics;
  std::vector<CameraRigSpec> cameras;
  LidarSpec lidar;
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
  nlohmann::json to_json() const;
  static WorldSpec from_json(const nlohmann::json& j);
};

Pose actor_pose(const ActorSpec& actor, int frame);
Pose ego_pose(const WorldSpec& spec, int frame);
std::vector<Primitive> world_primitives(const WorldSpec& spec, int frame);

struct LidarReturns {
  PointCloud cloud;  // world frame, colors black, flags observed
  std::vector<std::int32_t> actor_index;
};

LidarReturns simulate_lidar(const std::vector<Primitive>& prims, const Pose& sensor_pose,
                            const LidarSpec& lidar, Rng& noise);

// Deterministic flat-shaded z-buffer rasterization with a two-tone
// sky/ground background; colors land on the byte grid.
void render_reference(const std::vector<Primitive>& prims, const CameraModel& camera, Image& image,
                      DepthMap& depth);

// Re-renders the recorded reference view of a stored scene (the world spec
// travels in scene metadata).
Image render_reference_image(const Scene& scene, const std::string& camera_name, int frame);

Scene generate_scene(const WorldSpec& spec);

// Procedural world family used by the multi-scene pipeline stages.
struct WorldGenParams {
  int frames = 49;
  int image_size = 64;
  int vehicles = 2;
  int pedestrians = 1;
  int blocks = 4;
  int lidar_azimuths = 180;
  int lidar_elevations = 20;
  bool ground = true;
};

WorldSpec make_random_world(const WorldGenParams& params, std::uint64_t seed);

}  // namespace pcflow
