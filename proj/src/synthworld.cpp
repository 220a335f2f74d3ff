#include "pcflow/synthworld.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "pcflow/parallel.hpp"
#include "pcflow/scene_io.hpp"

namespace pcflow {

using nlohmann::json;

namespace {

constexpr double kRayEps = 1e-9;
constexpr std::array<float, 3> kSkyTone{0.53f, 0.73f, 0.92f};
constexpr std::array<float, 3> kGroundTone{0.25f, 0.22f, 0.20f};

// Slab test in the primitive's local frame. Returns entry distance and face.
bool intersect_box_local(const Vec3& o, const Vec3& d, const Vec3& half, double& t_enter,
                         int& face) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  int enter_axis = -1;
  bool enter_neg = false;
  const double ov[3] = {o.x, o.y, o.z};
  const double dv[3] = {d.x, d.y, d.z};
  const double hv[3] = {half.x, half.y, half.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dv[a]) < 1e-14) {
      if (std::abs(ov[a]) > hv[a]) return false;
      continue;
    }
    double t1 = (-hv[a] - ov[a]) / dv[a];
    double t2 = (hv[a] - ov[a]) / dv[a];
    bool neg_first = true;  // t1 is the -face crossing
    if (t1 > t2) {
      std::swap(t1, t2);
      neg_first = false;
    }
    if (t1 > tmin) {
      tmin = t1;
      enter_axis = a;
      enter_neg = neg_first;
    }
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return false;
  }
  if (enter_axis < 0) return false;
  t_enter = tmin;
  face = 2 * enter_axis + (enter_neg ? 1 : 0);
  return true;
}

}  // namespace

std::optional<RayHit> intersect_ray(const std::vector<Primitive>& prims, const Vec3& origin,
                                    const Vec3& dir, double tmax) {
  RayHit best;
  best.t = tmax;
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const Primitive& prim = prims[i];
    const Vec3 o = prim.pose.apply_inverse(origin);
    const Vec3 d = prim.pose.rotation.transposed() * dir;
    double t = 0.0;
    int face = -1;
    if (!intersect_box_local(o, d, prim.dims * 0.5, t, face)) continue;
    if (t <= kRayEps || t >= best.t) continue;
    best.t = t;
    best.primitive = int(i);
    best.face = face;
  }
  if (best.primitive < 0) return std::nullopt;
  return best;
}

std::array<float, 3> face_color(const Primitive& prim, int face, const Vec3& local) {
  if (prim.pattern.kind == ColorPattern::Kind::kUniform) return prim.pattern.a;
  // Checker cell from the two in-face coordinates.
  double u = 0.0, v = 0.0;
  switch (face / 2) {
    case 0: u = local.y; v = local.z; break;
    case 1: u = local.x; v = local.z; break;
    default: u = local.x; v = local.y; break;
  }
  const bool odd = (u >= 0.0) != (v >= 0.0);
  return odd ? prim.pattern.b : prim.pattern.a;
}

std::array<float, 3> surface_color(const Primitive& prim, const Vec3& world_point) {
  const Vec3 local = prim.pose.apply_inverse(world_point);
  const Vec3 half = prim.dims * 0.5;
  const double rx = std::abs(local.x) / half.x;
  const double ry = std::abs(local.y) / half.y;
  const double rz = std::abs(local.z) / half.z;
  int face;
  if (rx >= ry && rx >= rz)
    face = local.x >= 0 ? 0 : 1;
  else if (ry >= rz)
    face = local.y >= 0 ? 2 : 3;
  else
    face = local.z >= 0 ? 4 : 5;
  return face_color(prim, face, local);
}

double surface_distance(const Primitive& prim, const Vec3& world_point) {
  const Vec3 local = prim.pose.apply_inverse(world_point);
  const Vec3 half = prim.dims * 0.5;
  const double dx = std::abs(local.x) - half.x;
  const double dy = std::abs(local.y) - half.y;
  const double dz = std::abs(local.z) - half.z;
  const double ox = std::max(dx, 0.0), oy = std::max(dy, 0.0), oz = std::max(dz, 0.0);
  const double outside = std::sqrt(ox * ox + oy * oy + oz * oz);
  const double inside = std::max({dx, dy, dz});
  return outside > 0.0 ? outside : -inside;  // -inside >= 0 when point is interior
}

Pose CameraRigSpec::forward_mount(const Vec3& offset) {
  Pose p;
  // Camera axes in ego coordinates: x_cam=(0,-1,0), y_cam=(0,0,-1), z_cam=(1,0,0).
  p.rotation.m = {0, 0, 1, -1, 0, 0, 0, -1, 0};
  p.translation = offset;
  return p;
}

void WorldSpec::validate() const {
  if (frames < 5) throw std::invalid_argument("world: frames must be >= 5");
  if (lidar.max_range <= 0) throw std::invalid_argument("world: lidar max_range must be > 0");
  if (lidar.azimuth_count <= 0 || lidar.elevation_count <= 0)
    throw std::invalid_argument("world: lidar ray grid is empty");
  if (int(ego.positions.size()) != frames || int(ego.yaw_deg.size()) != frames)
    throw std::invalid_argument("world: ego trajectory must have exactly T_scene poses");
  if (cameras.empty()) throw std::invalid_argument("world: at least one camera required");
  std::set<std::string> ids;
  for (const auto& a : actors) {
    if (a.category == Category::kStatic)
      throw std::invalid_argument("world: actor " + a.track_id + " has Static category");
    if (a.dims.x <= 0 || a.dims.y <= 0 || a.dims.z <= 0)
      throw std::invalid_argument("world: actor " + a.track_id + " dims not strictly positive");
    if (!ids.insert(a.track_id).second)
      throw std::invalid_argument("world: overlapping track id " + a.track_id);
    if (int(a.positions.size()) != frames || int(a.yaw_deg.size()) != frames)
      throw std::invalid_argument("world: actor " + a.track_id +
                                  " trajectory must have exactly T_scene poses");
  }
}

Pose actor_pose(const ActorSpec& actor, int frame) {
  Pose p;
  p.rotation = Mat3::rot_z(actor.yaw_deg[std::size_t(frame)] * kDegToRad);
  p.translation = actor.positions[std::size_t(frame)];
  return p;
}

Pose ego_pose(const WorldSpec& spec, int frame) {
  Pose p;
  p.rotation = Mat3::rot_z(spec.ego.yaw_deg[std::size_t(frame)] * kDegToRad);
  p.translation = spec.ego.positions[std::size_t(frame)];
  return p;
}

std::vector<Primitive> world_primitives(const WorldSpec& spec, int frame) {
  std::vector<Primitive> prims;
  prims.reserve(spec.statics.size() + spec.actors.size());
  for (const auto& s : spec.statics) prims.push_back({s.id, -1, s.pose, s.dims, s.pattern});
  for (std::size_t i = 0; i < spec.actors.size(); ++i) {
    const auto& a = spec.actors[i];
    prims.push_back({a.track_id, int(i), actor_pose(a, frame), a.dims, a.pattern});
  }
  return prims;
}

LidarReturns simulate_lidar(const std::vector<Primitive>& prims, const Pose& sensor_pose,
                            const LidarSpec& lidar, Rng& noise) {
  LidarReturns out;
  out.cloud.frame_tag = FrameTag::world();
  const Vec3 origin = sensor_pose.translation;
  for (int e = 0; e < lidar.elevation_count; ++e) {
    const double fe = lidar.elevation_count == 1 ? 0.5 : double(e) / (lidar.elevation_count - 1);
    const double elev =
        (lidar.elevation_min_deg + fe * (lidar.elevation_max_deg - lidar.elevation_min_deg)) *
        kDegToRad;
    for (int a = 0; a < lidar.azimuth_count; ++a) {
      const double az = 2.0 * 3.141592653589793 * double(a) / lidar.azimuth_count;
      const Vec3 local{std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                       std::sin(elev)};
      const Vec3 dir = sensor_pose.rotation * local;
      const auto hit = intersect_ray(prims, origin, dir, lidar.max_range);
      if (!hit) continue;
      double range = hit->t;
      if (lidar.range_noise_sigma > 0.0) range += noise.normal(0.0, lidar.range_noise_sigma);
      const Vec3 p = origin + dir * range;
      out.cloud.push(p, kBlack, PointFlag::kObserved);
      out.actor_index.push_back(prims[std::size_t(hit->primitive)].actor_index);
    }
  }
  return out;
}

namespace {

struct ScreenVertex {
  double u, v, inv_z;
};

// Rasterizes one camera-space triangle with perspective-correct depth.
void raster_triangle(const std::array<Vec3, 3>& cam_pts, const std::array<float, 3>& color,
                     const CameraModel& cam, Image& image, DepthMap& depth) {
  ScreenVertex sv[3];
  for (int i = 0; i < 3; ++i) {
    const Vec3& p = cam_pts[std::size_t(i)];
    sv[i] = {cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy, 1.0 / p.z};
  }
  double area = (sv[1].u - sv[0].u) * (sv[2].v - sv[0].v) - (sv[2].u - sv[0].u) * (sv[1].v - sv[0].v);
  if (area == 0.0) return;
  int flip = 1;
  if (area < 0.0) {
    area = -area;
    flip = -1;
  }
  const int x0 = std::max(0, int(std::floor(std::min({sv[0].u, sv[1].u, sv[2].u}))));
  const int x1 = std::min(cam.width - 1, int(std::ceil(std::max({sv[0].u, sv[1].u, sv[2].u}))));
  const int y0 = std::max(0, int(std::floor(std::min({sv[0].v, sv[1].v, sv[2].v}))));
  const int y1 = std::min(cam.height - 1, int(std::ceil(std::max({sv[0].v, sv[1].v, sv[2].v}))));
  for (int y = y0; y <= y1; ++y) {
    const double py = y + 0.5;
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5;
      const double w0 = flip * ((sv[1].u - px) * (sv[2].v - py) - (sv[2].u - px) * (sv[1].v - py));
      const double w1 = flip * ((sv[2].u - px) * (sv[0].v - py) - (sv[0].u - px) * (sv[2].v - py));
      const double w2 = flip * ((sv[0].u - px) * (sv[1].v - py) - (sv[1].u - px) * (sv[0].v - py));
      if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
      const double inv_z = (w0 * sv[0].inv_z + w1 * sv[1].inv_z + w2 * sv[2].inv_z) / area;
      if (inv_z <= 0.0) continue;
      const float z = float(1.0 / inv_z);
      if (z < depth.at(x, y)) {
        depth.at(x, y) = z;
        float* px_out = image.pixel(x, y);
        px_out[0] = color[0];
        px_out[1] = color[1];
        px_out[2] = color[2];
      }
    }
  }
}

// Clips a camera-space polygon against z = near, then fans into triangles.
void clip_and_raster(std::vector<Vec3> poly, const std::array<float, 3>& color,
                     const CameraModel& cam, Image& image, DepthMap& depth) {
  constexpr double kNear = 0.1;
  std::vector<Vec3> clipped;
  clipped.reserve(poly.size() + 2);
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec3& a = poly[i];
    const Vec3& b = poly[(i + 1) % poly.size()];
    const bool a_in = a.z > kNear, b_in = b.z > kNear;
    if (a_in) clipped.push_back(a);
    if (a_in != b_in) {
      const double t = (kNear - a.z) / (b.z - a.z);
      clipped.push_back(a + (b - a) * t);
    }
  }
  for (std::size_t i = 2; i < clipped.size(); ++i)
    raster_triangle({clipped[0], clipped[i - 1], clipped[i]}, color, cam, image, depth);
}

// Local-frame corner layout of face f; uv_axes pick the checker coordinates.
void face_quad(const Vec3& half, int face, std::array<Vec3, 4>& corners) {
  const int axis = face / 2;
  const double sign = (face % 2 == 0) ? 1.0 : -1.0;
  auto mk = [&](double u, double v) -> Vec3 {
    switch (axis) {
      case 0: return {sign * half.x, u, v};
      case 1: return {u, sign * half.y, v};
      default: return {u, v, sign * half.z};
    }
  };
  const double hu = (axis == 0) ? half.y : half.x;
  const double hv = (axis == 2) ? half.y : half.z;
  corners = {mk(-hu, -hv), mk(hu, -hv), mk(hu, hv), mk(-hu, hv)};
}

}  // namespace

void render_reference(const std::vector<Primitive>& prims, const CameraModel& camera, Image& image,
                      DepthMap& depth) {
  image = Image(camera.width, camera.height);
  depth = DepthMap(camera.width, camera.height);
  // Two-tone background keyed on the world-frame ray direction.
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x) {
      const Vec3 d_cam{(x + 0.5 - camera.cx) / camera.fx, (y + 0.5 - camera.cy) / camera.fy, 1.0};
      const Vec3 d_world = camera.pose.rotation * d_cam;
      const auto& tone = d_world.z >= 0.0 ? kSkyTone : kGroundTone;
      float* px = image.pixel(x, y);
      px[0] = tone[0];
      px[1] = tone[1];
      px[2] = tone[2];
    }

  for (const auto& prim : prims) {
    const Vec3 half = prim.dims * 0.5;
    for (int face = 0; face < 6; ++face) {
      std::array<Vec3, 4> quad;
      face_quad(half, face, quad);
      const int cells = prim.pattern.kind == ColorPattern::Kind::kChecker ? 2 : 1;
      for (int cu = 0; cu < cells; ++cu)
        for (int cv = 0; cv < cells; ++cv) {
          // Subdivide the quad bilinearly into checker cells.
          auto lerp_quad = [&](double s, double t) {
            const Vec3 a = quad[0] + (quad[1] - quad[0]) * s;
            const Vec3 b = quad[3] + (quad[2] - quad[3]) * s;
            return a + (b - a) * t;
          };
          const double s0 = double(cu) / cells, s1 = double(cu + 1) / cells;
          const double t0 = double(cv) / cells, t1 = double(cv + 1) / cells;
          const Vec3 cell_center = lerp_quad(0.5 * (s0 + s1), 0.5 * (t0 + t1));
          const auto color = face_color(prim, face, cell_center);
          std::vector<Vec3> poly_cam;
          for (auto [s, t] : {std::pair{s0, t0}, {s1, t0}, {s1, t1}, {s0, t1}}) {
            const Vec3 world = prim.pose.apply(lerp_quad(s, t));
            poly_cam.push_back(world_to_camera(world, camera));
          }
          clip_and_raster(std::move(poly_cam), color, camera, image, depth);
        }
    }
  }
  quantize_image(image);
}

Image render_reference_image(const Scene& scene, const std::string& camera_name, int frame) {
  if (frame < 0 || frame >= scene.frame_count())
    throw std::invalid_argument("render_reference_image: frame out of range");
  const WorldSpec spec = WorldSpec::from_json(scene.metadata.extra.at("world_spec"));
  const CameraModel cam = scene.camera_at(camera_name, frame);
  Image image;
  DepthMap depth;
  render_reference(world_primitives(spec, frame), cam, image, depth);
  return image;
}

Scene generate_scene(const WorldSpec& spec) {
  spec.validate();
  Scene scene;
  scene.metadata.seed = spec.seed;
  scene.metadata.generator = "synthworld";
  scene.metadata.extra["world_spec"] = spec.to_json();
  for (const auto& rig : spec.cameras) {
    CameraModel cam;
    cam.name = rig.name;
    cam.fx = rig.fx;
    cam.fy = rig.fy;
    cam.cx = rig.cx;
    cam.cy = rig.cy;
    cam.width = rig.width;
    cam.height = rig.height;
    cam.pose = rig.mount;
    scene.cameras.push_back(cam);
  }

  const Rng base(spec.seed);
  scene.frames.resize(std::size_t(spec.frames));
  const int n_frames = spec.frames;
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int f = 0; f < n_frames; ++f) {
    SceneFrame& frame = scene.frames[std::size_t(f)];
    frame.index = f;
    frame.ego_pose = ego_pose(spec, f);
    const auto prims = world_primitives(spec, f);

    Pose sensor = frame.ego_pose;
    sensor.translation = frame.ego_pose.apply(spec.lidar.mount_offset);
    Rng noise = base.fork("lidar").fork(std::uint64_t(f));
    LidarReturns returns = simulate_lidar(prims, sensor, spec.lidar, noise);
    frame.lidar = std::move(returns.cloud);
    frame.lidar_track = std::move(returns.actor_index);

    for (const auto& a : spec.actors) {
      BBox3D box;
      box.track_id = a.track_id;
      box.category = a.category;
      box.pose = actor_pose(a, f);
      box.dims = a.dims;
      frame.boxes.push_back(std::move(box));
    }

    for (const auto& cam_spec : scene.cameras) {
      CameraModel cam = cam_spec;
      cam.pose = frame.ego_pose * cam.pose;
      Image img;
      DepthMap depth;
      render_reference(prims, cam, img, depth);
      frame.reference_images[cam.name] = std::move(img);
      frame.reference_depths[cam.name] = std::move(depth);
    }
  }
  return scene;
}

// ---------------------------------------------------------------------------
// JSON round-trip

namespace {

json color_to_json(const std::array<float, 3>& c) { return json::array({c[0], c[1], c[2]}); }
std::array<float, 3> color_from_json(const json& j) {
  return {j[0].get<float>(), j[1].get<float>(), j[2].get<float>()};
}

json pattern_to_json(const ColorPattern& p) {
  json j;
  j["kind"] = p.kind == ColorPattern::Kind::kUniform ? "uniform" : "checker";
  j["a"] = color_to_json(p.a);
  j["b"] = color_to_json(p.b);
  return j;
}

ColorPattern pattern_from_json(const json& j) {
  ColorPattern p;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "uniform")
    p.kind = ColorPattern::Kind::kUniform;
  else if (kind == "checker")
    p.kind = ColorPattern::Kind::kChecker;
  else
    throw std::invalid_argument("unknown color pattern kind: " + kind);
  p.a = color_from_json(j.at("a"));
  p.b = color_from_json(j.at("b"));
  return p;
}

json vec3s_to_json(const std::vector<Vec3>& v) {
  json arr = json::array();
  for (const auto& p : v) arr.push_back(json::array({p.x, p.y, p.z}));
  return arr;
}

std::vector<Vec3> vec3s_from_json(const json& j) {
  std::vector<Vec3> out;
  for (const auto& e : j) out.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>()});
  return out;
}

}  // namespace

json WorldSpec::to_json() const {
  json j;
  j["frames"] = frames;
  j["seed"] = seed;
  j["ego"]["positions"] = vec3s_to_json(ego.positions);
  j["ego"]["yaw_deg"] = ego.yaw_deg;
  j["actors"] = json::array();
  for (const auto& a : actors) {
    json ja;
    ja["track_id"] = a.track_id;
    ja["category"] = category_name(a.category);
    ja["dims"] = json::array({a.dims.x, a.dims.y, a.dims.z});
    ja["pattern"] = pattern_to_json(a.pattern);
    ja["positions"] = vec3s_to_json(a.positions);
    ja["yaw_deg"] = a.yaw_deg;
    j["actors"].push_back(std::move(ja));
  }
  j["statics"] = json::array();
  for (const auto& s : statics) {
    json js;
    js["id"] = s.id;
    js["pose"] = pose_to_json(s.pose);
    js["dims"] = json::array({s.dims.x, s.dims.y, s.dims.z});
    js["pattern"] = pattern_to_json(s.pattern);
    j["statics"].push_back(std::move(js));
  }
  j["cameras"] = json::array();
  for (const auto& c : cameras) {
    json jc;
    jc["name"] = c.name;
    jc["fx"] = c.fx;
    jc["fy"] = c.fy;
    jc["cx"] = c.cx;
    jc["cy"] = c.cy;
    jc["width"] = c.width;
    jc["height"] = c.height;
    jc["mount"] = pose_to_json(c.mount);
    j["cameras"].push_back(std::move(jc));
  }
  j["lidar"]["azimuth_count"] = lidar.azimuth_count;
  j["lidar"]["elevation_count"] = lidar.elevation_count;
  j["lidar"]["elevation_min_deg"] = lidar.elevation_min_deg;
  j["lidar"]["elevation_max_deg"] = lidar.elevation_max_deg;
  j["lidar"]["max_range"] = lidar.max_range;
  j["lidar"]["range_noise_sigma"] = lidar.range_noise_sigma;
  j["lidar"]["mount_offset"] =
      json::array({lidar.mount_offset.x, lidar.mount_offset.y, lidar.mount_offset.z});
  return j;
}

WorldSpec WorldSpec::from_json(const json& j) {
  WorldSpec spec;
  spec.frames = j.at("frames").get<int>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  spec.ego.positions = vec3s_from_json(j.at("ego").at("positions"));
  spec.ego.yaw_deg = j.at("ego").at("yaw_deg").get<std::vector<double>>();
  for (const auto& ja : j.at("actors")) {
    ActorSpec a;
    a.track_id = ja.at("track_id").get<std::string>();
    a.category = category_from_name(ja.at("category").get<std::string>());
    a.dims = {ja.at("dims")[0].get<double>(), ja.at("dims")[1].get<double>(),
              ja.at("dims")[2].get<double>()};
    a.pattern = pattern_from_json(ja.at("pattern"));
    a.positions = vec3s_from_json(ja.at("positions"));
    a.yaw_deg = ja.at("yaw_deg").get<std::vector<double>>();
    spec.actors.push_back(std::move(a));
  }
  for (const auto& js : j.at("statics")) {
    StaticSpec s;
    s.id = js.at("id").get<std::string>();
    s.pose = pose_from_json(js.at("pose"), "statics.pose");
    s.dims = {js.at("dims")[0].get<double>(), js.at("dims")[1].get<double>(),
              js.at("dims")[2].get<double>()};
    s.pattern = pattern_from_json(js.at("pattern"));
    spec.statics.push_back(std::move(s));
  }
  for (const auto& jc : j.at("cameras")) {
    CameraRigSpec c;
    c.name = jc.at("name").get<std::string>();
    c.fx = jc.at("fx").get<double>();
    c.fy = jc.at("fy").get<double>();
    c.cx = jc.at("cx").get<double>();
    c.cy = jc.at("cy").get<double>();
    c.width = jc.at("width").get<int>();
    c.height = jc.at("height").get<int>();
    c.mount = pose_from_json(jc.at("mount"), "cameras.mount");
    spec.cameras.push_back(std::move(c));
  }
  const json& jl = j.at("lidar");
  spec.lidar.azimuth_count = jl.at("azimuth_count").get<int>();
  spec.lidar.elevation_count = jl.at("elevation_count").get<int>();
  spec.lidar.elevation_min_deg = jl.at("elevation_min_deg").get<double>();
  spec.lidar.elevation_max_deg = jl.at("elevation_max_deg").get<double>();
  spec.lidar.max_range = jl.at("max_range").get<double>();
  spec.lidar.range_noise_sigma = jl.at("range_noise_sigma").get<double>();
  spec.lidar.mount_offset = {jl.at("mount_offset")[0].get<double>(),
                             jl.at("mount_offset")[1].get<double>(),
                             jl.at("mount_offset")[2].get<double>()};
  return spec;
}

// ---------------------------------------------------------------------------
// Procedural world family

namespace {

// Snap to 1/64 m so repeated edit arithmetic stays on dyadic values.
double snap(double v) { return std::round(v * 64.0) / 64.0; }

std::array<float, 3> bright_color(Rng& rng) {
  // Byte-grid colors so raster output is already quantized.
  auto chan = [&] { return float(55 + rng.below(200)) / 255.0f; };
  return {chan(), chan(), chan()};
}

}  // namespace

WorldSpec make_random_world(const WorldGenParams& params, std::uint64_t seed) {
  Rng rng = Rng(seed).fork("world-gen");
  WorldSpec spec;
  spec.frames = params.frames;
  spec.seed = seed;

  const int T = params.frames;
  const double dt = 0.1;
  const double ego_speed = snap(rng.uniform(6.0, 9.0));
  for (int f = 0; f < T; ++f) {
    spec.ego.positions.push_back({snap(ego_speed * dt * f), 0.0, 0.0});
    spec.ego.yaw_deg.push_back(0.0);
  }

  CameraRigSpec cam;
  cam.name = "front";
  cam.width = params.image_size;
  cam.height = params.image_size;
  cam.fx = cam.fy = params.image_size * 0.78125;
  cam.cx = cam.cy = params.image_size / 2.0;
  cam.mount = CameraRigSpec::forward_mount({1.0, 0.0, 1.4});
  spec.cameras.push_back(cam);

  spec.lidar.azimuth_count = params.lidar_azimuths;
  spec.lidar.elevation_count = params.lidar_elevations;

  if (params.ground) {
    StaticSpec ground;
    ground.id = "ground";
    ground.dims = {400.0, 400.0, 0.1};
    ground.pose.translation = {0.0, 0.0, -0.05};
    ground.pattern = ColorPattern::uniform({0.31f, 0.31f, 0.33f});
    spec.statics.push_back(ground);
  }
  for (int b = 0; b < params.blocks; ++b) {
    StaticSpec block;
    block.id = "block_" + std::to_string(b);
    const double side = (b % 2 == 0) ? 1.0 : -1.0;
    block.dims = {snap(rng.uniform(3.0, 7.0)), snap(rng.uniform(2.0, 4.0)),
                  snap(rng.uniform(2.5, 6.0))};
    block.pose.translation = {snap(rng.uniform(5.0, 55.0)), side * snap(rng.uniform(7.0, 13.0)),
                              block.dims.z * 0.5};
    block.pattern = ColorPattern::checker(bright_color(rng), bright_color(rng));
    spec.statics.push_back(block);
  }

  const double lanes[3] = {-3.5, 0.0, 3.5};
  for (int v = 0; v < params.vehicles; ++v) {
    ActorSpec a;
    a.track_id = "veh_" + std::to_string(v);
    a.category = Category::kVehicle;
    a.dims = {snap(rng.uniform(4.2, 4.8)), snap(rng.uniform(1.8, 2.1)),
              snap(rng.uniform(1.5, 1.8))};
    a.pattern = ColorPattern::checker(bright_color(rng), bright_color(rng));
    const double lane = lanes[rng.below(2)];  // ahead lanes only, keep ego lane clear
    const double lane_y = lane == 0.0 ? 3.5 : lane;
    const double x0 = snap(rng.uniform(8.0, 16.0 + 6.0 * v));
    // Speed close to ego so the vehicle stays in view for the whole scene.
    const double speed = snap(ego_speed + rng.uniform(-1.5, 1.5));
    const bool oncoming = false;
    for (int f = 0; f < T; ++f) {
      a.positions.push_back({snap(x0 + speed * dt * f), lane_y, a.dims.z * 0.5});
      a.yaw_deg.push_back(oncoming ? 180.0 : 0.0);
    }
    spec.actors.push_back(std::move(a));
  }

  for (int p = 0; p < params.pedestrians; ++p) {
    ActorSpec a;
    a.track_id = "ped_" + std::to_string(p);
    a.category = p % 2 == 0 ? Category::kPedestrian : Category::kCyclist;
    a.dims = a.category == Category::kPedestrian ? Vec3{0.5, 0.5, 1.75} : Vec3{1.75, 0.5, 1.75};
    a.pattern = ColorPattern::uniform(bright_color(rng));
    const double side = rng.below(2) == 0 ? 1.0 : -1.0;
    const double x0 = snap(rng.uniform(10.0, 25.0));
    const double y0 = side * snap(rng.uniform(5.0, 6.5));
    const double vy = -side * snap(rng.uniform(0.4, 1.2));
    for (int f = 0; f < T; ++f) {
      a.positions.push_back({x0, snap(y0 + vy * dt * f), a.dims.z * 0.5});
      a.yaw_deg.push_back(side > 0 ? -90.0 : 90.0);
    }
    spec.actors.push_back(std::move(a));
  }

  return spec;
}

}  // namespace pcflow
