#include "pcflow/editing.hpp"

#include <cmath>
#include <stdexcept>

namespace pcflow {

using nlohmann::json;

namespace {

std::string kind_name(ActorEdit::Kind k) {
  switch (k) {
    case ActorEdit::Kind::kLateralShift: return "lateral_shift";
    case ActorEdit::Kind::kLongitudinalShift: return "longitudinal_shift";
    case ActorEdit::Kind::kYawSpin: return "yaw_spin";
    case ActorEdit::Kind::kRollover: return "rollover";
    case ActorEdit::Kind::kSpeedScale: return "speed_scale";
    case ActorEdit::Kind::kRemove: return "remove";
    case ActorEdit::Kind::kInsert: return "insert";
  }
  return "?";
}

ActorEdit::Kind kind_from_name(const std::string& s) {
  if (s == "lateral_shift") return ActorEdit::Kind::kLateralShift;
  if (s == "longitudinal_shift") return ActorEdit::Kind::kLongitudinalShift;
  if (s == "yaw_spin") return ActorEdit::Kind::kYawSpin;
  if (s == "rollover") return ActorEdit::Kind::kRollover;
  if (s == "speed_scale") return ActorEdit::Kind::kSpeedScale;
  if (s == "remove") return ActorEdit::Kind::kRemove;
  if (s == "insert") return ActorEdit::Kind::kInsert;
  throw std::invalid_argument("unknown edit kind: " + s);
}

// Original annotated poses of a track across the whole scene (frames where
// the track is absent hold nullopt).
std::vector<std::optional<Pose>> track_poses(const Scene& scene, const std::string& track) {
  std::vector<std::optional<Pose>> poses(std::size_t(scene.frame_count()));
  for (const auto& f : scene.frames)
    if (const BBox3D* b = f.find_box(track)) poses[std::size_t(f.index)] = b->pose;
  return poses;
}

}  // namespace

EditPlan compile_edits(const EditSpec& spec, const Scene& scene) {
  EditPlan plan;
  plan.ego = spec.ego;
  const int T = scene.frame_count();
  std::set<std::pair<std::string, int>> touched;
  int insert_counter = 0;

  for (const ActorEdit& edit : spec.actors) {
    const int first = edit.first;
    const int last = edit.last < 0 ? T - 1 : edit.last;
    if (first < 0 || last >= T || first > last)
      throw std::invalid_argument("edit on " + edit.track_id + ": frame range out of scene");

    if (edit.kind == ActorEdit::Kind::kInsert) {
      if (int(edit.insert_poses.size()) != T)
        throw std::invalid_argument("insert edit: trajectory must cover every scene frame");
      InsertedActor ins;
      ins.track_id = "ins_" + std::to_string(insert_counter++);
      ins.asset_track = edit.insert_asset;
      ins.poses = edit.insert_poses;
      ins.dims = edit.insert_dims;
      plan.inserted.push_back(std::move(ins));
      continue;
    }

    const auto original = track_poses(scene, edit.track_id);
    bool exists = false;
    for (const auto& p : original) exists = exists || p.has_value();
    if (!exists) throw std::invalid_argument("edit on unknown track: " + edit.track_id);

    for (int f = first; f <= last; ++f) {
      if (!original[std::size_t(f)]) continue;
      if (!touched.insert({edit.track_id, f}).second)
        throw std::invalid_argument("track " + edit.track_id + " edited twice at frame " +
                                    std::to_string(f) + " (" + kind_name(edit.kind) + ")");
      const Pose& base = *original[std::size_t(f)];
      const double elapsed = double(f - first);
      Pose out = base;
      switch (edit.kind) {
        case ActorEdit::Kind::kLateralShift: {
          const double ramp = last == first ? 1.0 : elapsed / double(last - first);
          out.translation = base.translation + base.rotation * Vec3{0.0, edit.amount * ramp, 0.0};
          break;
        }
        case ActorEdit::Kind::kLongitudinalShift:
          out.translation = base.translation + base.rotation * Vec3{edit.amount, 0.0, 0.0};
          break;
        case ActorEdit::Kind::kYawSpin:
          out.rotation = base.rotation * Mat3::rot_z(edit.amount * elapsed * kDegToRad);
          break;
        case ActorEdit::Kind::kRollover: {
          const BBox3D* box = scene.frames[std::size_t(f)].find_box(edit.track_id);
          const double roll =
              std::min(edit.amount * elapsed, edit.cap_deg) * kDegToRad;
          // Pivot about the bottom line (local x axis dropped to z = -h/2):
          // local p -> R_x(roll) * (p - pivot) + pivot.
          const Vec3 pivot{0.0, 0.0, -box->dims.z * 0.5};
          const Mat3 rx = Mat3::rot_x(roll);
          out.rotation = base.rotation * rx;
          out.translation = base.translation + base.rotation * (pivot - rx * pivot);
          break;
        }
        case ActorEdit::Kind::kSpeedScale: {
          if (edit.amount <= 0.0) throw std::invalid_argument("speed_scale factor must be > 0");
          if (edit.amount == 1.0) break;  // identity, keep base bit-exactly
          double tau = double(first) + elapsed * edit.amount;
          // Clamp to the last frame where the track exists.
          int last_present = last;
          for (int g = T - 1; g >= 0; --g)
            if (original[std::size_t(g)]) { last_present = g; break; }
          tau = std::min(tau, double(last_present));
          const int lo = int(std::floor(tau));
          const double frac = tau - lo;
          const std::optional<Pose>& plo = original[std::size_t(lo)];
          if (!plo) break;  // gap in annotations: leave this frame unedited
          if (frac == 0.0) {
            out = *plo;
          } else {
            const std::optional<Pose>& phi = original[std::size_t(lo + 1)];
            out = phi ? interpolate_pose(*plo, *phi, frac) : *plo;
          }
          break;
        }
        case ActorEdit::Kind::kRemove:
          plan.removed.insert({edit.track_id, f});
          continue;
        default: break;
      }
      if (edit.kind != ActorEdit::Kind::kRemove) plan.pose_overrides[{edit.track_id, f}] = out;
    }
  }
  return plan;
}

Pose effective_pose(const Scene& scene, const EditPlan& plan, const std::string& track,
                    int frame) {
  if (const Pose* o = plan.override_for(track, frame)) return *o;
  const BBox3D* box = scene.frames[std::size_t(frame)].find_box(track);
  if (!box) throw std::invalid_argument("effective_pose: track " + track + " absent at frame " +
                                        std::to_string(frame));
  return box->pose;
}

Pose effective_ego_pose(const Scene& scene, const EditPlan& plan, int frame) {
  Pose ego = scene.frames[std::size_t(frame)].ego_pose;
  if (plan.ego) {
    Pose offset;
    offset.rotation = Mat3::rot_z(plan.ego->yaw_deg * kDegToRad);
    offset.translation = {plan.ego->longitudinal, plan.ego->lateral, 0.0};
    ego = ego * offset;
  }
  return ego;
}

PointCloud assemble_world(const Scene& scene, const SceneAssets& assets, const EditPlan& plan,
                          int frame) {
  if (frame < 0 || frame >= scene.frame_count())
    throw std::invalid_argument("assemble_world: frame out of range");
  PointCloud out = assets.static_cloud;
  out.frame_tag = FrameTag::world();

  const SceneFrame& sf = scene.frames[std::size_t(frame)];
  for (const BBox3D& box : sf.boxes) {
    if (plan.is_removed(box.track_id, frame)) continue;
    const Pose pose = effective_pose(scene, plan, box.track_id, frame);
    const PointCloud* asset = nullptr;
    if (auto it = assets.vehicles.find(box.track_id); it != assets.vehicles.end()) {
      asset = &it->second;
    } else if (auto dt = assets.deformables.find(box.track_id); dt != assets.deformables.end()) {
      auto ft = dt->second.find(frame);
      if (ft == dt->second.end())
        throw std::runtime_error("assemble_world: missing deformable asset for " + box.track_id +
                                 " at frame " + std::to_string(frame));
      asset = &ft->second;
    } else {
      throw std::runtime_error("assemble_world: missing asset for track " + box.track_id);
    }
    out.append(transform_cloud(*asset, pose, FrameTag::world()));
  }

  for (const InsertedActor& ins : plan.inserted) {
    auto it = assets.vehicles.find(ins.asset_track);
    if (it == assets.vehicles.end())
      throw std::runtime_error("assemble_world: missing asset for inserted actor " +
                               ins.asset_track);
    out.append(transform_cloud(it->second, ins.poses[std::size_t(frame)], FrameTag::world()));
  }
  return out;
}

json EditSpec::to_json() const {
  json j;
  j["actors"] = json::array();
  for (const auto& e : actors) {
    json je;
    je["kind"] = kind_name(e.kind);
    je["track_id"] = e.track_id;
    je["first"] = e.first;
    je["last"] = e.last;
    je["amount"] = e.amount;
    if (e.kind == ActorEdit::Kind::kRollover) je["cap_deg"] = e.cap_deg;
    if (e.kind == ActorEdit::Kind::kInsert) {
      je["insert_asset"] = e.insert_asset;
      je["insert_dims"] = json::array({e.insert_dims.x, e.insert_dims.y, e.insert_dims.z});
      je["insert_poses"] = json::array();
      for (const auto& p : e.insert_poses) je["insert_poses"].push_back(pose_to_json(p));
    }
    j["actors"].push_back(std::move(je));
  }
  if (ego) {
    j["ego"]["lateral"] = ego->lateral;
    j["ego"]["longitudinal"] = ego->longitudinal;
    j["ego"]["yaw_deg"] = ego->yaw_deg;
  }
  return j;
}

EditSpec EditSpec::from_json(const json& j) {
  EditSpec spec;
  for (const auto& je : j.value("actors", json::array())) {
    ActorEdit e;
    e.kind = kind_from_name(je.at("kind").get<std::string>());
    e.track_id = je.value("track_id", std::string());
    e.first = je.value("first", 0);
    e.last = je.value("last", -1);
    e.amount = je.value("amount", 0.0);
    e.cap_deg = je.value("cap_deg", 90.0);
    if (e.kind == ActorEdit::Kind::kInsert) {
      e.insert_asset = je.at("insert_asset").get<std::string>();
      e.insert_dims = {je.at("insert_dims")[0].get<double>(), je.at("insert_dims")[1].get<double>(),
                       je.at("insert_dims")[2].get<double>()};
      for (const auto& jp : je.at("insert_poses"))
        e.insert_poses.push_back(pose_from_json(jp, "insert_poses"));
    }
    spec.actors.push_back(std::move(e));
  }
  if (j.contains("ego")) {
    EgoEdit ego;
    ego.lateral = j["ego"].value("lateral", 0.0);
    ego.longitudinal = j["ego"].value("longitudinal", 0.0);
    ego.yaw_deg = j["ego"].value("yaw_deg", 0.0);
    spec.ego = ego;
  }
  return spec;
}

}  // namespace pcflow
