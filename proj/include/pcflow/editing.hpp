#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pcflow/scene.hpp"
#include "pcflow/scene_io.hpp"

namespace pcflow {

// Declarative trajectory edits. Angles are degrees; distances meters.
// frame range [first, last] is inclusive and cumulative profiles are
// measured in elapsed frames from `first` (identity at `first`).
struct ActorEdit {
  enum class Kind : std::uint8_t {
    kLateralShift,      // total meters, linear ramp over the range
    kLongitudinalShift, // constant meters along local +x
    kYawSpin,           // degrees per frame about local z
    kRollover,          // degrees per frame about local x, capped
    kSpeedScale,        // time reparameterization by factor
    kRemove,
    kInsert,
  };
  Kind kind = Kind::kLateralShift;
  std::string track_id;
  int first = 0, last = -1;  // -1 = scene end
  double amount = 0.0;       // meters (shift), deg/frame (spin, rollover), factor (speed)
  double cap_deg = 90.0;     // rollover cap
  // kInsert only: asset track to clone and the trajectory to follow.
  std::string insert_asset;
  std::vector<Pose> insert_poses;
  Vec3 insert_dims;
};

struct EgoEdit {
  double lateral = 0.0;       // meters along ego +y
  double longitudinal = 0.0;  // meters along ego +x
  double yaw_deg = 0.0;
};

struct EditSpec {
  std::vector<ActorEdit> actors;
  std::optional<EgoEdit> ego;

  nlohmann::json to_json() const;
  static EditSpec from_json(const nlohmann::json& j);
};

// Inserted actors get synthetic ids "ins_<n>" in spec order.
struct InsertedActor {
  std::string track_id;
  std::string asset_track;
  std::vector<Pose> poses;  // one per scene frame
  Vec3 dims;
};

// Compiled, frame-resolved form of an EditSpec.
struct EditPlan {
  std::map<std::pair<std::string, int>, Pose> pose_overrides;
  std::set<std::pair<std::string, int>> removed;
  std::vector<InsertedActor> inserted;
  std::optional<EgoEdit> ego;

  const Pose* override_for(const std::string& track, int frame) const {
    auto it = pose_overrides.find({track, frame});
    return it == pose_overrides.end() ? nullptr : &it->second;
  }
  bool is_removed(const std::string& track, int frame) const {
    return removed.count({track, frame}) > 0;
  }
};

// Deterministic compilation; throws on unknown tracks, out-of-range frames,
// or a track edited twice in one frame.
EditPlan compile_edits(const EditSpec& spec, const Scene& scene);

// Resolved box pose at a frame under a plan (annotation unless overridden).
Pose effective_pose(const Scene& scene, const EditPlan& plan, const std::string& track, int frame);

// Ego pose at a frame with the plan's ego offset applied (offset expressed
// in the ego's own frame).
Pose effective_ego_pose(const Scene& scene, const EditPlan& plan, int frame);

// Static cloud plus every present actor's asset transformed by its effective
// pose; removed actors contribute nothing. Ordering: statics, then frame box
// order, then insertions.
PointCloud assemble_world(const Scene& scene, const SceneAssets& assets, const EditPlan& plan,
                          int frame);

}  // namespace pcflow
