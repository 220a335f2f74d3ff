#include "pcflow/reward.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pcflow/parallel.hpp"

namespace pcflow {

std::vector<EvaluationUnit> extract_units(const Scene& scene, const EditPlan& plan,
                                          const std::string& camera, int first_frame,
                                          int clip_length, int min_area) {
  if (first_frame < 0 || first_frame + clip_length > scene.frame_count() || clip_length <= 0)
    throw std::invalid_argument("extract_units: clip out of range");
  const CameraModel mount = scene.camera(camera);
  std::vector<EvaluationUnit> units;

  for (int f = first_frame; f < first_frame + clip_length; ++f) {
    CameraModel cam = mount;
    cam.pose = effective_ego_pose(scene, plan, f) * mount.pose;

    struct Tracked {
      std::string id;
      Pose pose;
      Vec3 dims;
    };
    std::vector<Tracked> vehicles;
    for (const BBox3D& box : scene.frames[std::size_t(f)].boxes) {
      if (box.category != Category::kVehicle) continue;
      if (plan.is_removed(box.track_id, f)) continue;
      vehicles.push_back({box.track_id, effective_pose(scene, plan, box.track_id, f), box.dims});
    }
    for (const InsertedActor& ins : plan.inserted)
      vehicles.push_back({ins.track_id, ins.poses[std::size_t(f)], ins.dims});
    std::sort(vehicles.begin(), vehicles.end(),
              [](const Tracked& a, const Tracked& b) { return a.id < b.id; });

    for (const Tracked& v : vehicles) {
      const Vec3 h = v.dims * 0.5;
      double u_min = 1e30, u_max = -1e30, v_min = 1e30, v_max = -1e30;
      int in_front = 0;
      for (int corner = 0; corner < 8; ++corner) {
        const Vec3 local{(corner & 1) ? h.x : -h.x, (corner & 2) ? h.y : -h.y,
                         (corner & 4) ? h.z : -h.z};
        const Vec3 c = world_to_camera(v.pose.apply(local), cam);
        if (c.z <= 0.1) continue;
        ++in_front;
        const double uu = cam.fx * c.x / c.z + cam.cx;
        const double vv = cam.fy * c.y / c.z + cam.cy;
        u_min = std::min(u_min, uu);
        u_max = std::max(u_max, uu);
        v_min = std::min(v_min, vv);
        v_max = std::max(v_max, vv);
      }
      if (in_front == 0) continue;
      EvaluationUnit unit;
      unit.frame = f;
      unit.track = v.id;
      unit.x0 = std::max(0, int(std::floor(u_min)));
      unit.y0 = std::max(0, int(std::floor(v_min)));
      unit.x1 = std::min(cam.width, int(std::ceil(u_max)));
      unit.y1 = std::min(cam.height, int(std::ceil(v_max)));
      if (unit.x0 >= unit.x1 || unit.y0 >= unit.y1) continue;
      unit.area = double(unit.width()) * double(unit.height());
      if (unit.area < double(min_area)) continue;
      units.push_back(std::move(unit));
    }
  }
  return units;
}

Crop crop_unit(const VideoTensor& video, const EvaluationUnit& unit, int first_frame,
               int crop_size) {
  return crop_from_video(video, unit.frame - first_frame, unit.x0, unit.y0, unit.x1, unit.y1,
                         crop_size);
}

std::vector<double> win_rates_from_probs(const std::vector<std::vector<double>>& p, double tau) {
  const int n = int(p.size());
  if (n < 2) throw std::invalid_argument("win_rates_from_probs: need N >= 2 candidates");
  std::vector<int> wins(std::size_t(n), 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double pij = p[std::size_t(i)][std::size_t(j)];
      if (pij > tau) ++wins[std::size_t(i)];
      if (1.0 - pij > tau) ++wins[std::size_t(j)];
    }
  std::vector<double> rates(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) rates[std::size_t(i)] = double(wins[std::size_t(i)]) / double(n - 1);
  return rates;
}

std::vector<double> unit_win_rates(const std::vector<Crop>& crops, const PairwiseModel& model,
                                   const PreferenceParams& prefs, double tau) {
  const int n = int(crops.size());
  if (n < 2) throw std::invalid_argument("unit_win_rates: need N >= 2 candidates");
  std::vector<std::vector<double>> p(std::size_t(n), std::vector<double>(std::size_t(n), 0.5));
  // Each unordered pair evaluated once; the reverse direction is the exact
  // complement by the model's antisymmetric construction.
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.push_back({i, j});
  const std::int64_t np = std::int64_t(pairs.size());
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::int64_t k = 0; k < np; ++k) {
    const auto [i, j] = pairs[std::size_t(k)];
    p[std::size_t(i)][std::size_t(j)] =
        model.probability(prefs, crops[std::size_t(i)].image, crops[std::size_t(j)].image);
  }
  return win_rates_from_probs(p, tau);
}

std::vector<double> video_rewards(const std::vector<VideoTensor>& candidates,
                                  const std::vector<EvaluationUnit>& units, int first_frame,
                                  const PairwiseModel& model, const PreferenceParams& prefs,
                                  double tau, RewardBreakdown* breakdown) {
  if (units.empty()) throw std::invalid_argument("reward-free condition: no evaluation units");
  const int n = int(candidates.size());
  if (n < 2) throw std::invalid_argument("video_rewards: need N >= 2 candidates");

  std::vector<std::vector<double>> per_unit(units.size());
  const std::int64_t m = std::int64_t(units.size());
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::int64_t ui = 0; ui < m; ++ui) {
    std::vector<Crop> crops(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      crops[std::size_t(i)] = crop_unit(candidates[std::size_t(i)], units[std::size_t(ui)],
                                        first_frame, model.config().crop_size);
    per_unit[std::size_t(ui)] = unit_win_rates(crops, model, prefs, tau);
  }

  std::vector<double> rewards(std::size_t(n), 0.0);
  double weight_sum = 0.0;
  for (std::size_t ui = 0; ui < units.size(); ++ui) {
    const double w = units[ui].area;
    weight_sum += w;
    for (int i = 0; i < n; ++i) rewards[std::size_t(i)] += w * per_unit[ui][std::size_t(i)];
  }
  for (double& r : rewards) r /= weight_sum;
  if (breakdown) {
    breakdown->units = units;
    breakdown->per_unit_rates = std::move(per_unit);
    breakdown->video_rewards = rewards;
  }
  return rewards;
}

double eval_score(const VideoTensor& rl_video, const VideoTensor& sft_video,
                  const std::vector<EvaluationUnit>& units, int first_frame,
                  const PairwiseModel& model, const PreferenceParams& prefs) {
  if (units.empty()) throw std::invalid_argument("eval_score: no evaluation units");
  const std::int64_t m = std::int64_t(units.size());
  std::vector<double> probs(static_cast<std::size_t>(m));
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::int64_t ui = 0; ui < m; ++ui) {
    const Crop rl = crop_unit(rl_video, units[std::size_t(ui)], first_frame,
                              model.config().crop_size);
    const Crop sft = crop_unit(sft_video, units[std::size_t(ui)], first_frame,
                               model.config().crop_size);
    probs[std::size_t(ui)] = model.probability(prefs, rl.image, sft.image);
  }
  double num = 0.0, den = 0.0;
  for (std::size_t ui = 0; ui < units.size(); ++ui) {
    num += units[ui].area * probs[ui];
    den += units[ui].area;
  }
  return num / den;
}

nlohmann::json reward_dump_json(const RewardBreakdown& breakdown) {
  nlohmann::json j;
  j["units"] = nlohmann::json::array();
  for (const auto& u : breakdown.units) {
    nlohmann::json ju;
    ju["frame"] = u.frame;
    ju["track"] = u.track;
    ju["rect"] = {u.x0, u.y0, u.x1, u.y1};
    ju["area"] = u.area;
    j["units"].push_back(std::move(ju));
  }
  j["per_unit_win_rates"] = breakdown.per_unit_rates;
  j["video_rewards"] = breakdown.video_rewards;
  return j;
}

}  // namespace pcflow
