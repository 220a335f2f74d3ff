#pragma once

#include <string>
#include <vector>

#include "pcflow/editing.hpp"
#include "pcflow/preference.hpp"

namespace pcflow {

// One (frame, 2D box) region compared identically across candidates.
struct EvaluationUnit {
  int frame = 0;             // scene frame index
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // pixel rect, x1/y1 exclusive
  double area = 0.0;         // (x1-x0)*(y1-y0)
  std::string track;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

constexpr int kMinUnitArea = 16;
constexpr double kDefaultWinTau = 0.85;

// Ground-truth projected vehicle boxes under the edit plan: axis-aligned
// hull of the 8 box corners in the (possibly ego-edited) camera, clipped to
// the raster, area >= min_area. Ordering: frame, then track id.
std::vector<EvaluationUnit> extract_units(const Scene& scene, const EditPlan& plan,
                                          const std::string& camera, int first_frame,
                                          int clip_length, int min_area = kMinUnitArea);

Crop crop_unit(const VideoTensor& video, const EvaluationUnit& unit, int first_frame,
               int crop_size);

// Eq-style win rates from an upper-triangular probability table
// (p[i][j] = P(i beats j) for j > i): a pair is scored once, candidate i wins
// iff p > tau, j wins iff 1-p > tau; R_i = wins_i / (N-1).
std::vector<double> win_rates_from_probs(const std::vector<std::vector<double>>& p, double tau);

// N crops of one unit -> per-candidate win rates via the pairwise model.
std::vector<double> unit_win_rates(const std::vector<Crop>& crops, const PairwiseModel& model,
                                   const PreferenceParams& prefs, double tau = kDefaultWinTau);

struct RewardBreakdown {
  std::vector<EvaluationUnit> units;
  std::vector<std::vector<double>> per_unit_rates;  // [unit][candidate]
  std::vector<double> video_rewards;                // [candidate]
};

// Area-weighted mean of per-unit win rates. Throws "reward-free condition"
// when units is empty.
std::vector<double> video_rewards(const std::vector<VideoTensor>& candidates,
                                  const std::vector<EvaluationUnit>& units, int first_frame,
                                  const PairwiseModel& model, const PreferenceParams& prefs,
                                  double tau = kDefaultWinTau, RewardBreakdown* breakdown = nullptr);

// Fixed-seed paired evaluation: area-weighted mean of P(rl > sft) per unit.
double eval_score(const VideoTensor& rl_video, const VideoTensor& sft_video,
                  const std::vector<EvaluationUnit>& units, int first_frame,
                  const PairwiseModel& model, const PreferenceParams& prefs);

nlohmann::json reward_dump_json(const RewardBreakdown& breakdown);

}  // namespace pcflow
