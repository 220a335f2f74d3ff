#pragma once

#include <filesystem>
#include <vector>

#include "pcflow/flowgen.hpp"
#include "pcflow/reward.hpp"

namespace pcflow {

// One OOD condition: an edited clip of a scene plus its evaluation units
// (ground-truth boxes under the same edit).
struct OODCondition {
  std::string name;
  ConditionSequence cond;
  std::vector<EvaluationUnit> units;
  int first_frame = 0;
};

struct PolicyPair {
  GeneratorParams current;
  GeneratorParams reference;
  double ema_alpha = 0.9;
  double beta = 1.0;
};

// Candidate i = sample_video(reference, cond, base_seed + i).
std::vector<VideoTensor> rollout_group(const GeneratorNet& net, const GeneratorParams& reference,
                                       const ConditionSequence& cond, int n,
                                       std::uint64_t base_seed, int sample_steps);

struct NftSample {
  const VideoTensor* x0 = nullptr;
  const ConditionSequence* cond = nullptr;
  double reward = 0.0;
};

// Contrastive velocity objective: per sample
//   r * ||v_cur - v||^2 + (1 - r) * ||v_neg - v||^2,
// v_neg = v_ref + beta * (v_ref - v_cur), no gradient through the reference.
// t ~ U(0.05, 0.95) and noise come from `stream`.
LossAndGrad nft_loss_and_grad(const GeneratorNet& net, const GeneratorParams& current,
                              const GeneratorParams& reference,
                              const std::vector<NftSample>& samples, double beta, Rng& stream);

// reference' = alpha * reference + (1 - alpha) * current, elementwise.
void ema_update(GeneratorParams& reference, const GeneratorParams& current, double alpha);

struct RlConfig {
  int steps = 300;
  int group_size = 16;  // N
  double beta = 1.0;
  double ema_alpha = 0.9;
  double lr = 1e-4;
  double tau = kDefaultWinTau;
  int eval_every = 5;
  int sample_steps = 10;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 0;  // fixed seed shared by both policies at eval
  bool dump_rewards = true;
};

struct RlResult {
  GeneratorParams params;
  // One row per evaluation: step, per-condition E..., overall E.
  std::vector<std::vector<double>> eval_rows;
  std::vector<std::string> dropped_conditions;
};

// Group rollouts from the EMA reference, pairwise rewards, contrastive
// update, periodic fixed-seed evaluation against the frozen SFT baseline.
// Deterministic in config.seed.
RlResult rl_train(const GeneratorNet& net, const GeneratorParams& sft,
                  const std::vector<OODCondition>& conditions, const PairwiseModel& pref_model,
                  const PreferenceParams& prefs, const RlConfig& config,
                  const std::filesystem::path& out_dir);

void write_eval_csv(const std::filesystem::path& path, const std::vector<OODCondition>& conditions,
                    const std::vector<std::vector<double>>& rows);

}  // namespace pcflow
