#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pcflow/flowgen.hpp"
#include "pcflow/nn.hpp"

namespace pcflow {

// Fixed-resolution vehicle crop, nearest-neighbor resized and quantized to
// the byte grid (so disk round-trips are lossless).
struct Crop {
  Image image;  // crop_size x crop_size
  std::string source;  // "scene/frame/unit/candidate" breadcrumb, optional
};

Crop crop_from_video(const VideoTensor& video, int frame, int x0, int y0, int x1, int y1,
                     int crop_size);

struct PreferenceConfig {
  int crop_size = 32;
  int embed_dim = 128;

  bool operator==(const PreferenceConfig&) const = default;
  nlohmann::json to_json() const;
  static PreferenceConfig from_json(const nlohmann::json& j);
};

struct PreferenceParams {
  PreferenceConfig config;
  std::string version;
  std::vector<float> values;
};

// Shared-backbone pairwise scorer: embeddings from a small conv extractor,
// logits from an order-sensitive MLP head evaluated in both concat orders,
// combined antisymmetrically. P(I1 > I2) + P(I2 > I1) == 1 by construction.
class PairwiseModel {
 public:
  explicit PairwiseModel(const PreferenceConfig& config);

  const PreferenceConfig& config() const { return config_; }
  int param_count() const;
  PreferenceParams init(std::uint64_t seed) const;

  double probability(const PreferenceParams& params, const Image& a, const Image& b) const;

  // BCE on (pos > neg) labels; accumulates into grad; returns (loss, correct).
  std::pair<double, bool> pair_loss_and_grad(const PreferenceParams& params, const Image& pos,
                                             const Image& neg, double* grad) const;

 private:
  nn::Batch to_batch(const Image& img) const;
  PreferenceConfig config_;
  nn::Sequential extractor_;
  nn::Sequential head_;
  int extractor_params_ = 0;
};

double pairwise_probability_from_logits(double s12, double s21);

// Pointwise Bradley-Terry baseline: independent scalar score in (0,1) per
// crop, preference sigma(r1 - r2).
class PointwiseModel {
 public:
  explicit PointwiseModel(const PreferenceConfig& config);

  const PreferenceConfig& config() const { return config_; }
  int param_count() const;
  PreferenceParams init(std::uint64_t seed) const;

  double score(const PreferenceParams& params, const Image& img) const;
  double probability(const PreferenceParams& params, const Image& a, const Image& b) const;

  std::pair<double, bool> pair_loss_and_grad(const PreferenceParams& params, const Image& pos,
                                             const Image& neg, double* grad, Rng& dropout_rng) const;

 private:
  nn::Batch to_batch(const Image& img) const;
  PreferenceConfig config_;
  nn::Sequential extractor_;
  nn::Sequential head_;
  int extractor_params_ = 0;
};

void save_preference(const PreferenceParams& params, const std::filesystem::path& stem);
PreferenceParams load_preference(const std::filesystem::path& stem, const std::string& expect_version);

enum class DegradeKind : std::uint8_t {
  kMotionBlur,
  kGaussianBlur,
  kGhosting,
  kElastic,
  kUnsharpMask,
};

DegradeKind degrade_kind_from_name(const std::string& name);
std::string degrade_kind_name(DegradeKind kind);

// strength 0 is bit-identity for every kind; internal parameters scale
// monotonically with strength; output clamped and re-quantized.
Image degrade_crop(const Image& crop, DegradeKind kind, double strength, std::uint64_t seed);

// Mean |Laplacian|, the high-frequency-energy probe used by the blur tests.
double high_frequency_energy(const Image& img);

struct PreferencePair {
  Crop pos, neg;
  int k_pos = 0, k_neg = 0;        // subsample provenance
  double s_pos = 0.0, s_neg = 0.0; // augmentation strengths
  DegradeKind kind_pos = DegradeKind::kMotionBlur;
  DegradeKind kind_neg = DegradeKind::kMotionBlur;
};

struct PreferenceDataset {
  std::vector<PreferencePair> pairs;
  std::vector<std::string> skipped_clips;  // log records for unit-free clips
};

struct BuildPrefsConfig {
  std::uint64_t seed = 0;
  std::string camera = "front";
  int sample_steps = 10;
  int splat_radius = 1;
  int crop_size = 32;
  double min_strength_gap = 0.1;
  int min_unit_area = 16;
};

struct SceneBundle {
  Scene scene;
  SceneAssets assets;
};

// Per scene: same-seed rollouts under k in {1,2,4}, ground-truth projected
// vehicle boxes as units, three ordered pairs per unit, then asymmetric
// degradation (strictly stronger on the negative).
PreferenceDataset build_preference_dataset(const std::vector<const SceneBundle*>& scenes,
                                           const GeneratorNet& net, const GeneratorParams& sft,
                                           const BuildPrefsConfig& config);

void save_preference_dataset(const PreferenceDataset& dataset, const std::filesystem::path& dir);
PreferenceDataset load_preference_dataset(const std::filesystem::path& dir);

struct TrainPrefConfig {
  int epochs = 15;
  int batch = 32;
  double lr = 1e-3;
  double weight_decay = 0.05;
  double warmup_fraction = 0.1;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct PrefTrainResult {
  PreferenceParams params;
  std::vector<std::array<double, 3>> curve;  // (epoch, train_acc, holdout_acc)
  double holdout_accuracy = 0.0;
};

PrefTrainResult train_preference(const PreferenceDataset& dataset, const TrainPrefConfig& config);
PrefTrainResult train_pointwise(const PreferenceDataset& dataset, const TrainPrefConfig& config);

}  // namespace pcflow
