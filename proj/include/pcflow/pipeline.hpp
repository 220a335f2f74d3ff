#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pcflow/rl_nft.hpp"

namespace pcflow {

// Config/schema violation; message carries the JSON path of the offending
// field. The CLI maps this to exit status 2.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// One JSON schema shared by every subcommand. Sections omitted from the file
// take the defaults below; `seed` is always required.
struct PipelineConfig {
  std::uint64_t seed = 0;
  int threads = 0;
  std::filesystem::path out_dir = "runs/out";

  struct World {
    int scenes = 2;
    int frames = 17;
    int image_size = 32;
    int vehicles = 2;
    int pedestrians = 1;
    int blocks = 3;
    int lidar_azimuths = 180;
    int lidar_elevations = 20;
    bool ground = true;
  } world;

  struct Assets {
    int completion_points = 8192;
    int deformable_window = 2;
  } assets;

  struct Render {
    std::string camera = "front";
    int splat_radius = 1;
  } render;

  GeneratorConfig generator;

  struct Sft {
    int steps = 400;
    int batch = 2;
    double lr = 1e-3;
    int val_every = 50;
    int clips_per_scene = 3;
    double holdout_fraction = 0.2;  // held-out clips for the correlation check
  } sft;

  struct Prefs {
    int sample_steps = 10;
    double min_strength_gap = 0.1;
  } prefs;

  struct Reward {
    double tau = 0.85;
    int min_unit_area = 16;
  } reward;

  struct TrainReward {
    int epochs = 15;
    int batch = 32;
    double lr = 1e-3;
    double weight_decay = 0.05;
    double warmup_fraction = 0.1;
    double holdout_fraction = 0.2;
    bool pointwise = true;
  } train_reward;

  struct Rl {
    int steps = 40;
    int group_size = 16;
    double beta = 1.0;
    double ema_alpha = 0.9;
    double lr = 1e-4;
    int eval_every = 5;
    int sample_steps = 10;
    int conditions = 20;
    std::vector<std::string> families{"spin", "turn_left", "turn_right", "rollover", "ego_shift",
                                      "speed2x"};
  } rl;

  nlohmann::json resolved() const;
  static PipelineConfig load(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides);
  static PipelineConfig from_json(const nlohmann::json& j);
};

// Subcommand bodies. Each is deterministic given the config seed and leaves
// its artifacts under config.out_dir.
void run_synth(const PipelineConfig& config);
void run_aggregate(const PipelineConfig& config, bool complete);
void run_render(const PipelineConfig& config, const std::filesystem::path& scene_dir,
                const std::filesystem::path& edit_file, const std::filesystem::path& out,
                int first_frame, int clip_length);
void run_train_sft(const PipelineConfig& config);
void run_build_prefs(const PipelineConfig& config);
void run_train_reward(const PipelineConfig& config);
void run_rl_train(const PipelineConfig& config);
void run_eval(const PipelineConfig& config, const std::filesystem::path& ckpt_a,
              const std::filesystem::path& ckpt_b, const std::filesystem::path& out_csv);
void run_demo(const PipelineConfig& config);

// Shared helpers (used by the acceptance suite as well).
std::filesystem::path scene_dir(const PipelineConfig& config, int index);
EditSpec family_edit(const std::string& family, const Scene& scene, int clip_length);
std::vector<OODCondition> build_ood_conditions(const PipelineConfig& config,
                                               std::vector<SceneBundle>& bundles_out);
std::vector<SftItem> build_sft_dataset(const PipelineConfig& config,
                                       std::vector<SceneBundle>& bundles_out);

}  // namespace pcflow
