#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pcflow/nn.hpp"
#include "pcflow/renderer.hpp"

namespace pcflow {

// (T, H, W, 3) float32 sample in [0,1].
struct VideoTensor {
  int t = 0, h = 0, w = 0;
  std::vector<float> v;  // THWC

  VideoTensor() = default;
  VideoTensor(int t_, int h_, int w_)
      : t(t_), h(h_), w(w_), v(std::size_t(t_) * std::size_t(h_) * std::size_t(w_) * 3, 0.0f) {}

  float& at(int f, int y, int x, int c) {
    return v[((std::size_t(f) * std::size_t(h) + std::size_t(y)) * std::size_t(w) +
              std::size_t(x)) *
                 3 +
             std::size_t(c)];
  }
  float at(int f, int y, int x, int c) const {
    return v[((std::size_t(f) * std::size_t(h) + std::size_t(y)) * std::size_t(w) +
              std::size_t(x)) *
                 3 +
             std::size_t(c)];
  }
  bool operator==(const VideoTensor&) const = default;
};

// Stacks a scene clip's recorded reference images into the ground-truth video.
VideoTensor ground_truth_video(const Scene& scene, const std::string& camera, int first_frame,
                               int length);

struct GeneratorConfig {
  int frames = 9;
  int height = 32, width = 32;
  int base_width = 16;
  int mid_width = 32;

  void validate() const;  // even height/width, positive sizes
  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
  bool operator==(const GeneratorConfig&) const = default;
};

// Velocity network: per-frame convolutional encoder-decoder over the
// channel stack (video 3 + pseudo-image 3 + broadcast reference 3 + time 1).
// Final layer zero-initialized so the untrained net is the zero map.
struct GeneratorParams {
  GeneratorConfig config;
  std::string version = "gen-v1";
  std::vector<float> values;
};

class GeneratorNet {
 public:
  explicit GeneratorNet(const GeneratorConfig& config);

  const GeneratorConfig& config() const { return config_; }
  int param_count() const { return net_.param_count(); }
  GeneratorParams init(std::uint64_t seed) const;

  // Batch layout (T, 3, H, W) <-> VideoTensor (T, H, W, 3).
  nn::Batch video_to_batch(const VideoTensor& video) const;
  VideoTensor batch_to_video(const nn::Batch& batch, bool clamp) const;

  nn::Batch assemble_input(const nn::Batch& x_t, double t, const ConditionSequence& cond) const;

  // v_pred = net(x_t, t, cond). Deterministic; throws on shape mismatch.
  nn::Batch forward(const GeneratorParams& params, const nn::Batch& x_t, double t,
                    const ConditionSequence& cond) const;

  // Forward keeping traces; backward seeds d(loss)/d(v_pred).
  nn::Batch forward_trace(const GeneratorParams& params, const nn::Batch& x_t, double t,
                          const ConditionSequence& cond, nn::Sequential::Trace& trace) const;
  void backward(const GeneratorParams& params, const nn::Sequential::Trace& trace,
                const nn::Batch& grad_v, double* grad_params) const;

 private:
  GeneratorConfig config_;
  nn::Sequential net_;
};

// One flow-matching training tuple. x_t = (1-t)*noise + t*x1, v = x1 - noise.
struct FlowBatchItem {
  const ConditionSequence* cond = nullptr;
  const VideoTensor* x1 = nullptr;
  double t = 0.5;
  nn::Batch noise;
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean over items of ||v_pred - v||^2 (sum over components per item).
LossAndGrad fm_loss_and_grad(const GeneratorNet& net, const GeneratorParams& params,
                             const std::vector<FlowBatchItem>& batch);

nn::Batch draw_noise(const GeneratorConfig& config, Rng& rng);

// Euler integration of the learned velocity field over a uniform grid,
// starting from seed-derived Gaussian noise; clamped to [0,1] only at the
// end. Bit-deterministic in (params, cond, seed, steps).
VideoTensor sample_video(const GeneratorNet& net, const GeneratorParams& params,
                         const ConditionSequence& cond, std::uint64_t seed, int steps = 20);

namespace detail {
// Unclamped double-precision integration state, for the transport tests.
nn::Batch euler_integrate(const GeneratorNet& net, const GeneratorParams& params,
                          const ConditionSequence& cond, std::uint64_t seed, int steps);
}  // namespace detail

// Checkpoints: <stem>.json descriptor + <stem>.f32 little-endian parameter blob.
void save_generator(const GeneratorParams& params, const std::filesystem::path& stem);
GeneratorParams load_generator(const std::filesystem::path& stem);

struct SftItem {
  ConditionSequence cond;
  VideoTensor target;
};

struct SftConfig {
  int steps = 2000;
  int batch = 2;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int val_every = 100;
  double val_fraction = 0.15;
  double t_min = 0.05, t_max = 0.95;
  // Condition augmentation (matches the paper-side masking recipe).
  bool augment = true;
  double depth_edge_threshold = 1.0;
  int depth_edge_dilate = 1;
  int block_count = 2;
};

struct SftResult {
  GeneratorParams params;
  std::vector<std::array<double, 3>> curve;  // (step, train_loss, val_loss or -1)
  double val_loss_first = 0.0, val_loss_last = 0.0;
};

// Adam on fm_loss over minibatches with subsample/mask augmentation.
// Deterministic in config.seed. Throws on an empty dataset.
SftResult sft_train(const GeneratorNet& net, const std::vector<SftItem>& dataset,
                    const SftConfig& config);

void write_curve_csv(const std::filesystem::path& path,
                     const std::vector<std::array<double, 3>>& curve,
                     const std::string& header);

}  // namespace pcflow
