#include "pcflow/flowgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "pcflow/scene_io.hpp"

namespace pcflow {

using nlohmann::json;

VideoTensor ground_truth_video(const Scene& scene, const std::string& camera, int first_frame,
                               int length) {
  if (first_frame < 0 || first_frame + length > scene.frame_count() || length <= 0)
    throw std::invalid_argument("ground_truth_video: clip out of range");
  const Image& probe = scene.frames[std::size_t(first_frame)].reference_images.at(camera);
  VideoTensor video(length, probe.height, probe.width);
  for (int f = 0; f < length; ++f) {
    const Image& img = scene.frames[std::size_t(first_frame + f)].reference_images.at(camera);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const float* px = img.pixel(x, y);
        for (int c = 0; c < 3; ++c) video.at(f, y, x, c) = px[std::size_t(c)];
      }
  }
  return video;
}

void GeneratorConfig::validate() const {
  if (frames < 1 || height < 4 || width < 4) throw std::invalid_argument("generator: bad shape");
  if (height % 2 != 0 || width % 2 != 0)
    throw std::invalid_argument("generator: height/width must be even");
  if (base_width < 1 || mid_width < 1) throw std::invalid_argument("generator: bad widths");
}

json GeneratorConfig::to_json() const {
  json j;
  j["frames"] = frames;
  j["height"] = height;
  j["width"] = width;
  j["base_width"] = base_width;
  j["mid_width"] = mid_width;
  return j;
}

GeneratorConfig GeneratorConfig::from_json(const json& j) {
  GeneratorConfig c;
  c.frames = j.at("frames").get<int>();
  c.height = j.at("height").get<int>();
  c.width = j.at("width").get<int>();
  c.base_width = j.at("base_width").get<int>();
  c.mid_width = j.at("mid_width").get<int>();
  c.validate();
  return c;
}

namespace {
constexpr int kInputChannels = 10;  // video 3 + condition 3 + reference 3 + time 1
}

GeneratorNet::GeneratorNet(const GeneratorConfig& config) : config_(config) {
  config.validate();
  net_.add(nn::conv2d(config.base_width, 3, 1, 1));
  net_.add(nn::silu());
  net_.add(nn::conv2d(config.mid_width, 3, 2, 1));
  net_.add(nn::silu());
  net_.add(nn::conv2d(config.mid_width, 3, 1, 1));
  net_.add(nn::silu());
  net_.add(nn::upsample2x());
  net_.add(nn::conv2d(config.base_width, 3, 1, 1));
  net_.add(nn::silu());
  net_.add(nn::conv2d(3, 3, 1, 1, /*zero_init=*/true));
  net_.finalize({kInputChannels, config.height, config.width});
  if (net_.param_count() > 300000)
    throw std::invalid_argument("generator: parameter budget exceeded");
}

GeneratorParams GeneratorNet::init(std::uint64_t seed) const {
  GeneratorParams p;
  p.config = config_;
  p.values.resize(std::size_t(net_.param_count()));
  Rng rng = Rng(seed).fork("generator-init");
  net_.init_params(p.values, rng);
  return p;
}

nn::Batch GeneratorNet::video_to_batch(const VideoTensor& video) const {
  if (video.t != config_.frames || video.h != config_.height || video.w != config_.width)
    throw std::invalid_argument("video_to_batch: shape mismatch");
  nn::Batch b(video.t, {3, video.h, video.w});
  for (int f = 0; f < video.t; ++f) {
    double* dst = b.sample(f);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < video.h; ++y)
        for (int x = 0; x < video.w; ++x)
          dst[(std::size_t(c) * std::size_t(video.h) + std::size_t(y)) * std::size_t(video.w) +
              std::size_t(x)] = double(video.at(f, y, x, c));
  }
  return b;
}

VideoTensor GeneratorNet::batch_to_video(const nn::Batch& batch, bool clamp) const {
  VideoTensor video(batch.n, batch.shape.h, batch.shape.w);
  for (int f = 0; f < batch.n; ++f) {
    const double* src = batch.sample(f);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < video.h; ++y)
        for (int x = 0; x < video.w; ++x) {
          double v = src[(std::size_t(c) * std::size_t(video.h) + std::size_t(y)) *
                             std::size_t(video.w) +
                         std::size_t(x)];
          if (clamp) v = std::min(1.0, std::max(0.0, v));
          video.at(f, y, x, c) = float(v);
        }
  }
  return video;
}

nn::Batch GeneratorNet::assemble_input(const nn::Batch& x_t, double t,
                                       const ConditionSequence& cond) const {
  const int T = config_.frames, H = config_.height, W = config_.width;
  if (x_t.n != T || !(x_t.shape == nn::Shape{3, H, W}))
    throw std::invalid_argument("generator: x_t shape mismatch");
  if (cond.length() != T || cond.reference.height != H || cond.reference.width != W)
    throw std::invalid_argument("generator: condition shape mismatch");
  nn::Batch in(T, {kInputChannels, H, W});
  const std::size_t plane = std::size_t(H) * std::size_t(W);
  for (int f = 0; f < T; ++f) {
    double* dst = in.sample(f);
    const double* x = x_t.sample(f);
    std::copy(x, x + 3 * plane, dst);
    const Image& ci = cond.frames[std::size_t(f)].color;
    for (int y = 0; y < H; ++y)
      for (int x2 = 0; x2 < W; ++x2) {
        const float* px = ci.pixel(x2, y);
        const float* rf = cond.reference.pixel(x2, y);
        const std::size_t at = std::size_t(y) * std::size_t(W) + std::size_t(x2);
        for (int c = 0; c < 3; ++c) {
          dst[(std::size_t(3 + c)) * plane + at] = double(px[std::size_t(c)]);
          dst[(std::size_t(6 + c)) * plane + at] = double(rf[std::size_t(c)]);
        }
        dst[9 * plane + at] = t;
      }
  }
  return in;
}

nn::Batch GeneratorNet::forward(const GeneratorParams& params, const nn::Batch& x_t, double t,
                                const ConditionSequence& cond) const {
  if (!(params.config == config_) || params.values.size() != std::size_t(net_.param_count()))
    throw std::invalid_argument("generator: params do not match architecture");
  return net_.forward(assemble_input(x_t, t, cond), params.values.data());
}

nn::Batch GeneratorNet::forward_trace(const GeneratorParams& params, const nn::Batch& x_t,
                                      double t, const ConditionSequence& cond,
                                      nn::Sequential::Trace& trace) const {
  if (!(params.config == config_) || params.values.size() != std::size_t(net_.param_count()))
    throw std::invalid_argument("generator: params do not match architecture");
  return net_.forward_trace(assemble_input(x_t, t, cond), params.values.data(), trace, nullptr);
}

void GeneratorNet::backward(const GeneratorParams& params, const nn::Sequential::Trace& trace,
                            const nn::Batch& grad_v, double* grad_params) const {
  net_.backward(trace, grad_v, params.values.data(), grad_params);
}

nn::Batch draw_noise(const GeneratorConfig& config, Rng& rng) {
  nn::Batch noise(config.frames, {3, config.height, config.width});
  for (double& v : noise.v) v = rng.normal();
  return noise;
}

LossAndGrad fm_loss_and_grad(const GeneratorNet& net, const GeneratorParams& params,
                             const std::vector<FlowBatchItem>& batch) {
  if (batch.empty()) throw std::invalid_argument("fm_loss_and_grad: empty batch");
  LossAndGrad out;
  out.grad.assign(params.values.size(), 0.0);
  const double inv_b = 1.0 / double(batch.size());
  for (const FlowBatchItem& item : batch) {
    if (!(item.t > 0.0 && item.t < 1.0))
      throw std::invalid_argument("fm_loss_and_grad: t must be strictly interior");
    const nn::Batch x1 = net.video_to_batch(*item.x1);
    if (item.noise.v.size() != x1.v.size())
      throw std::invalid_argument("fm_loss_and_grad: noise shape mismatch");
    nn::Batch x_t(x1.n, x1.shape);
    for (std::size_t i = 0; i < x1.v.size(); ++i)
      x_t.v[i] = (1.0 - item.t) * item.noise.v[i] + item.t * x1.v[i];

    nn::Sequential::Trace trace;
    nn::Batch v_pred = net.forward_trace(params, x_t, item.t, *item.cond, trace);
    for (double v : v_pred.v)
      if (!std::isfinite(v)) throw std::runtime_error("fm_loss_and_grad: non-finite prediction");

    nn::Batch seed(v_pred.n, v_pred.shape);
    double item_loss = 0.0;
    for (std::size_t i = 0; i < v_pred.v.size(); ++i) {
      const double target = x1.v[i] - item.noise.v[i];
      const double d = v_pred.v[i] - target;
      item_loss += d * d;
      seed.v[i] = 2.0 * d * inv_b;
    }
    out.loss += item_loss * inv_b;
    net.backward(params, trace, seed, out.grad.data());
  }
  return out;
}

namespace detail {

nn::Batch euler_integrate(const GeneratorNet& net, const GeneratorParams& params,
                          const ConditionSequence& cond, std::uint64_t seed, int steps) {
  if (steps < 1) throw std::invalid_argument("sample_video: steps must be >= 1");
  Rng rng = Rng(seed).fork("sample-noise");
  nn::Batch x = draw_noise(params.config, rng);
  const double dt = 1.0 / double(steps);
  for (int s = 0; s < steps; ++s) {
    const double t = double(s) / double(steps);
    const nn::Batch v = net.forward(params, x, t, cond);
    for (std::size_t i = 0; i < x.v.size(); ++i) x.v[i] += dt * v.v[i];
  }
  return x;
}

}  // namespace detail

VideoTensor sample_video(const GeneratorNet& net, const GeneratorParams& params,
                         const ConditionSequence& cond, std::uint64_t seed, int steps) {
  return net.batch_to_video(detail::euler_integrate(net, params, cond, seed, steps), true);
}

void save_generator(const GeneratorParams& params, const std::filesystem::path& stem) {
  json j;
  j["kind"] = "generator";
  j["version"] = params.version;
  j["config"] = params.config.to_json();
  j["param_count"] = params.values.size();
  j["blob"] = stem.filename().string() + ".f32";
  std::filesystem::create_directories(stem.parent_path().empty() ? "." : stem.parent_path());
  std::ofstream out(stem.string() + ".json");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write checkpoint: " + stem.string() + ".json");
  write_f32_blob(stem.string() + ".f32", params.values.data(), params.values.size());
}

GeneratorParams load_generator(const std::filesystem::path& stem) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw std::runtime_error("missing checkpoint: " + stem.string() + ".json");
  json j = json::parse(in);
  GeneratorParams p;
  p.version = j.at("version").get<std::string>();
  p.config = GeneratorConfig::from_json(j.at("config"));
  const std::size_t n = j.at("param_count").get<std::size_t>();
  p.values = read_f32_blob(stem.string() + ".f32", n, "checkpoint " + stem.string());
  return p;
}

SftResult sft_train(const GeneratorNet& net, const std::vector<SftItem>& dataset,
                    const SftConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("sft_train: empty dataset");
  Rng master = Rng(config.seed).fork("sft");

  // Train/validation split.
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0u);
  Rng split_rng = master.fork("split");
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[std::size_t(split_rng.below(std::uint32_t(i)))]);
  std::size_t val_n = std::size_t(std::floor(config.val_fraction * double(dataset.size())));
  if (dataset.size() > 1 && val_n == 0) val_n = 1;
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + std::ptrdiff_t(val_n));
  std::vector<std::size_t> train_idx(order.begin() + std::ptrdiff_t(val_n), order.end());
  if (train_idx.empty()) train_idx = order;  // tiny datasets train on everything

  // Frozen validation draws: one (t, noise) per val item, for a
  // low-variance loss that is comparable across evaluations.
  Rng val_rng = master.fork("val");
  std::vector<FlowBatchItem> val_batch;
  for (std::size_t vi : val_idx) {
    FlowBatchItem item;
    item.cond = &dataset[vi].cond;
    item.x1 = &dataset[vi].target;
    item.t = val_rng.uniform(config.t_min, config.t_max);
    item.noise = draw_noise(net.config(), val_rng);
    val_batch.push_back(std::move(item));
  }

  GeneratorParams params = net.init(master.fork("init").next_u64());
  nn::AdamConfig adam_config;
  adam_config.lr = config.lr;
  nn::Adam adam(params.values.size(), adam_config);

  Rng step_rng = master.fork("steps");
  SftResult result;
  auto eval_val = [&]() -> double {
    if (val_batch.empty()) return -1.0;
    // Loss only: reuse fm path on a params copy without applying gradients.
    double loss = 0.0;
    for (const FlowBatchItem& item : val_batch) {
      const nn::Batch x1 = net.video_to_batch(*item.x1);
      nn::Batch x_t(x1.n, x1.shape);
      for (std::size_t i = 0; i < x1.v.size(); ++i)
        x_t.v[i] = (1.0 - item.t) * item.noise.v[i] + item.t * x1.v[i];
      const nn::Batch v_pred = net.forward(params, x_t, item.t, *item.cond);
      double item_loss = 0.0;
      for (std::size_t i = 0; i < v_pred.v.size(); ++i) {
        const double d = v_pred.v[i] - (x1.v[i] - item.noise.v[i]);
        item_loss += d * d;
      }
      loss += item_loss;
    }
    return loss / double(val_batch.size());
  };

  result.val_loss_first = eval_val();
  const int subsample_choices[3] = {1, 2, 4};
  std::vector<ConditionSequence> aug_storage;  // owns augmented conditions per step

  for (int step = 0; step < config.steps; ++step) {
    Rng rng = step_rng.fork(std::uint64_t(step));
    std::vector<FlowBatchItem> batch;
    aug_storage.clear();
    aug_storage.reserve(std::size_t(config.batch));
    for (int b = 0; b < config.batch; ++b) {
      const std::size_t di = train_idx[rng.below(std::uint32_t(train_idx.size()))];
      const SftItem& item = dataset[di];
      ConditionSequence cond = item.cond;
      if (config.augment) {
        const int k = subsample_choices[rng.below(3)];
        cond = subsample_conditions(cond, k);
        MaskParams edge;
        edge.kind = MaskKind::kDepthEdge;
        edge.depth_threshold = config.depth_edge_threshold;
        edge.dilate = config.depth_edge_dilate;
        MaskParams block;
        block.kind = MaskKind::kBlock;
        block.block_count = config.block_count;
        for (auto& frame : cond.frames) {
          frame = mask_augment(frame, edge, rng.next_u64());
          frame = mask_augment(frame, block, rng.next_u64());
        }
      }
      aug_storage.push_back(std::move(cond));
      FlowBatchItem fb;
      fb.cond = &aug_storage.back();
      fb.x1 = &item.target;
      fb.t = rng.uniform(config.t_min, config.t_max);
      fb.noise = draw_noise(net.config(), rng);
      batch.push_back(std::move(fb));
    }
    const LossAndGrad lg = fm_loss_and_grad(net, params, batch);
    if (!std::isfinite(lg.loss)) throw std::runtime_error("sft_train: non-finite loss");
    adam.step(params.values, lg.grad);

    if (step % config.val_every == 0 || step + 1 == config.steps) {
      const double vl = eval_val();
      result.curve.push_back({double(step), lg.loss, vl});
    } else {
      result.curve.push_back({double(step), lg.loss, -1.0});
    }
  }
  result.val_loss_last = eval_val();
  result.params = std::move(params);
  return result;
}

void write_curve_csv(const std::filesystem::path& path,
                     const std::vector<std::array<double, 3>>& curve, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv: " + path.string());
  out << header << "\n";
  char buf[128];
  for (const auto& row : curve) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", row[0], row[1], row[2]);
    out << buf;
  }
}

}  // namespace pcflow
