#include "pcflow/preference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "pcflow/reward.hpp"

namespace pcflow {

using nlohmann::json;

Crop crop_from_video(const VideoTensor& video, int frame, int x0, int y0, int x1, int y1,
                     int crop_size) {
  if (frame < 0 || frame >= video.t || x0 >= x1 || y0 >= y1)
    throw std::invalid_argument("crop_from_video: bad rect");
  Crop crop;
  crop.image = Image(crop_size, crop_size);
  const int w = x1 - x0, h = y1 - y0;
  for (int y = 0; y < crop_size; ++y) {
    const int sy = y0 + (y * h) / crop_size;  // nearest-neighbor
    for (int x = 0; x < crop_size; ++x) {
      const int sx = x0 + (x * w) / crop_size;
      float* dst = crop.image.pixel(x, y);
      for (int c = 0; c < 3; ++c) dst[std::size_t(c)] = quantize_byte(video.at(frame, sy, sx, c));
    }
  }
  return crop;
}

json PreferenceConfig::to_json() const {
  json j;
  j["crop_size"] = crop_size;
  j["embed_dim"] = embed_dim;
  return j;
}

PreferenceConfig PreferenceConfig::from_json(const json& j) {
  PreferenceConfig c;
  c.crop_size = j.at("crop_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  return c;
}

namespace {

nn::Sequential build_extractor(const PreferenceConfig& config) {
  nn::Sequential net;
  net.add(nn::conv2d(16, 3, 2, 1));
  net.add(nn::silu());
  net.add(nn::conv2d(32, 3, 2, 1));
  net.add(nn::silu());
  net.add(nn::conv2d(64, 3, 2, 1));
  net.add(nn::silu());
  net.add(nn::linear(config.embed_dim));
  net.finalize({3, config.crop_size, config.crop_size});
  return net;
}

nn::Batch image_to_batch_row(const Image& img) {
  nn::Batch b(1, {3, img.height, img.width});
  double* dst = b.sample(0);
  const std::size_t plane = std::size_t(img.height) * std::size_t(img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float* px = img.pixel(x, y);
      const std::size_t at = std::size_t(y) * std::size_t(img.width) + std::size_t(x);
      for (int c = 0; c < 3; ++c) dst[std::size_t(c) * plane + at] = double(px[std::size_t(c)]);
    }
  return b;
}

nn::Batch images_to_batch(const Image& a, const Image& b) {
  nn::Batch ba = image_to_batch_row(a);
  nn::Batch out(2, ba.shape);
  std::copy(ba.v.begin(), ba.v.end(), out.sample(0));
  nn::Batch bb = image_to_batch_row(b);
  std::copy(bb.v.begin(), bb.v.end(), out.sample(1));
  return out;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double pairwise_probability_from_logits(double s12, double s21) {
  return sigmoid_d((s12 - s21) * 0.5);
}

PairwiseModel::PairwiseModel(const PreferenceConfig& config) : config_(config) {
  extractor_ = build_extractor(config);
  extractor_params_ = extractor_.param_count();
  head_.add(nn::linear(256));
  head_.add(nn::gelu());
  head_.add(nn::linear(64));
  head_.add(nn::gelu());
  head_.add(nn::linear(1));
  head_.finalize({2 * config.embed_dim, 1, 1});
}

int PairwiseModel::param_count() const { return extractor_params_ + head_.param_count(); }

PreferenceParams PairwiseModel::init(std::uint64_t seed) const {
  PreferenceParams p;
  p.config = config_;
  p.version = "pairwise-v1";
  p.values.resize(std::size_t(param_count()));
  Rng rng = Rng(seed).fork("pairwise-init");
  extractor_.init_params(std::span<float>(p.values.data(), std::size_t(extractor_params_)), rng);
  head_.init_params(std::span<float>(p.values.data() + extractor_params_,
                                     std::size_t(head_.param_count())),
                    rng);
  return p;
}

nn::Batch PairwiseModel::to_batch(const Image& img) const { return image_to_batch_row(img); }

double PairwiseModel::probability(const PreferenceParams& params, const Image& a,
                                  const Image& b) const {
  if (a.width != config_.crop_size || a.height != config_.crop_size ||
      b.width != config_.crop_size || b.height != config_.crop_size)
    throw std::invalid_argument("pairwise_probability: crop resolution mismatch");
  if (params.values.size() != std::size_t(param_count()))
    throw std::invalid_argument("pairwise_probability: bad parameter vector");
  const nn::Batch z = extractor_.forward(images_to_batch(a, b), params.values.data());
  const int d = config_.embed_dim;
  nn::Batch pairs(2, {2 * d, 1, 1});
  for (int i = 0; i < d; ++i) {
    pairs.sample(0)[i] = z.sample(0)[i];
    pairs.sample(0)[d + i] = z.sample(1)[i];
    pairs.sample(1)[i] = z.sample(1)[i];
    pairs.sample(1)[d + i] = z.sample(0)[i];
  }
  const nn::Batch s = head_.forward(pairs, params.values.data() + extractor_params_);
  return pairwise_probability_from_logits(s.sample(0)[0], s.sample(1)[0]);
}

std::pair<double, bool> PairwiseModel::pair_loss_and_grad(const PreferenceParams& params,
                                                          const Image& pos, const Image& neg,
                                                          double* grad) const {
  nn::Sequential::Trace etrace, htrace;
  const nn::Batch z =
      extractor_.forward_trace(images_to_batch(pos, neg), params.values.data(), etrace, nullptr);
  const int d = config_.embed_dim;
  nn::Batch pairs(2, {2 * d, 1, 1});
  for (int i = 0; i < d; ++i) {
    pairs.sample(0)[i] = z.sample(0)[i];
    pairs.sample(0)[d + i] = z.sample(1)[i];
    pairs.sample(1)[i] = z.sample(1)[i];
    pairs.sample(1)[d + i] = z.sample(0)[i];
  }
  const nn::Batch s =
      head_.forward_trace(pairs, params.values.data() + extractor_params_, htrace, nullptr);
  const double logit = (s.sample(0)[0] - s.sample(1)[0]) * 0.5;
  const double loss = softplus(-logit);
  const bool correct = logit > 0.0;

  const double dlogit = sigmoid_d(logit) - 1.0;  // d(-log sigma(L))/dL
  nn::Batch gs(2, {1, 1, 1});
  gs.sample(0)[0] = 0.5 * dlogit;
  gs.sample(1)[0] = -0.5 * dlogit;
  const nn::Batch gpairs = head_.backward(htrace, gs, params.values.data() + extractor_params_,
                                          grad + extractor_params_);
  nn::Batch gz(2, {d, 1, 1});
  for (int i = 0; i < d; ++i) {
    gz.sample(0)[i] = gpairs.sample(0)[i] + gpairs.sample(1)[d + i];
    gz.sample(1)[i] = gpairs.sample(0)[d + i] + gpairs.sample(1)[i];
  }
  extractor_.backward(etrace, gz, params.values.data(), grad);
  return {loss, correct};
}

PointwiseModel::PointwiseModel(const PreferenceConfig& config) : config_(config) {
  extractor_ = build_extractor(config);
  extractor_params_ = extractor_.param_count();
  head_.add(nn::linear(256));
  head_.add(nn::layer_norm());
  head_.add(nn::gelu());
  head_.add(nn::dropout(0.1));
  head_.add(nn::linear(64));
  head_.add(nn::layer_norm());
  head_.add(nn::gelu());
  head_.add(nn::linear(1));
  head_.add(nn::sigmoid());
  head_.finalize({config.embed_dim, 1, 1});
}

int PointwiseModel::param_count() const { return extractor_params_ + head_.param_count(); }

PreferenceParams PointwiseModel::init(std::uint64_t seed) const {
  PreferenceParams p;
  p.config = config_;
  p.version = "pointwise-v1";
  p.values.resize(std::size_t(param_count()));
  Rng rng = Rng(seed).fork("pointwise-init");
  extractor_.init_params(std::span<float>(p.values.data(), std::size_t(extractor_params_)), rng);
  head_.init_params(std::span<float>(p.values.data() + extractor_params_,
                                     std::size_t(head_.param_count())),
                    rng);
  return p;
}

nn::Batch PointwiseModel::to_batch(const Image& img) const { return image_to_batch_row(img); }

double PointwiseModel::score(const PreferenceParams& params, const Image& img) const {
  if (img.width != config_.crop_size || img.height != config_.crop_size)
    throw std::invalid_argument("pointwise_score: crop resolution mismatch");
  if (params.values.size() != std::size_t(param_count()))
    throw std::invalid_argument("pointwise_score: bad parameter vector");
  const nn::Batch z = extractor_.forward(to_batch(img), params.values.data());
  const nn::Batch r = head_.forward(z, params.values.data() + extractor_params_);
  return r.sample(0)[0];
}

double PointwiseModel::probability(const PreferenceParams& params, const Image& a,
                                   const Image& b) const {
  return sigmoid_d(score(params, a) - score(params, b));
}

std::pair<double, bool> PointwiseModel::pair_loss_and_grad(const PreferenceParams& params,
                                                           const Image& pos, const Image& neg,
                                                           double* grad,
                                                           Rng& dropout_rng) const {
  nn::Sequential::Trace et, ht;
  const nn::Batch z =
      extractor_.forward_trace(images_to_batch(pos, neg), params.values.data(), et, nullptr);
  const nn::Batch r =
      head_.forward_trace(z, params.values.data() + extractor_params_, ht, &dropout_rng);
  const double diff = r.sample(0)[0] - r.sample(1)[0];
  const double loss = softplus(-diff);
  const bool correct = diff > 0.0;

  const double ddiff = sigmoid_d(diff) - 1.0;
  nn::Batch gr(2, {1, 1, 1});
  gr.sample(0)[0] = ddiff;
  gr.sample(1)[0] = -ddiff;
  const nn::Batch gz = head_.backward(ht, gr, params.values.data() + extractor_params_,
                                      grad + extractor_params_);
  extractor_.backward(et, gz, params.values.data(), grad);
  return {loss, correct};
}

void save_preference(const PreferenceParams& params, const std::filesystem::path& stem) {
  json j;
  j["kind"] = "preference";
  j["version"] = params.version;
  j["config"] = params.config.to_json();
  j["param_count"] = params.values.size();
  std::ofstream out(stem.string() + ".json");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write checkpoint: " + stem.string() + ".json");
  write_f32_blob(stem.string() + ".f32", params.values.data(), params.values.size());
}

PreferenceParams load_preference(const std::filesystem::path& stem,
                                 const std::string& expect_version) {
  std::ifstream in(stem.string() + ".json");
  if (!in) throw std::runtime_error("missing checkpoint: " + stem.string() + ".json");
  json j = json::parse(in);
  PreferenceParams p;
  p.version = j.at("version").get<std::string>();
  if (!expect_version.empty() && p.version != expect_version)
    throw std::runtime_error("checkpoint " + stem.string() + ": expected " + expect_version +
                             ", found " + p.version);
  p.config = PreferenceConfig::from_json(j.at("config"));
  p.values = read_f32_blob(stem.string() + ".f32", j.at("param_count").get<std::size_t>(),
                           "checkpoint " + stem.string());
  return p;
}

// ---------------------------------------------------------------------------
// Degradations

namespace {

std::vector<double> to_gray(const Image& img) {
  std::vector<double> g(std::size_t(img.width) * std::size_t(img.height));
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = (double(img.rgb[3 * i]) + double(img.rgb[3 * i + 1]) + double(img.rgb[3 * i + 2])) / 3.0;
  return g;
}

double sample_clamped(const Image& img, int x, int y, int c) {
  x = std::clamp(x, 0, img.width - 1);
  y = std::clamp(y, 0, img.height - 1);
  return double(img.pixel(x, y)[c]);
}

double sample_bilinear(const Image& img, double x, double y, int c) {
  const int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  const double v00 = sample_clamped(img, x0, y0, c);
  const double v10 = sample_clamped(img, x0 + 1, y0, c);
  const double v01 = sample_clamped(img, x0, y0 + 1, c);
  const double v11 = sample_clamped(img, x0 + 1, y0 + 1, c);
  return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

Image gaussian_blur_image(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, int(std::ceil(2.5 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[std::size_t(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[std::size_t(i + radius)];
  }
  for (double& k : kernel) k /= sum;
  Image tmp(img.width, img.height), out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[std::size_t(i + radius)] * sample_clamped(img, x + i, y, c);
        tmp.pixel(x, y)[c] = float(acc);
      }
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[std::size_t(i + radius)] * sample_clamped(tmp, x, y + i, c);
        out.pixel(x, y)[c] = float(acc);
      }
  return out;
}

void clamp_quantize(Image& img) {
  for (float& v : img.rgb) v = quantize_byte(v);
}

}  // namespace

DegradeKind degrade_kind_from_name(const std::string& name) {
  if (name == "motion_blur") return DegradeKind::kMotionBlur;
  if (name == "gaussian_blur") return DegradeKind::kGaussianBlur;
  if (name == "ghosting") return DegradeKind::kGhosting;
  if (name == "elastic") return DegradeKind::kElastic;
  if (name == "unsharp_mask") return DegradeKind::kUnsharpMask;
  throw std::invalid_argument("unknown degradation kind: " + name);
}

std::string degrade_kind_name(DegradeKind kind) {
  switch (kind) {
    case DegradeKind::kMotionBlur: return "motion_blur";
    case DegradeKind::kGaussianBlur: return "gaussian_blur";
    case DegradeKind::kGhosting: return "ghosting";
    case DegradeKind::kElastic: return "elastic";
    case DegradeKind::kUnsharpMask: return "unsharp_mask";
  }
  return "?";
}

Image degrade_crop(const Image& crop, DegradeKind kind, double strength, std::uint64_t seed) {
  if (strength < 0.0 || strength > 1.0)
    throw std::invalid_argument("degrade_crop: strength must be in [0,1]");
  if (strength == 0.0) return crop;
  Rng rng = Rng(seed).fork(degrade_kind_name(kind));
  Image out = crop;
  switch (kind) {
    case DegradeKind::kMotionBlur: {
      const int len = int(std::round(strength * 5.0));
      if (len == 0) return crop;
      const double angle = rng.uniform(0.0, 6.283185307179586);
      const double dx = std::cos(angle), dy = std::sin(angle);
      for (int y = 0; y < crop.height; ++y)
        for (int x = 0; x < crop.width; ++x)
          for (int c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (int k = -len; k <= len; ++k)
              acc += sample_clamped(crop, x + int(std::round(dx * k)), y + int(std::round(dy * k)),
                                    c);
            out.pixel(x, y)[c] = float(acc / (2 * len + 1));
          }
      break;
    }
    case DegradeKind::kGaussianBlur:
      out = gaussian_blur_image(crop, strength * 2.0);
      break;
    case DegradeKind::kGhosting: {
      const double alpha = 0.45 * strength;
      const double angle = rng.uniform(0.0, 6.283185307179586);
      const int sx = int(std::round(std::cos(angle) * (1.0 + strength * 5.0)));
      const int sy = int(std::round(std::sin(angle) * (1.0 + strength * 5.0)));
      for (int y = 0; y < crop.height; ++y)
        for (int x = 0; x < crop.width; ++x)
          for (int c = 0; c < 3; ++c)
            out.pixel(x, y)[c] = float((1.0 - alpha) * double(crop.pixel(x, y)[c]) +
                                       alpha * sample_clamped(crop, x - sx, y - sy, c));
      break;
    }
    case DegradeKind::kElastic: {
      constexpr int kGrid = 4;
      const double amp = strength * 3.0;
      double fx[kGrid][kGrid], fy[kGrid][kGrid];
      for (int gy = 0; gy < kGrid; ++gy)
        for (int gx = 0; gx < kGrid; ++gx) {
          fx[gy][gx] = rng.uniform(-amp, amp);
          fy[gy][gx] = rng.uniform(-amp, amp);
        }
      auto field = [&](const double f[kGrid][kGrid], double x, double y) {
        const double gx = x / (crop.width - 1) * (kGrid - 1);
        const double gy = y / (crop.height - 1) * (kGrid - 1);
        const int x0 = std::min(kGrid - 2, int(gx)), y0 = std::min(kGrid - 2, int(gy));
        const double ax = gx - x0, ay = gy - y0;
        return (f[y0][x0] * (1 - ax) + f[y0][x0 + 1] * ax) * (1 - ay) +
               (f[y0 + 1][x0] * (1 - ax) + f[y0 + 1][x0 + 1] * ax) * ay;
      };
      for (int y = 0; y < crop.height; ++y)
        for (int x = 0; x < crop.width; ++x) {
          const double sxp = x + field(fx, x, y);
          const double syp = y + field(fy, x, y);
          for (int c = 0; c < 3; ++c)
            out.pixel(x, y)[c] = float(sample_bilinear(crop, sxp, syp, c));
        }
      break;
    }
    case DegradeKind::kUnsharpMask: {
      const double amount = 2.0 * strength;
      const Image blurred = gaussian_blur_image(crop, 1.2);
      for (std::size_t i = 0; i < out.rgb.size(); ++i)
        out.rgb[i] = float(double(crop.rgb[i]) +
                           amount * (double(crop.rgb[i]) - double(blurred.rgb[i])));
      break;
    }
  }
  clamp_quantize(out);
  return out;
}

double high_frequency_energy(const Image& img) {
  const auto g = to_gray(img);
  double sum = 0.0;
  int count = 0;
  for (int y = 1; y < img.height - 1; ++y)
    for (int x = 1; x < img.width - 1; ++x) {
      const std::size_t at = std::size_t(y) * std::size_t(img.width) + std::size_t(x);
      const double lap = g[at - 1] + g[at + 1] + g[at - std::size_t(img.width)] +
                         g[at + std::size_t(img.width)] - 4.0 * g[at];
      sum += std::abs(lap);
      ++count;
    }
  return count > 0 ? sum / count : 0.0;
}

// ---------------------------------------------------------------------------
// Dataset construction and training

PreferenceDataset build_preference_dataset(const std::vector<const SceneBundle*>& scenes,
                                           const GeneratorNet& net, const GeneratorParams& sft,
                                           const BuildPrefsConfig& config) {
  PreferenceDataset dataset;
  Rng master = Rng(config.seed).fork("prefs");
  const int clip_len = net.config().frames;
  const int ks[3] = {1, 2, 4};

  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const SceneBundle& bundle = *scenes[si];
    Rng rng = master.fork(std::uint64_t(si));
    EditPlan plan;  // unedited
    RenderParams rp;
    rp.camera = config.camera;
    rp.first_frame = 0;
    rp.clip_length = std::min(clip_len, bundle.scene.frame_count());
    rp.splat_radius = config.splat_radius;
    if (rp.clip_length < clip_len)
      throw std::invalid_argument("build_preference_dataset: scene shorter than generator clip");
    const ConditionSequence cond = render_sequence(bundle.scene, bundle.assets, plan, rp);
    const auto units =
        extract_units(bundle.scene, plan, config.camera, 0, clip_len, config.min_unit_area);
    if (units.empty()) {
      dataset.skipped_clips.push_back("scene " + std::to_string(si) + ": no vehicle units");
      continue;
    }
    const std::uint64_t video_seed = rng.next_u64();
    VideoTensor videos[3];
    for (int vi = 0; vi < 3; ++vi)
      videos[vi] = sample_video(net, sft, subsample_conditions(cond, ks[vi]), video_seed,
                                config.sample_steps);

    for (std::size_t ui = 0; ui < units.size(); ++ui) {
      Crop crops[3];
      for (int vi = 0; vi < 3; ++vi) {
        crops[vi] = crop_unit(videos[vi], units[ui], 0, config.crop_size);
        crops[vi].source = "s" + std::to_string(si) + "/f" + std::to_string(units[ui].frame) +
                           "/u" + std::to_string(ui) + "/k" + std::to_string(ks[vi]);
      }
      const std::pair<int, int> orderings[3] = {{0, 1}, {1, 2}, {0, 2}};
      for (const auto& [pi, ni] : orderings) {
        PreferencePair pair;
        pair.k_pos = ks[pi];
        pair.k_neg = ks[ni];
        // Rejection-sample the asymmetric strengths: strictly stronger on
        // the negative, by at least the configured gap.
        double s_pos = 0.0, s_neg = 0.0;
        do {
          s_pos = rng.uniform();
          s_neg = rng.uniform();
        } while (!(s_neg - s_pos >= config.min_strength_gap));
        pair.s_pos = s_pos;
        pair.s_neg = s_neg;
        pair.kind_pos = DegradeKind(rng.below(5));
        pair.kind_neg = DegradeKind(rng.below(5));
        pair.pos = crops[pi];
        pair.neg = crops[ni];
        pair.pos.image = degrade_crop(crops[pi].image, pair.kind_pos, s_pos, rng.next_u64());
        pair.neg.image = degrade_crop(crops[ni].image, pair.kind_neg, s_neg, rng.next_u64());
        dataset.pairs.push_back(std::move(pair));
      }
    }
  }
  return dataset;
}

void save_preference_dataset(const PreferenceDataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "crops");
  json manifest;
  manifest["pairs"] = json::array();
  manifest["skipped_clips"] = dataset.skipped_clips;
  char name[64];
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
    const PreferencePair& p = dataset.pairs[i];
    std::snprintf(name, sizeof name, "crops/pair_%06zu_pos.ppm", i);
    write_ppm(dir / name, p.pos.image);
    json jp;
    jp["pos"] = name;
    std::snprintf(name, sizeof name, "crops/pair_%06zu_neg.ppm", i);
    write_ppm(dir / name, p.neg.image);
    jp["neg"] = name;
    jp["k_pos"] = p.k_pos;
    jp["k_neg"] = p.k_neg;
    jp["s_pos"] = p.s_pos;
    jp["s_neg"] = p.s_neg;
    jp["kind_pos"] = degrade_kind_name(p.kind_pos);
    jp["kind_neg"] = degrade_kind_name(p.kind_neg);
    jp["pos_source"] = p.pos.source;
    jp["neg_source"] = p.neg.source;
    manifest["pairs"].push_back(std::move(jp));
  }
  std::ofstream out(dir / "pairs.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write pairs.json");
}

PreferenceDataset load_preference_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "pairs.json");
  if (!in) throw std::runtime_error("missing pairs.json in " + dir.string());
  json manifest = json::parse(in);
  PreferenceDataset dataset;
  dataset.skipped_clips = manifest.value("skipped_clips", std::vector<std::string>{});
  for (const auto& jp : manifest.at("pairs")) {
    PreferencePair p;
    p.pos.image = read_ppm(dir / jp.at("pos").get<std::string>());
    p.neg.image = read_ppm(dir / jp.at("neg").get<std::string>());
    p.k_pos = jp.at("k_pos").get<int>();
    p.k_neg = jp.at("k_neg").get<int>();
    p.s_pos = jp.at("s_pos").get<double>();
    p.s_neg = jp.at("s_neg").get<double>();
    p.kind_pos = degrade_kind_from_name(jp.at("kind_pos").get<std::string>());
    p.kind_neg = degrade_kind_from_name(jp.at("kind_neg").get<std::string>());
    p.pos.source = jp.value("pos_source", std::string());
    p.neg.source = jp.value("neg_source", std::string());
    dataset.pairs.push_back(std::move(p));
  }
  return dataset;
}

namespace {

struct SplitIndices {
  std::vector<std::size_t> train, holdout;
};

SplitIndices split_dataset(std::size_t n, double holdout_fraction, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[std::size_t(rng.below(std::uint32_t(i)))]);
  std::size_t h = std::size_t(std::floor(holdout_fraction * double(n)));
  if (n > 1 && h == 0) h = 1;
  SplitIndices s;
  s.holdout.assign(order.begin(), order.begin() + std::ptrdiff_t(h));
  s.train.assign(order.begin() + std::ptrdiff_t(h), order.end());
  if (s.train.empty()) s.train = order;
  return s;
}

template <typename LossFn, typename EvalFn>
PrefTrainResult train_common(const PreferenceDataset& dataset, const TrainPrefConfig& config,
                             PreferenceParams params, LossFn&& loss_fn, EvalFn&& eval_fn) {
  if (dataset.pairs.empty()) throw std::invalid_argument("train_preference: empty dataset");
  Rng master = Rng(config.seed).fork("pref-train");
  Rng split_rng = master.fork("split");
  const SplitIndices split = split_dataset(dataset.pairs.size(), config.holdout_fraction,
                                           split_rng);

  nn::AdamConfig ac;
  ac.lr = config.lr;
  ac.weight_decay = config.weight_decay;
  nn::Adam adam(params.values.size(), ac);

  const std::int64_t steps_per_epoch =
      std::max<std::int64_t>(1, std::int64_t(split.train.size()) / config.batch);
  const std::int64_t total_steps = steps_per_epoch * config.epochs;

  std::vector<double> grad(params.values.size());
  PrefTrainResult result;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng erng = master.fork("epoch").fork(std::uint64_t(epoch));
    std::vector<std::size_t> order = split.train;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[std::size_t(erng.below(std::uint32_t(i)))]);

    std::size_t correct = 0, seen = 0;
    for (std::int64_t bi = 0; bi < steps_per_epoch; ++bi) {
      std::fill(grad.begin(), grad.end(), 0.0);
      int actual = 0;
      for (int k = 0; k < config.batch; ++k) {
        const std::size_t at = std::size_t(bi) * std::size_t(config.batch) + std::size_t(k);
        if (at >= order.size()) break;
        const PreferencePair& pair = dataset.pairs[order[at]];
        const auto [loss, ok] = loss_fn(params, pair, erng, grad.data());
        correct += ok ? 1u : 0u;
        ++seen;
        ++actual;
        (void)loss;
      }
      if (actual == 0) continue;
      const double inv = 1.0 / double(actual);
      for (double& g : grad) g *= inv;
      adam.step(params.values, grad, nn::cosine_warmup_scale(step, total_steps,
                                                             config.warmup_fraction));
      ++step;
    }

    std::size_t h_correct = 0;
    for (std::size_t hi : split.holdout)
      h_correct += eval_fn(params, dataset.pairs[hi]) ? 1u : 0u;
    const double train_acc = seen ? double(correct) / double(seen) : 0.0;
    const double hold_acc =
        split.holdout.empty() ? train_acc : double(h_correct) / double(split.holdout.size());
    result.curve.push_back({double(epoch), train_acc, hold_acc});
    result.holdout_accuracy = hold_acc;
  }
  result.params = std::move(params);
  return result;
}

}  // namespace

PrefTrainResult train_preference(const PreferenceDataset& dataset, const TrainPrefConfig& config) {
  PreferenceConfig pc;
  pc.crop_size = dataset.pairs.empty() ? 32 : dataset.pairs.front().pos.image.width;
  PairwiseModel model(pc);
  PreferenceParams params = model.init(Rng(config.seed).fork("pairwise-seed").next_u64());
  return train_common(
      dataset, config, std::move(params),
      [&model](const PreferenceParams& p, const PreferencePair& pair, Rng&, double* grad) {
        return model.pair_loss_and_grad(p, pair.pos.image, pair.neg.image, grad);
      },
      [&model](const PreferenceParams& p, const PreferencePair& pair) {
        return model.probability(p, pair.pos.image, pair.neg.image) > 0.5;
      });
}

PrefTrainResult train_pointwise(const PreferenceDataset& dataset, const TrainPrefConfig& config) {
  PreferenceConfig pc;
  pc.crop_size = dataset.pairs.empty() ? 32 : dataset.pairs.front().pos.image.width;
  PointwiseModel model(pc);
  PreferenceParams params = model.init(Rng(config.seed).fork("pointwise-seed").next_u64());
  return train_common(
      dataset, config, std::move(params),
      [&model](const PreferenceParams& p, const PreferencePair& pair, Rng& rng, double* grad) {
        return model.pair_loss_and_grad(p, pair.pos.image, pair.neg.image, grad, rng);
      },
      [&model](const PreferenceParams& p, const PreferencePair& pair) {
        return model.score(p, pair.pos.image) > model.score(p, pair.neg.image);
      });
}

}  // namespace pcflow
