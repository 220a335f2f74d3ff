#include "pcflow/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace pcflow::nn {

namespace {

constexpr double kSqrt1_2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

class Conv2d final : public Layer {
 public:
  Conv2d(int out_c, int k, int stride, int pad, bool zero_init)
      : out_c_(out_c), k_(k), stride_(stride), pad_(pad), zero_init_(zero_init) {}

  std::string name() const override { return "conv2d"; }

  Shape out_shape(const Shape& in) const override {
    const int oh = (in.h + 2 * pad_ - k_) / stride_ + 1;
    const int ow = (in.w + 2 * pad_ - k_) / stride_ + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: non-positive output size");
    return {out_c_, oh, ow};
  }

  int param_count(const Shape& in) const override { return out_c_ * in.c * k_ * k_ + out_c_; }

  void init_params(const Shape& in, std::span<float> params, Rng& rng) const override {
    const int wn = out_c_ * in.c * k_ * k_;
    if (zero_init_) {
      for (int i = 0; i < wn + out_c_; ++i) params[std::size_t(i)] = 0.0f;
      return;
    }
    const double std = std::sqrt(2.0 / double(in.c * k_ * k_));
    for (int i = 0; i < wn; ++i) params[std::size_t(i)] = float(rng.normal(0.0, std));
    for (int i = 0; i < out_c_; ++i) params[std::size_t(wn + i)] = 0.0f;
  }

  void forward(const Shape& in_shape, const Batch& in, Batch& out, const float* params, bool,
               Rng*, LayerCtx*) const override {
    const Shape os = out_shape(in_shape);
    kernels::conv2d_forward(in.v.data(), in.n, in_shape.c, in_shape.h, in_shape.w, params,
                            params + out_c_ * in_shape.c * k_ * k_, out.v.data(), os.c, os.h, os.w,
                            k_, stride_, pad_);
  }

  void backward(const Shape& in_shape, const Batch& in, const Batch&, const Batch& grad_out,
                Batch& grad_in, const float* params, double* grad_params,
                const LayerCtx*) const override {
    const Shape os = out_shape(in_shape);
    kernels::conv2d_backward_input(grad_out.v.data(), in.n, os.c, os.h, os.w, params,
                                   grad_in.v.data(), in_shape.c, in_shape.h, in_shape.w, k_,
                                   stride_, pad_);
    kernels::conv2d_backward_params(in.v.data(), grad_out.v.data(), in.n, in_shape.c, in_shape.h,
                                    in_shape.w, os.c, os.h, os.w, grad_params,
                                    grad_params + out_c_ * in_shape.c * k_ * k_, k_, stride_,
                                    pad_);
  }

 private:
  int out_c_, k_, stride_, pad_;
  bool zero_init_;
};

class Elementwise : public Layer {
 public:
  Shape out_shape(const Shape& in) const override { return in; }
};

class SiLU final : public Elementwise {
 public:
  std::string name() const override { return "silu"; }
  void forward(const Shape&, const Batch& in, Batch& out, const float*, bool, Rng*,
               LayerCtx*) const override {
    for (std::size_t i = 0; i < in.size(); ++i) out.v[i] = in.v[i] * sigmoid_d(in.v[i]);
  }
  void backward(const Shape&, const Batch& in, const Batch&, const Batch& grad_out, Batch& grad_in,
                const float*, double*, const LayerCtx*) const override {
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double s = sigmoid_d(in.v[i]);
      grad_in.v[i] = grad_out.v[i] * s * (1.0 + in.v[i] * (1.0 - s));
    }
  }
};

class GELU final : public Elementwise {
 public:
  std::string name() const override { return "gelu"; }
  void forward(const Shape&, const Batch& in, Batch& out, const float*, bool, Rng*,
               LayerCtx*) const override {
    for (std::size_t i = 0; i < in.size(); ++i)
      out.v[i] = 0.5 * in.v[i] * (1.0 + std::erf(in.v[i] * kSqrt1_2));
  }
  void backward(const Shape&, const Batch& in, const Batch&, const Batch& grad_out, Batch& grad_in,
                const float*, double*, const LayerCtx*) const override {
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double x = in.v[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * kSqrt1_2));
      grad_in.v[i] = grad_out.v[i] * (cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x));
    }
  }
};

class Sigmoid final : public Elementwise {
 public:
  std::string name() const override { return "sigmoid"; }
  void forward(const Shape&, const Batch& in, Batch& out, const float*, bool, Rng*,
               LayerCtx*) const override {
    for (std::size_t i = 0; i < in.size(); ++i) out.v[i] = sigmoid_d(in.v[i]);
  }
  void backward(const Shape&, const Batch& in, const Batch&, const Batch& grad_out, Batch& grad_in,
                const float*, double*, const LayerCtx*) const override {
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double y = sigmoid_d(in.v[i]);
      grad_in.v[i] = grad_out.v[i] * y * (1.0 - y);
    }
  }
};

class Upsample2x final : public Layer {
 public:
  std::string name() const override { return "upsample2x"; }
  Shape out_shape(const Shape& in) const override { return {in.c, in.h * 2, in.w * 2}; }

  void forward(const Shape& in_shape, const Batch& in, Batch& out, const float*, bool, Rng*,
               LayerCtx*) const override {
    const int planes = in.n * in_shape.c;
    const int ih = in_shape.h, iw = in_shape.w;
    for (int p = 0; p < planes; ++p) {
      const double* src = in.v.data() + std::size_t(p) * std::size_t(ih) * std::size_t(iw);
      double* dst = out.v.data() + std::size_t(p) * std::size_t(ih * 2) * std::size_t(iw * 2);
      for (int y = 0; y < ih; ++y)
        for (int x = 0; x < iw; ++x) {
          const double v = src[std::size_t(y) * std::size_t(iw) + std::size_t(x)];
          const std::size_t base = std::size_t(2 * y) * std::size_t(2 * iw) + std::size_t(2 * x);
          dst[base] = v;
          dst[base + 1] = v;
          dst[base + std::size_t(2 * iw)] = v;
          dst[base + std::size_t(2 * iw) + 1] = v;
        }
    }
  }

  void backward(const Shape& in_shape, const Batch& in, const Batch&, const Batch& grad_out,
                Batch& grad_in, const float*, double*, const LayerCtx*) const override {
    const int planes = in.n * in_shape.c;
    const int ih = in_shape.h, iw = in_shape.w;
    for (int p = 0; p < planes; ++p) {
      const double* g = grad_out.v.data() + std::size_t(p) * std::size_t(ih * 2) * std::size_t(iw * 2);
      double* dst = grad_in.v.data() + std::size_t(p) * std::size_t(ih) * std::size_t(iw);
      for (int y = 0; y < ih; ++y)
        for (int x = 0; x < iw; ++x) {
          const std::size_t base = std::size_t(2 * y) * std::size_t(2 * iw) + std::size_t(2 * x);
          dst[std::size_t(y) * std::size_t(iw) + std::size_t(x)] =
              ((g[base] + g[base + 1]) + g[base + std::size_t(2 * iw)]) +
              g[base + std::size_t(2 * iw) + 1];
        }
    }
  }
};

class Linear final : public Layer {
 public:
  Linear(int out_features, bool zero_init) : out_f_(out_features), zero_init_(zero_init) {}

  std::string name() const override { return "linear"; }
  Shape out_shape(const Shape&) const override { return {out_f_, 1, 1}; }
  int param_count(const Shape& in) const override { return out_f_ * in.count() + out_f_; }

  void init_params(const Shape& in, std::span<float> params, Rng& rng) const override {
    const int wn = out_f_ * in.count();
    if (zero_init_) {
      for (int i = 0; i < wn + out_f_; ++i) params[std::size_t(i)] = 0.0f;
      return;
    }
    const double std = std::sqrt(2.0 / double(in.count()));
    for (int i = 0; i < wn; ++i) params[std::size_t(i)] = float(rng.normal(0.0, std));
    for (int i = 0; i < out_f_; ++i) params[std::size_t(wn + i)] = 0.0f;
  }

  void forward(const Shape& in_shape, const Batch& in, Batch& out, const float* params, bool,
               Rng*, LayerCtx*) const override {
    const int in_f = in_shape.count();
    const float* b = params + out_f_ * in_f;
    for (int ni = 0; ni < in.n; ++ni) {
      const double* x = in.sample(ni);
      double* y = out.sample(ni);
      for (int o = 0; o < out_f_; ++o) {
        double acc = double(b[o]);
        const float* wrow = params + std::size_t(o) * std::size_t(in_f);
        for (int i = 0; i < in_f; ++i) acc += double(wrow[i]) * x[i];
        y[o] = acc;
      }
    }
  }

  void backward(const Shape& in_shape, const Batch& in, const Batch&, const Batch& grad_out,
                Batch& grad_in, const float* params, double* grad_params,
                const LayerCtx*) const override {
    const int in_f = in_shape.count();
    double* gw = grad_params;
    double* gb = grad_params + out_f_ * in_f;
    for (int ni = 0; ni < in.n; ++ni) {
      const double* x = in.sample(ni);
      const double* gy = grad_out.sample(ni);
      double* gx = grad_in.sample(ni);
      for (int i = 0; i < in_f; ++i) {
        double acc = 0.0;
        for (int o = 0; o < out_f_; ++o)
          acc += double(params[std::size_t(o) * std::size_t(in_f) + std::size_t(i)]) * gy[o];
        gx[i] = acc;
      }
      for (int o = 0; o < out_f_; ++o) {
        const double g = gy[o];
        double* gwrow = gw + std::size_t(o) * std::size_t(in_f);
        for (int i = 0; i < in_f; ++i) gwrow[i] += g * x[i];
        gb[o] += g;
      }
    }
  }

 private:
  int out_f_;
  bool zero_init_;
};

class LayerNorm final : public Layer {
 public:
  std::string name() const override { return "layer_norm"; }
  Shape out_shape(const Shape& in) const override { return in; }
  int param_count(const Shape& in) const override { return 2 * in.count(); }

  void init_params(const Shape& in, std::span<float> params, Rng&) const override {
    const int f = in.count();
    for (int i = 0; i < f; ++i) params[std::size_t(i)] = 1.0f;          // gamma
    for (int i = 0; i < f; ++i) params[std::size_t(f + i)] = 0.0f;      // beta
  }

  void forward(const Shape& in_shape, const Batch& in, Batch& out, const float* params, bool,
               Rng*, LayerCtx* ctx) const override {
    const int f = in_shape.count();
    const float* gamma = params;
    const float* beta = params + f;
    if (ctx) ctx->aux.assign(std::size_t(in.n) * 2, 0.0);
    for (int ni = 0; ni < in.n; ++ni) {
      const double* x = in.sample(ni);
      double* y = out.sample(ni);
      double mean = 0.0;
      for (int i = 0; i < f; ++i) mean += x[i];
      mean /= f;
      double var = 0.0;
      for (int i = 0; i < f; ++i) var += (x[i] - mean) * (x[i] - mean);
      var /= f;
      const double inv_std = 1.0 / std::sqrt(var + kEps);
      if (ctx) {
        ctx->aux[std::size_t(2 * ni)] = mean;
        ctx->aux[std::size_t(2 * ni) + 1] = inv_std;
      }
      for (int i = 0; i < f; ++i)
        y[i] = double(gamma[i]) * ((x[i] - mean) * inv_std) + double(beta[i]);
    }
  }

  void backward(const Shape& in_shape, const Batch& in, const Batch&, const Batch& grad_out,
                Batch& grad_in, const float* params, double* grad_params,
                const LayerCtx* ctx) const override {
    const int f = in_shape.count();
    const float* gamma = params;
    double* ggamma = grad_params;
    double* gbeta = grad_params + f;
    for (int ni = 0; ni < in.n; ++ni) {
      const double* x = in.sample(ni);
      const double* gy = grad_out.sample(ni);
      double* gx = grad_in.sample(ni);
      const double mean = ctx->aux[std::size_t(2 * ni)];
      const double inv_std = ctx->aux[std::size_t(2 * ni) + 1];
      double sum_gxhat = 0.0, sum_gxhat_xhat = 0.0;
      for (int i = 0; i < f; ++i) {
        const double xhat = (x[i] - mean) * inv_std;
        const double g = gy[i] * double(gamma[i]);
        sum_gxhat += g;
        sum_gxhat_xhat += g * xhat;
        ggamma[i] += gy[i] * xhat;
        gbeta[i] += gy[i];
      }
      for (int i = 0; i < f; ++i) {
        const double xhat = (x[i] - mean) * inv_std;
        const double g = gy[i] * double(gamma[i]);
        gx[i] = inv_std * (g - sum_gxhat / f - xhat * sum_gxhat_xhat / f);
      }
    }
  }

 private:
  static constexpr double kEps = 1e-5;
};

class Dropout final : public Elementwise {
 public:
  explicit Dropout(double p) : p_(p) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
  }

  std::string name() const override { return "dropout"; }

  void forward(const Shape&, const Batch& in, Batch& out, const float*, bool training, Rng* rng,
               LayerCtx* ctx) const override {
    if (!training || p_ == 0.0) {
      out.v = in.v;
      if (ctx) ctx->aux.clear();
      return;
    }
    if (!rng) throw std::logic_error("dropout: training forward needs an rng");
    const double scale = 1.0 / (1.0 - p_);
    ctx->aux.resize(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double keep = rng->uniform() >= p_ ? scale : 0.0;
      ctx->aux[i] = keep;
      out.v[i] = in.v[i] * keep;
    }
  }

  void backward(const Shape&, const Batch&, const Batch&, const Batch& grad_out, Batch& grad_in,
                const float*, double*, const LayerCtx* ctx) const override {
    if (!ctx || ctx->aux.empty()) {
      grad_in.v = grad_out.v;
      return;
    }
    for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in.v[i] = grad_out.v[i] * ctx->aux[i];
  }

 private:
  double p_;
};

}  // namespace

std::unique_ptr<Layer> conv2d(int out_channels, int kernel, int stride, int pad, bool zero_init) {
  return std::make_unique<Conv2d>(out_channels, kernel, stride, pad, zero_init);
}
std::unique_ptr<Layer> silu() { return std::make_unique<SiLU>(); }
std::unique_ptr<Layer> gelu() { return std::make_unique<GELU>(); }
std::unique_ptr<Layer> sigmoid() { return std::make_unique<Sigmoid>(); }
std::unique_ptr<Layer> upsample2x() { return std::make_unique<Upsample2x>(); }
std::unique_ptr<Layer> linear(int out_features, bool zero_init) {
  return std::make_unique<Linear>(out_features, zero_init);
}
std::unique_ptr<Layer> layer_norm() { return std::make_unique<LayerNorm>(); }
std::unique_ptr<Layer> dropout(double p) { return std::make_unique<Dropout>(p); }

void Sequential::add(std::unique_ptr<Layer> layer) {
  if (finalized_) throw std::logic_error("Sequential: add after finalize");
  layers_.push_back(std::move(layer));
}

void Sequential::finalize(const Shape& input) {
  if (finalized_) throw std::logic_error("Sequential: already finalized");
  shapes_.push_back(input);
  for (const auto& layer : layers_) {
    param_offsets_.push_back(param_count_);
    param_count_ += layer->param_count(shapes_.back());
    shapes_.push_back(layer->out_shape(shapes_.back()));
  }
  finalized_ = true;
}

void Sequential::init_params(std::span<float> params, Rng& rng) const {
  if (std::size_t(param_count_) != params.size())
    throw std::invalid_argument("Sequential::init_params: wrong span size");
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const int n = layers_[li]->param_count(shapes_[li]);
    layers_[li]->init_params(shapes_[li],
                             params.subspan(std::size_t(param_offsets_[li]), std::size_t(n)), rng);
  }
}

Batch Sequential::forward(const Batch& in, const float* params) const {
  Batch cur = in;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    Batch next(cur.n, shapes_[li + 1]);
    layers_[li]->forward(shapes_[li], cur, next, params + param_offsets_[li], false, nullptr,
                         nullptr);
    cur = std::move(next);
  }
  return cur;
}

Batch Sequential::forward_trace(const Batch& in, const float* params, Trace& trace,
                                Rng* rng) const {
  trace.acts.clear();
  trace.ctxs.assign(layers_.size(), LayerCtx{});
  trace.acts.reserve(layers_.size() + 1);
  trace.acts.push_back(in);
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    Batch next(trace.acts.back().n, shapes_[li + 1]);
    layers_[li]->forward(shapes_[li], trace.acts.back(), next, params + param_offsets_[li], true,
                         rng, &trace.ctxs[li]);
    trace.acts.push_back(std::move(next));
  }
  return trace.acts.back();
}

Batch Sequential::backward(const Trace& trace, const Batch& grad_out, const float* params,
                           double* grad_params) const {
  Batch grad = grad_out;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    Batch grad_in(trace.acts[li].n, shapes_[li]);
    layers_[li]->backward(shapes_[li], trace.acts[li], trace.acts[li + 1], grad, grad_in,
                          params + param_offsets_[li], grad_params + param_offsets_[li],
                          &trace.ctxs[li]);
    grad = std::move(grad_in);
  }
  return grad;
}

void Adam::step(std::span<float> params, std::span<const double> grad, double lr_scale) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("Adam::step: size mismatch");
  ++t_;
  const double lr = config_.lr * lr_scale;
  const double bc1 = 1.0 - std::pow(config_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, double(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    const double g = grad[i];
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    double p = double(params[i]);
    p -= lr * (mhat / (std::sqrt(vhat) + config_.eps) + config_.weight_decay * p);
    params[i] = float(p);
  }
}

double cosine_warmup_scale(std::int64_t step, std::int64_t total, double warmup_fraction) {
  const double warmup = std::max(1.0, warmup_fraction * double(total));
  if (double(step) < warmup) return double(step + 1) / warmup;
  const double progress = (double(step) - warmup) / std::max(1.0, double(total) - warmup);
  return 0.5 * (1.0 + std::cos(3.141592653589793 * std::min(1.0, progress)));
}

}  // namespace pcflow::nn
