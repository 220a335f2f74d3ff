#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcflow/rng.hpp"

namespace pcflow::nn {

struct Shape {
  int c = 0, h = 0, w = 0;
  int count() const { return c * h * w; }
  bool operator==(const Shape&) const = default;
};

// Dense NCHW activation block. Float32 is the storage precision of the
// project's tensors; all network arithmetic runs in double so that the
// finite-difference gradient checks hold at 1e-4 relative error.
struct Batch {
  int n = 0;
  Shape shape;
  std::vector<double> v;

  Batch() = default;
  Batch(int n_, Shape s) : n(n_), shape(s), v(std::size_t(n_) * std::size_t(s.count()), 0.0) {}

  double* sample(int i) { return v.data() + std::size_t(i) * std::size_t(shape.count()); }
  const double* sample(int i) const {
    return v.data() + std::size_t(i) * std::size_t(shape.count());
  }
  std::size_t size() const { return v.size(); }
};

// Per-forward scratch a layer wants back at backward time (dropout masks,
// normalization moments).
struct LayerCtx {
  std::vector<double> aux;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string name() const = 0;
  virtual Shape out_shape(const Shape& in) const = 0;
  virtual int param_count(const Shape& in) const { return 0; }
  virtual void init_params(const Shape& in, std::span<float> params, Rng& rng) const {
    (void)in, (void)params, (void)rng;
  }
  virtual void forward(const Shape& in_shape, const Batch& in, Batch& out, const float* params,
                       bool training, Rng* rng, LayerCtx* ctx) const = 0;
  // Accumulates into grad_params; writes grad_in (same shape as in).
  virtual void backward(const Shape& in_shape, const Batch& in, const Batch& out,
                        const Batch& grad_out, Batch& grad_in, const float* params,
                        double* grad_params, const LayerCtx* ctx) const = 0;
};

std::unique_ptr<Layer> conv2d(int out_channels, int kernel, int stride, int pad,
                              bool zero_init = false);
std::unique_ptr<Layer> silu();
std::unique_ptr<Layer> gelu();
std::unique_ptr<Layer> sigmoid();
std::unique_ptr<Layer> upsample2x();
std::unique_ptr<Layer> linear(int out_features, bool zero_init = false);
std::unique_ptr<Layer> layer_norm();
std::unique_ptr<Layer> dropout(double p);

class Sequential {
 public:
  Sequential() = default;
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(std::unique_ptr<Layer> layer);
  // Locks shapes and parameter offsets; call once after the last add().
  void finalize(const Shape& input);

  const Shape& input_shape() const { return shapes_.front(); }
  const Shape& output_shape() const { return shapes_.back(); }
  int param_count() const { return param_count_; }

  void init_params(std::span<float> params, Rng& rng) const;

  // Inference path (no traces, dropout disabled).
  Batch forward(const Batch& in, const float* params) const;

  struct Trace {
    std::vector<Batch> acts;  // acts[0] = input copy, acts[i] = layer i-1 output
    std::vector<LayerCtx> ctxs;
  };
  Batch forward_trace(const Batch& in, const float* params, Trace& trace, Rng* rng) const;

  // grad_params must hold param_count() doubles and is accumulated into.
  Batch backward(const Trace& trace, const Batch& grad_out, const float* params,
                 double* grad_params) const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Shape> shapes_;        // size layers_+1 once finalized
  std::vector<int> param_offsets_;   // per layer
  int param_count_ = 0;
  bool finalized_ = false;
};

// Adam / AdamW on a float32 master copy with double moments. Deterministic.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW) when > 0
};

class Adam {
 public:
  Adam(std::size_t n, const AdamConfig& config) : config_(config), m_(n, 0.0), v_(n, 0.0) {}

  // lr_scale multiplies the base rate (warmup/cosine schedules).
  void step(std::span<float> params, std::span<const double> grad, double lr_scale = 1.0);

 private:
  AdamConfig config_;
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

// Cosine decay with linear warmup over the first warmup_fraction of steps.
double cosine_warmup_scale(std::int64_t step, std::int64_t total, double warmup_fraction);

namespace kernels {

// Gather-form convolution kernels. The *_naive versions are the serial
// references kept for testing/benchmarks; the parallel versions accumulate
// per output element in the same (bias, ic, ky, kx) order, so outputs are
// bit-identical for any thread count.
void conv2d_forward(const double* in, int n, int ic, int ih, int iw, const float* w,
                    const float* b, double* out, int oc, int oh, int ow, int k, int stride,
                    int pad);
void conv2d_forward_naive(const double* in, int n, int ic, int ih, int iw, const float* w,
                          const float* b, double* out, int oc, int oh, int ow, int k, int stride,
                          int pad);
void conv2d_backward_input(const double* gout, int n, int oc, int oh, int ow, const float* w,
                           double* gin, int ic, int ih, int iw, int k, int stride, int pad);
void conv2d_backward_input_naive(const double* gout, int n, int oc, int oh, int ow, const float* w,
                                 double* gin, int ic, int ih, int iw, int k, int stride, int pad);
void conv2d_backward_params(const double* in, const double* gout, int n, int ic, int ih, int iw,
                            int oc, int oh, int ow, double* gw, double* gb, int k, int stride,
                            int pad);
void conv2d_backward_params_naive(const double* in, const double* gout, int n, int ic, int ih,
                                  int iw, int oc, int oh, int ow, double* gw, double* gb, int k,
                                  int stride, int pad);

}  // namespace kernels

}  // namespace pcflow::nn
