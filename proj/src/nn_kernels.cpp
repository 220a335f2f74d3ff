#include <omp.h>

#include <algorithm>
#include <cstring>

#include "pcflow/nn.hpp"
#include "pcflow/parallel.hpp"

namespace pcflow::nn::kernels {

namespace {

inline void conv2d_forward_plane(const double* in_n, int ic, int ih, int iw, const float* w,
                                 const float* b, double* out_plane, int oc_index, int oh, int ow,
                                 int k, int stride, int pad) {
  const double bias = double(b[oc_index]);
  for (int i = 0; i < oh * ow; ++i) out_plane[i] = bias;
  for (int c = 0; c < ic; ++c) {
    const double* in_plane = in_n + std::size_t(c) * std::size_t(ih) * std::size_t(iw);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double wv =
            double(w[((std::size_t(oc_index) * std::size_t(ic) + std::size_t(c)) * std::size_t(k) +
                      std::size_t(ky)) *
                         std::size_t(k) +
                     std::size_t(kx)]);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= ih) continue;
          const double* in_row = in_plane + std::size_t(iy) * std::size_t(iw);
          double* out_row = out_plane + std::size_t(oy) * std::size_t(ow);
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= iw) continue;
            out_row[ox] += wv * in_row[ix];
          }
        }
      }
    }
  }
}

}  // namespace

void conv2d_forward(const double* in, int n, int ic, int ih, int iw, const float* w,
                    const float* b, double* out, int oc, int oh, int ow, int k, int stride,
                    int pad) {
  const int planes = n * oc;
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int p = 0; p < planes; ++p) {
    const int ni = p / oc;
    const int ci = p % oc;
    conv2d_forward_plane(in + std::size_t(ni) * std::size_t(ic) * std::size_t(ih) * std::size_t(iw),
                         ic, ih, iw, w, b,
                         out + std::size_t(p) * std::size_t(oh) * std::size_t(ow), ci, oh, ow, k,
                         stride, pad);
  }
}

// Textbook per-output gather. Contributions are added in the same
// (bias, ic, ky, kx) order as the blocked kernel, so results match bitwise.
void conv2d_forward_naive(const double* in, int n, int ic, int ih, int iw, const float* w,
                          const float* b, double* out, int oc, int oh, int ow, int k, int stride,
                          int pad) {
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < oc; ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = double(b[co]);
          for (int ci = 0; ci < ic; ++ci)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride + ky - pad;
                const int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= ih || ix < 0 || ix >= iw) continue;
                acc += double(w[((std::size_t(co) * std::size_t(ic) + std::size_t(ci)) *
                                     std::size_t(k) +
                                 std::size_t(ky)) *
                                    std::size_t(k) +
                                std::size_t(kx)]) *
                       in[((std::size_t(ni) * std::size_t(ic) + std::size_t(ci)) *
                               std::size_t(ih) +
                           std::size_t(iy)) *
                              std::size_t(iw) +
                          std::size_t(ix)];
              }
          out[((std::size_t(ni) * std::size_t(oc) + std::size_t(co)) * std::size_t(oh) +
               std::size_t(oy)) *
                  std::size_t(ow) +
              std::size_t(ox)] = acc;
        }
}

namespace {

inline void conv2d_backward_input_plane(const double* gout_n, int oc, int oh, int ow,
                                        const float* w, double* gin_plane, int ic_index, int ic,
                                        int ih, int iw, int k, int stride, int pad) {
  for (int iy = 0; iy < ih; ++iy) {
    for (int ix = 0; ix < iw; ++ix) {
      double acc = 0.0;
      for (int co = 0; co < oc; ++co) {
        const double* gout_plane = gout_n + std::size_t(co) * std::size_t(oh) * std::size_t(ow);
        const float* w_base =
            w + (std::size_t(co) * std::size_t(ic) + std::size_t(ic_index)) * std::size_t(k) *
                    std::size_t(k);
        for (int ky = 0; ky < k; ++ky) {
          const int ty = iy + pad - ky;
          if (ty < 0 || ty % stride != 0) continue;
          const int oy = ty / stride;
          if (oy >= oh) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int tx = ix + pad - kx;
            if (tx < 0 || tx % stride != 0) continue;
            const int ox = tx / stride;
            if (ox >= ow) continue;
            acc += double(w_base[std::size_t(ky) * std::size_t(k) + std::size_t(kx)]) *
                   gout_plane[std::size_t(oy) * std::size_t(ow) + std::size_t(ox)];
          }
        }
      }
      gin_plane[std::size_t(iy) * std::size_t(iw) + std::size_t(ix)] = acc;
    }
  }
}

}  // namespace

void conv2d_backward_input(const double* gout, int n, int oc, int oh, int ow, const float* w,
                           double* gin, int ic, int ih, int iw, int k, int stride, int pad) {
  const int planes = n * ic;
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int p = 0; p < planes; ++p) {
    const int ni = p / ic;
    const int ci = p % ic;
    conv2d_backward_input_plane(
        gout + std::size_t(ni) * std::size_t(oc) * std::size_t(oh) * std::size_t(ow), oc, oh, ow,
        w, gin + std::size_t(p) * std::size_t(ih) * std::size_t(iw), ci, ic, ih, iw, k, stride,
        pad);
  }
}

void conv2d_backward_input_naive(const double* gout, int n, int oc, int oh, int ow, const float* w,
                                 double* gin, int ic, int ih, int iw, int k, int stride, int pad) {
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < ic; ++ci)
      conv2d_backward_input_plane(
          gout + std::size_t(ni) * std::size_t(oc) * std::size_t(oh) * std::size_t(ow), oc, oh, ow,
          w, gin + (std::size_t(ni) * std::size_t(ic) + std::size_t(ci)) * std::size_t(ih) *
                       std::size_t(iw),
          ci, ic, ih, iw, k, stride, pad);
}

namespace {

// One (oc, ic) filter tile; accumulation order (n, ky, kx, oy, ox) per tap.
inline void conv2d_backward_params_tile(const double* in, const double* gout, int n, int ic,
                                        int ih, int iw, int oc, int oh, int ow, double* gw_tile,
                                        int oc_index, int ic_index, int k, int stride, int pad) {
  for (int ky = 0; ky < k; ++ky)
    for (int kx = 0; kx < k; ++kx) {
      double acc = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const double* gout_plane =
            gout + (std::size_t(ni) * std::size_t(oc) + std::size_t(oc_index)) * std::size_t(oh) *
                       std::size_t(ow);
        const double* in_plane =
            in + (std::size_t(ni) * std::size_t(ic) + std::size_t(ic_index)) * std::size_t(ih) *
                     std::size_t(iw);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= ih) continue;
          const double* in_row = in_plane + std::size_t(iy) * std::size_t(iw);
          const double* gout_row = gout_plane + std::size_t(oy) * std::size_t(ow);
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= iw) continue;
            acc += gout_row[ox] * in_row[ix];
          }
        }
      }
      gw_tile[std::size_t(ky) * std::size_t(k) + std::size_t(kx)] += acc;
    }
}

}  // namespace

void conv2d_backward_params(const double* in, const double* gout, int n, int ic, int ih, int iw,
                            int oc, int oh, int ow, double* gw, double* gb, int k, int stride,
                            int pad) {
  const int tiles = oc * ic;
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int t = 0; t < tiles; ++t) {
    const int co = t / ic;
    const int ci = t % ic;
    conv2d_backward_params_tile(in, gout, n, ic, ih, iw, oc, oh, ow,
                                gw + std::size_t(t) * std::size_t(k) * std::size_t(k), co, ci, k,
                                stride, pad);
  }
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int co = 0; co < oc; ++co) {
    double acc = 0.0;
    for (int ni = 0; ni < n; ++ni) {
      const double* gout_plane =
          gout + (std::size_t(ni) * std::size_t(oc) + std::size_t(co)) * std::size_t(oh) *
                     std::size_t(ow);
      for (int i = 0; i < oh * ow; ++i) acc += gout_plane[i];
    }
    gb[co] += acc;
  }
}

void conv2d_backward_params_naive(const double* in, const double* gout, int n, int ic, int ih,
                                  int iw, int oc, int oh, int ow, double* gw, double* gb, int k,
                                  int stride, int pad) {
  for (int co = 0; co < oc; ++co)
    for (int ci = 0; ci < ic; ++ci)
      conv2d_backward_params_tile(
          in, gout, n, ic, ih, iw, oc, oh, ow,
          gw + (std::size_t(co) * std::size_t(ic) + std::size_t(ci)) * std::size_t(k) *
                   std::size_t(k),
          co, ci, k, stride, pad);
  for (int co = 0; co < oc; ++co) {
    double acc = 0.0;
    for (int ni = 0; ni < n; ++ni) {
      const double* gout_plane =
          gout + (std::size_t(ni) * std::size_t(oc) + std::size_t(co)) * std::size_t(oh) *
                     std::size_t(ow);
      for (int i = 0; i < oh * ow; ++i) acc += gout_plane[i];
    }
    gb[co] += acc;
  }
}

}  // namespace pcflow::nn::kernels
