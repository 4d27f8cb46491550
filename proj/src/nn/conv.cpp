// Convolution and dense layers lowered to GEMM through im2col.

#include <algorithm>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/nn/ops.hpp"
#include "cycinpaint/simd/kernels.hpp"

namespace cycinpaint::nn {
namespace {

struct ConvGeometry {
  int in_c, in_h, in_w, k, stride, pad, out_h, out_w;
  int rows() const { return in_c * k * k; }
  int cols() const { return out_h * out_w; }
};

void im2col(const float* x, const ConvGeometry& g, float* col) {
  const int p = g.cols();
  for (int c = 0; c < g.in_c; ++c) {
    const float* plane = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        float* dst = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * p;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          float* drow = dst + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill_n(drow, g.out_w, 0.0f);
            continue;
          }
          const float* srow = plane + static_cast<std::size_t>(iy) * g.in_w;
          if (g.stride == 1) {
            const int lo = std::clamp(g.pad - kx, 0, g.out_w);
            const int hi = std::clamp(g.in_w + g.pad - kx, lo, g.out_w);
            std::fill_n(drow, lo, 0.0f);
            std::copy(srow + lo - g.pad + kx, srow + hi - g.pad + kx, drow + lo);
            std::fill(drow + hi, drow + g.out_w, 0.0f);
          } else {
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              drow[ox] = (ix >= 0 && ix < g.in_w) ? srow[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, const ConvGeometry& g, float* x) {
  const int p = g.cols();
  for (int c = 0; c < g.in_c; ++c) {
    float* plane = x + static_cast<std::size_t>(c) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        const float* src = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * p;
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          float* xrow = plane + static_cast<std::size_t>(iy) * g.in_w;
          const float* srow = src + static_cast<std::size_t>(oy) * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) xrow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    throw ShapeError("conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
  }
  ConvGeometry g{xs.c, xs.h, xs.w, ws.h, stride, pad, 0, 0};
  g.out_h = (xs.h + 2 * pad - g.k) / stride + 1;
  g.out_w = (xs.w + 2 * pad - g.k) / stride + 1;
  if (g.out_h <= 0 || g.out_w <= 0) throw ShapeError("conv2d: empty output for input " + xs.str());
  const int out_c = ws.n;
  const bool has_bias = bias.defined();

  Tensor out(Shape{xs.n, out_c, g.out_h, g.out_w});
  std::vector<float> col(static_cast<std::size_t>(g.rows()) * g.cols());
  const auto& k = simd::kernels();
  const std::size_t in_stride = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
  const std::size_t out_stride = static_cast<std::size_t>(out_c) * g.cols();
  for (int n = 0; n < xs.n; ++n) {
    const float* xn = x.value().data() + n * in_stride;
    float* yn = out.data() + n * out_stride;
    const float* b_ptr;
    int ldb;
    if (g.k == 1 && g.stride == 1 && g.pad == 0) {
      b_ptr = xn;
      ldb = g.cols();
    } else {
      im2col(xn, g, col.data());
      b_ptr = col.data();
      ldb = g.cols();
    }
    k.gemm(false, false, out_c, g.cols(), g.rows(), 1.0f, weight.value().data(), g.rows(), b_ptr,
           ldb, 0.0f, yn, g.cols());
    if (has_bias) {
      for (int o = 0; o < out_c; ++o) {
        const float bv = bias.value()[o];
        float* row = yn + static_cast<std::size_t>(o) * g.cols();
        for (int i = 0; i < g.cols(); ++i) row[i] += bv;
      }
    }
  }

  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [g, out_c, has_bias](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    const auto& k = simd::kernels();
    const int batch = self.value.n();
    const std::size_t in_stride = static_cast<std::size_t>(g.in_c) * g.in_h * g.in_w;
    const std::size_t out_stride = static_cast<std::size_t>(out_c) * g.cols();
    const bool direct = g.k == 1 && g.stride == 1 && g.pad == 0;
    std::vector<float> col(static_cast<std::size_t>(g.rows()) * g.cols());
    std::vector<float> dcol(xn.requires_grad ? col.size() : 0);
    for (int n = 0; n < batch; ++n) {
      const float* gy = self.grad.data() + n * out_stride;
      const float* xs = xn.value.data() + n * in_stride;
      if (wn.requires_grad) {
        const float* cols = xs;
        if (!direct) {
          im2col(xs, g, col.data());
          cols = col.data();
        }
        k.gemm(false, true, out_c, g.rows(), g.cols(), 1.0f, gy, g.cols(), cols, g.cols(), 1.0f,
               wn.grad_buffer().data(), g.rows());
      }
      if (xn.requires_grad) {
        float* gx = xn.grad_buffer().data() + n * in_stride;
        if (direct) {
          k.gemm(true, false, g.rows(), g.cols(), out_c, 1.0f, wn.value.data(), g.rows(), gy,
                 g.cols(), 1.0f, gx, g.cols());
        } else {
          k.gemm(true, false, g.rows(), g.cols(), out_c, 1.0f, wn.value.data(), g.rows(), gy,
                 g.cols(), 0.0f, dcol.data(), g.cols());
          col2im_add(dcol.data(), g, gx);
        }
      }
      if (has_bias && self.inputs[2]->requires_grad) {
        float* gb = self.inputs[2]->grad_buffer().data();
        for (int o = 0; o < out_c; ++o) {
          const float* row = gy + static_cast<std::size_t>(o) * g.cols();
          float s = 0.0f;
          for (int i = 0; i < g.cols(); ++i) s += row[i];
          gb[o] += s;
        }
      }
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Shape xs = x.shape();
  const int in_f = xs.c * xs.h * xs.w;
  const Shape ws = weight.shape();
  if (ws.c * ws.h * ws.w != in_f) {
    throw ShapeError("linear: weight " + ws.str() + " incompatible with input " + xs.str());
  }
  const int out_f = ws.n;
  const int batch = xs.n;
  const bool has_bias = bias.defined();
  Tensor out(Shape{batch, out_f, 1, 1});
  const auto& k = simd::kernels();
  // out[N, O] = x[N, F] * W[O, F]^T
  k.gemm(false, true, batch, out_f, in_f, 1.0f, x.value().data(), in_f, weight.value().data(),
         in_f, 0.0f, out.data(), out_f);
  if (has_bias) {
    for (int n = 0; n < batch; ++n) {
      for (int o = 0; o < out_f; ++o) out[static_cast<std::size_t>(n) * out_f + o] += bias.value()[o];
    }
  }
  std::vector<Var> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [batch, in_f, out_f, has_bias](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    const auto& k = simd::kernels();
    const float* gy = self.grad.data();
    if (wn.requires_grad) {
      // dW[O, F] += gy[N, O]^T * x[N, F]
      k.gemm(true, false, out_f, in_f, batch, 1.0f, gy, out_f, xn.value.data(), in_f, 1.0f,
             wn.grad_buffer().data(), in_f);
    }
    if (xn.requires_grad) {
      // dx[N, F] += gy[N, O] * W[O, F]
      k.gemm(false, false, batch, in_f, out_f, 1.0f, gy, out_f, wn.value.data(), in_f, 1.0f,
             xn.grad_buffer().data(), in_f);
    }
    if (has_bias && self.inputs[2]->requires_grad) {
      float* gb = self.inputs[2]->grad_buffer().data();
      for (int n = 0; n < batch; ++n) {
        for (int o = 0; o < out_f; ++o) gb[o] += gy[static_cast<std::size_t>(n) * out_f + o];
      }
    }
  });
}

}  // namespace cycinpaint::nn
