#include "cycinpaint/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/simd/kernels.hpp"

namespace cycinpaint::nn {
namespace {

Tensor scalar_tensor(float v) { return Tensor(Shape{1, 1, 1, 1}, v); }


}  // namespace

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, float momentum, float eps) {
  const Shape s = x.shape();
  const int channels = s.c;
  if (gamma.value().size() != static_cast<std::size_t>(channels)) {
    throw ShapeError("batch_norm: gamma has " + std::to_string(gamma.value().size()) +
                     " entries for " + std::to_string(channels) + " channels");
  }
  const std::size_t plane = s.plane();
  const std::size_t count = plane * s.n;
  Tensor out(s);
  Tensor xhat(s);
  std::vector<float> inv_std(channels);
  const float* in = x.value().data();
  for (int c = 0; c < channels; ++c) {
    double mu, var;
    if (training) {
      double acc = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const float* p = in + (static_cast<std::size_t>(n) * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      }
      mu = acc / static_cast<double>(count);
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const float* p = in + (static_cast<std::size_t>(n) * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mu) * (p[i] - mu);
      }
      var = sq / static_cast<double>(count);
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      running_mean[c] = static_cast<float>((1.0 - momentum) * running_mean[c] + momentum * mu);
      running_var[c] = static_cast<float>((1.0 - momentum) * running_var[c] + momentum * unbiased);
    } else {
      mu = running_mean[c];
      var = running_var[c];
    }
    const float istd = static_cast<float>(1.0 / std::sqrt(var + eps));
    inv_std[c] = istd;
    const float g = gamma.value()[c];
    const float b = beta.value()[c];
    const float m = static_cast<float>(mu);
    for (int n = 0; n < s.n; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const float h = (in[off + i] - m) * istd;
        xhat[off + i] = h;
        out[off + i] = g * h + b;
      }
    }
  }
  return make_result(
      std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), training](Node& self) {
        Node& xn = *self.inputs[0];
        Node& gn = *self.inputs[1];
        Node& bn = *self.inputs[2];
        const Shape s = self.value.shape();
        const std::size_t plane = s.plane();
        const double count = static_cast<double>(plane * s.n);
        const float* gy = self.grad.data();
        for (int c = 0; c < s.c; ++c) {
          double sum_gy = 0.0, sum_gy_xhat = 0.0;
          for (int n = 0; n < s.n; ++n) {
            const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_gy += gy[off + i];
              sum_gy_xhat += static_cast<double>(gy[off + i]) * xhat[off + i];
            }
          }
          if (gn.requires_grad) gn.grad_buffer()[c] += static_cast<float>(sum_gy_xhat);
          if (bn.requires_grad) bn.grad_buffer()[c] += static_cast<float>(sum_gy);
          if (!xn.requires_grad) continue;
          const float g = gn.value[c];
          const float istd = inv_std[c];
          float* gx = xn.grad_buffer().data();
          if (training) {
            const float mean_gy = static_cast<float>(sum_gy / count);
            const float mean_gy_xhat = static_cast<float>(sum_gy_xhat / count);
            for (int n = 0; n < s.n; ++n) {
              const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                gx[off + i] += g * istd * (gy[off + i] - mean_gy - xhat[off + i] * mean_gy_xhat);
              }
            }
          } else {
            for (int n = 0; n < s.n; ++n) {
              const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
              for (std::size_t i = 0; i < plane; ++i) gx[off + i] += g * istd * gy[off + i];
            }
          }
        }
      });
}

Var leaky_relu(const Var& x, float slope) {
  Tensor out(x.shape());
  const float* in = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0f ? in[i] : slope * in[i];
  return make_result(std::move(out), {x}, [slope](Node& self) {
    Node& xn = *self.inputs[0];
    float* gx = xn.grad_buffer().data();
    const float* in = xn.value.data();
    const float* gy = self.grad.data();
    for (std::size_t i = 0; i < self.value.size(); ++i) gx[i] += in[i] > 0.0f ? gy[i] : slope * gy[i];
  });
}

Var relu(const Var& x) { return leaky_relu(x, 0.0f); }

Var tanh(const Var& x) {
  Tensor out(x.shape());
  const float* in = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(in[i]);
  return make_result(std::move(out), {x}, [](Node& self) {
    float* gx = self.inputs[0]->grad_buffer().data();
    const float* y = self.value.data();
    const float* gy = self.grad.data();
    for (std::size_t i = 0; i < self.value.size(); ++i) gx[i] += gy[i] * (1.0f - y[i] * y[i]);
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x.shape());
  const float* in = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float v = in[i];
    out[i] = v >= 0.0f ? 1.0f / (1.0f + std::exp(-v)) : std::exp(v) / (1.0f + std::exp(v));
  }
  return make_result(std::move(out), {x}, [](Node& self) {
    float* gx = self.inputs[0]->grad_buffer().data();
    const float* y = self.value.data();
    const float* gy = self.grad.data();
    for (std::size_t i = 0; i < self.value.size(); ++i) gx[i] += gy[i] * y[i] * (1.0f - y[i]);
  });
}

Var spatial_dropout(const Var& x, float p, Rng& rng, bool training) {
  if (!training || p <= 0.0f) return x;
  const Shape s = x.shape();
  const std::size_t plane = s.plane();
  std::vector<float> keep(static_cast<std::size_t>(s.n) * s.c);
  const float kept_scale = 1.0f / (1.0f - p);
  for (auto& k : keep) k = rng.bernoulli(p) ? 0.0f : kept_scale;
  Tensor out(s);
  const float* in = x.value().data();
  for (std::size_t nc = 0; nc < keep.size(); ++nc) {
    for (std::size_t i = 0; i < plane; ++i) out[nc * plane + i] = in[nc * plane + i] * keep[nc];
  }
  return make_result(std::move(out), {x}, [keep = std::move(keep), plane](Node& self) {
    float* gx = self.inputs[0]->grad_buffer().data();
    const float* gy = self.grad.data();
    for (std::size_t nc = 0; nc < keep.size(); ++nc) {
      for (std::size_t i = 0; i < plane; ++i) gx[nc * plane + i] += gy[nc * plane + i] * keep[nc];
    }
  });
}

Var max_pool2(const Var& x) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("max_pool2: odd spatial size " + s.str());
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor out(os);
  std::vector<std::uint32_t> argmax(out.size());
  const float* in = x.value().data();
  std::size_t o = 0;
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const std::size_t base = static_cast<std::size_t>(nc) * s.plane();
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx, ++o) {
        std::size_t best = base + static_cast<std::size_t>(2 * y) * s.w + 2 * xx;
        const std::size_t cand[3] = {best + 1, best + s.w, best + s.w + 1};
        for (std::size_t c : cand) {
          if (in[c] > in[best]) best = c;
        }
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return make_result(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    float* gx = self.inputs[0]->grad_buffer().data();
    const float* gy = self.grad.data();
    for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += gy[i];
  });
}

Var avg_pool2(const Var& x) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) throw ShapeError("avg_pool2: odd spatial size " + s.str());
  const Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor out(os);
  const float* in = x.value().data();
  std::size_t o = 0;
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const float* p = in + static_cast<std::size_t>(nc) * s.plane();
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx, ++o) {
        const float* q = p + static_cast<std::size_t>(2 * y) * s.w + 2 * xx;
        out[o] = 0.25f * (q[0] + q[1] + q[s.w] + q[s.w + 1]);
      }
    }
  }
  return make_result(std::move(out), {x}, [s, os](Node& self) {
    float* gx = self.inputs[0]->grad_buffer().data();
    const float* gy = self.grad.data();
    std::size_t o = 0;
    for (int nc = 0; nc < s.n * s.c; ++nc) {
      float* p = gx + static_cast<std::size_t>(nc) * s.plane();
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx, ++o) {
          float* q = p + static_cast<std::size_t>(2 * y) * s.w + 2 * xx;
          const float g = 0.25f * gy[o];
          q[0] += g;
          q[1] += g;
          q[s.w] += g;
          q[s.w + 1] += g;
        }
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Shape s = x.shape();
  Tensor out(Shape{s.n, s.c, 1, 1});
  const std::size_t plane = s.plane();
  const float* in = x.value().data();
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += in[nc * plane + i];
    out[nc] = static_cast<float>(acc / static_cast<double>(plane));
  }
  return make_result(std::move(out), {x}, [plane](Node& self) {
    float* gx = self.inputs[0]->grad_buffer().data();
    const float* gy = self.grad.data();
    const float inv = 1.0f / static_cast<float>(plane);
    for (std::size_t nc = 0; nc < self.value.size(); ++nc) {
      for (std::size_t i = 0; i < plane; ++i) gx[nc * plane + i] += gy[nc] * inv;
    }
  });
}

Var global_max_pool(const Var& x) {
  const Shape s = x.shape();
  Tensor out(Shape{s.n, s.c, 1, 1});
  std::vector<std::size_t> argmax(out.size());
  const std::size_t plane = s.plane();
  const float* in = x.value().data();
  for (std::size_t nc = 0; nc < out.size(); ++nc) {
    std::size_t best = nc * plane;
    for (std::size_t i = 1; i < plane; ++i) {
      if (in[nc * plane + i] > in[best]) best = nc * plane + i;
    }
    out[nc] = in[best];
    argmax[nc] = best;
  }
  return make_result(std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    float* gx = self.inputs[0]->grad_buffer().data();
    const float* gy = self.grad.data();
    for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += gy[i];
  });
}

Var upsample_nearest2(const Var& x) {
  const Shape s = x.shape();
  const Shape os{s.n, s.c, s.h * 2, s.w * 2};
  Tensor out(os);
  const float* in = x.value().data();
  for (int nc = 0; nc < s.n * s.c; ++nc) {
    const float* p = in + static_cast<std::size_t>(nc) * s.plane();
    float* q = out.data() + static_cast<std::size_t>(nc) * os.plane();
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx) q[static_cast<std::size_t>(y) * os.w + xx] = p[(y / 2) * s.w + xx / 2];
    }
  }
  return make_result(std::move(out), {x}, [s, os](Node& self) {
    float* gx = self.inputs[0]->grad_buffer().data();
    const float* gy = self.grad.data();
    for (int nc = 0; nc < s.n * s.c; ++nc) {
      float* p = gx + static_cast<std::size_t>(nc) * s.plane();
      const float* q = gy + static_cast<std::size_t>(nc) * os.plane();
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx) p[(y / 2) * s.w + xx / 2] += q[static_cast<std::size_t>(y) * os.w + xx];
      }
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: " + sa.str() + " vs " + sb.str());
  }
  const Shape os{sa.n, sa.c + sb.c, sa.h, sa.w};
  Tensor out(os);
  const std::size_t na = static_cast<std::size_t>(sa.c) * sa.plane();
  const std::size_t nb = static_cast<std::size_t>(sb.c) * sb.plane();
  for (int n = 0; n < sa.n; ++n) {
    float* dst = out.sample(n);
    std::copy_n(a.value().sample(n), na, dst);
    std::copy_n(b.value().sample(n), nb, dst + na);
  }
  return make_result(std::move(out), {a, b}, [na, nb](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    for (int n = 0; n < self.value.n(); ++n) {
      const float* g = self.grad.sample(n);
      if (an.requires_grad) {
        float* ga = an.grad_buffer().sample(n);
        for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
      }
      if (bn.requires_grad) {
        float* gb = bn.grad_buffer().sample(n);
        for (std::size_t i = 0; i < nb; ++i) gb[i] += g[na + i];
      }
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(shape);
  return make_result(std::move(out), {x}, [](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    simd::kernels().axpy(gx.size(), 1.0f, self.grad.data(), gx.data());
  });
}

Var detach(const Var& x) { return Var(x.value()); }

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  simd::kernels().axpy(out.size(), 1.0f, b.value().data(), out.data());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (int i = 0; i < 2; ++i) {
      Node& in = *self.inputs[i];
      if (in.requires_grad) simd::kernels().axpy(self.grad.size(), 1.0f, self.grad.data(), in.grad_buffer().data());
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  simd::kernels().axpy(out.size(), -1.0f, b.value().data(), out.data());
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const float sign[2] = {1.0f, -1.0f};
    for (int i = 0; i < 2; ++i) {
      Node& in = *self.inputs[i];
      if (in.requires_grad) simd::kernels().axpy(self.grad.size(), sign[i], self.grad.data(), in.grad_buffer().data());
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    const float* gy = self.grad.data();
    if (an.requires_grad) {
      float* g = an.grad_buffer().data();
      for (std::size_t i = 0; i < self.value.size(); ++i) g[i] += gy[i] * bn.value[i];
    }
    if (bn.requires_grad) {
      float* g = bn.grad_buffer().data();
      for (std::size_t i = 0; i < self.value.size(); ++i) g[i] += gy[i] * an.value[i];
    }
  });
}

Var scale(const Var& a, float s) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
  return make_result(std::move(out), {a}, [s](Node& self) {
    simd::kernels().axpy(self.grad.size(), s, self.grad.data(), self.inputs[0]->grad_buffer().data());
  });
}

Var select_mask(const Tensor& mask, const Var& known, const Var& fill) {
  require_same_shape(known.value(), fill.value(), "select_mask");
  const Shape s = known.shape();
  const Shape ms = mask.shape();
  const bool broadcast = ms.c == 1 && s.c != 1;
  if (ms.n != s.n || ms.h != s.h || ms.w != s.w || (ms.c != s.c && !broadcast)) {
    throw ShapeError("select_mask: mask " + ms.str() + " vs " + s.str());
  }
  const std::size_t plane = s.plane();
  Tensor out(s);
  const auto& k = simd::kernels();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
      const float* m = mask.data() + (broadcast ? static_cast<std::size_t>(n) * plane : off);
      k.select(m, known.value().data() + off, fill.value().data() + off, out.data() + off, plane);
    }
  }
  return make_result(std::move(out), {known, fill}, [mask, broadcast](Node& self) {
    const Shape s = self.value.shape();
    const std::size_t plane = s.plane();
    Node& kn = *self.inputs[0];
    Node& fn = *self.inputs[1];
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
        const float* m = mask.data() + (broadcast ? static_cast<std::size_t>(n) * plane : off);
        const float* g = self.grad.data() + off;
        if (kn.requires_grad) {
          float* gk = kn.grad_buffer().data() + off;
          for (std::size_t i = 0; i < plane; ++i) if (m[i] != 0.0f) gk[i] += g[i];
        }
        if (fn.requires_grad) {
          float* gf = fn.grad_buffer().data() + off;
          for (std::size_t i = 0; i < plane; ++i) if (m[i] == 0.0f) gf[i] += g[i];
        }
      }
    }
  });
}

Var affine_channels(const Var& x, std::span<const float> scale_c, std::span<const float> shift_c) {
  const Shape s = x.shape();
  if (scale_c.size() != static_cast<std::size_t>(s.c) || shift_c.size() != scale_c.size()) {
    throw ShapeError("affine_channels: coefficient count does not match " + s.str());
  }
  std::vector<float> sc(scale_c.begin(), scale_c.end());
  Tensor out(s);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[off + i] = x.value()[off + i] * sc[c] + shift_c[c];
    }
  }
  return make_result(std::move(out), {x}, [sc = std::move(sc)](Node& self) {
    const Shape s = self.value.shape();
    const std::size_t plane = s.plane();
    float* gx = self.inputs[0]->grad_buffer().data();
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) gx[off + i] += self.grad[off + i] * sc[c];
      }
    }
  });
}

Var sum(const Var& x) {
  double acc = 0.0;
  for (float v : x.value().span()) acc += v;
  return make_result(scalar_tensor(static_cast<float>(acc)), {x}, [](Node& self) {
    Tensor& gx = self.inputs[0]->grad_buffer();
    const float g = self.grad[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var mean(const Var& x) {
  const auto count = static_cast<float>(x.value().size());
  return scale(sum(x), 1.0f / count);
}

Var l1_mean(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "l1_mean");
  const std::size_t count = a.value().size();
  const double total = simd::kernels().sum_abs_diff(a.value().data(), b.value().data(), count);
  return make_result(scalar_tensor(static_cast<float>(total / static_cast<double>(count))), {a, b},
                     [count](Node& self) {
                       Node& an = *self.inputs[0];
                       Node& bn = *self.inputs[1];
                       const float g = self.grad[0] / static_cast<float>(count);
                       for (std::size_t i = 0; i < count; ++i) {
                         const float d = an.value[i] - bn.value[i];
                         const float s = d > 0.0f ? g : (d < 0.0f ? -g : 0.0f);
                         if (an.requires_grad) an.grad_buffer()[i] += s;
                         if (bn.requires_grad) bn.grad_buffer()[i] -= s;
                       }
                     });
}

Var mse_mean(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mse_mean");
  const std::size_t count = a.value().size();
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = static_cast<double>(a.value()[i]) - b.value()[i];
    acc += d * d;
  }
  return make_result(scalar_tensor(static_cast<float>(acc / static_cast<double>(count))), {a, b},
                     [count](Node& self) {
                       Node& an = *self.inputs[0];
                       Node& bn = *self.inputs[1];
                       const float g = 2.0f * self.grad[0] / static_cast<float>(count);
                       for (std::size_t i = 0; i < count; ++i) {
                         const float d = g * (an.value[i] - bn.value[i]);
                         if (an.requires_grad) an.grad_buffer()[i] += d;
                         if (bn.requires_grad) bn.grad_buffer()[i] -= d;
                       }
                     });
}

Var bce(const Var& scores, const Tensor& targets, float eps) {
  if (scores.value().size() != targets.size()) {
    throw ShapeError("bce: " + std::to_string(scores.value().size()) + " scores vs " +
                     std::to_string(targets.size()) + " targets");
  }
  const std::size_t count = targets.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double s = std::clamp<double>(scores.value()[i], eps, 1.0 - eps);
    const double t = targets[i];
    acc -= t * std::log(s) + (1.0 - t) * std::log(1.0 - s);
  }
  return make_result(
      scalar_tensor(static_cast<float>(acc / static_cast<double>(count))), {scores},
      [targets, eps, count](Node& self) {
        Node& sn = *self.inputs[0];
        float* gs = sn.grad_buffer().data();
        const double g = self.grad[0] / static_cast<double>(count);
        for (std::size_t i = 0; i < count; ++i) {
          const double s = sn.value[i];
          if (s < eps || s > 1.0 - eps) continue;
          const double t = targets[i];
          gs[i] += static_cast<float>(g * (-t / s + (1.0 - t) / (1.0 - s)));
        }
      });
}

Var bce_with_logits(const Var& logits, const Tensor& targets) {
  if (logits.value().size() != targets.size()) throw ShapeError("bce_with_logits: size mismatch");
  const std::size_t count = targets.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = logits.value()[i];
    acc += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::fabs(x)));
  }
  return make_result(scalar_tensor(static_cast<float>(acc / static_cast<double>(count))), {logits},
                     [targets, count](Node& self) {
                       Node& ln = *self.inputs[0];
                       float* gl = ln.grad_buffer().data();
                       const double g = self.grad[0] / static_cast<double>(count);
                       for (std::size_t i = 0; i < count; ++i) {
                         const double x = ln.value[i];
                         const double p = 1.0 / (1.0 + std::exp(-x));
                         gl[i] += static_cast<float>(g * (p - targets[i]));
                       }
                     });
}

Var style_layer_loss(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "style_layer_loss");
  const Shape s = a.shape();
  const int channels = s.c;
  const int positions = static_cast<int>(s.plane());
  const std::size_t gram_size = static_cast<std::size_t>(channels) * channels;
  // sign(G(a) - G(b)) per sample, kept for the backward pass.
  Tensor sign(Shape{s.n, 1, channels, channels});
  std::vector<float> ga(gram_size), gb(gram_size);
  const auto& k = simd::kernels();
  const double norm = 1.0 / (static_cast<double>(channels) * channels) /
                      (static_cast<double>(channels) * positions);
  double total = 0.0;
  for (int n = 0; n < s.n; ++n) {
    const float* fa = a.value().sample(n);
    const float* fb = b.value().sample(n);
    k.gemm(false, true, channels, channels, positions, 1.0f, fa, positions, fa, positions, 0.0f,
           ga.data(), channels);
    k.gemm(false, true, channels, channels, positions, 1.0f, fb, positions, fb, positions, 0.0f,
           gb.data(), channels);
    float* sg = sign.sample(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < gram_size; ++i) {
      const float d = ga[i] - gb[i];
      acc += std::fabs(static_cast<double>(d));
      sg[i] = d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f);
    }
    total += norm * acc;
  }
  return make_result(
      scalar_tensor(static_cast<float>(total / s.n)), {a, b},
      [sign = std::move(sign), norm, channels, positions](Node& self) {
        Node& an = *self.inputs[0];
        Node& bn = *self.inputs[1];
        const int batch = an.value.n();
        const float coeff = static_cast<float>(self.grad[0] * norm / batch);
        const auto& k = simd::kernels();
        std::vector<float> sym(static_cast<std::size_t>(channels) * channels);
        for (int n = 0; n < batch; ++n) {
          const float* sg = sign.sample(n);
          for (int i = 0; i < channels; ++i) {
            for (int j = 0; j < channels; ++j) {
              sym[static_cast<std::size_t>(i) * channels + j] =
                  coeff * (sg[static_cast<std::size_t>(i) * channels + j] +
                           sg[static_cast<std::size_t>(j) * channels + i]);
            }
          }
          if (an.requires_grad) {
            k.gemm(false, false, channels, positions, channels, 1.0f, sym.data(), channels,
                   an.value.sample(n), positions, 1.0f, an.grad_buffer().sample(n), positions);
          }
          if (bn.requires_grad) {
            k.gemm(false, false, channels, positions, channels, -1.0f, sym.data(), channels,
                   bn.value.sample(n), positions, 1.0f, bn.grad_buffer().sample(n), positions);
          }
        }
      });
}

}  // namespace cycinpaint::nn
