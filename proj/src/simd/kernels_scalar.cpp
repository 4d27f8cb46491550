#include <cmath>

#include "cycinpaint/simd/kernels.hpp"

namespace cycinpaint::simd::scalar {
namespace {

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    float* row = c + static_cast<std::size_t>(i) * ldc;
    if (beta == 0.0f) {
      for (int j = 0; j < n; ++j) row[j] = 0.0f;
    } else if (beta != 1.0f) {
      for (int j = 0; j < n; ++j) row[j] *= beta;
    }
  }
  for (int i = 0; i < m; ++i) {
    float* row = c + static_cast<std::size_t>(i) * ldc;
    for (int p = 0; p < k; ++p) {
      const float av = trans_a ? a[static_cast<std::size_t>(p) * lda + i]
                               : a[static_cast<std::size_t>(i) * lda + p];
      const float s = alpha * av;
      if (s == 0.0f) continue;
      if (!trans_b) {
        const float* brow = b + static_cast<std::size_t>(p) * ldb;
        for (int j = 0; j < n; ++j) row[j] += s * brow[j];
      } else {
        for (int j = 0; j < n; ++j) row[j] += s * b[static_cast<std::size_t>(j) * ldb + p];
      }
    }
  }
}

void select(const float* mask, const float* known, const float* fill, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = mask[i] != 0.0f ? known[i] : fill[i];
}

void adam(float* param, const float* grad, float* m, float* v, std::size_t n, float lr_t,
          float beta1, float beta2, float eps_t) {
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i];
    m[i] = beta1 * m[i] + (1.0f - beta1) * g;
    v[i] = beta2 * v[i] + (1.0f - beta2) * g * g;
    param[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps_t);
  }
}

void rmsprop(float* param, const float* grad, float* v, std::size_t n, float lr, float rho,
             float eps) {
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i];
    v[i] = rho * v[i] + (1.0f - rho) * g * g;
    param[i] -= lr * g / (std::sqrt(v[i]) + eps);
  }
}

double sum_abs_diff(const float* a, const float* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  }
  return s;
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable table{Isa::scalar, gemm, select, adam, rmsprop, sum_abs_diff, axpy};

}  // namespace cycinpaint::simd::scalar
