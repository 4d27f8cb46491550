// AVX2 + FMA variants. Compiled without global -mavx2; each function carries
// a target attribute so the binary still runs on older CPUs, where the
// dispatcher never selects this table.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "cycinpaint/simd/kernels.hpp"

#define CYC_AVX2 __attribute__((target("avx2,fma")))

namespace cycinpaint::simd::avx2 {
namespace {

constexpr int kMr = 6;
constexpr int kNr = 16;
constexpr int kKc = 256;
constexpr int kMc = 96;
constexpr int kNc = 2048;

inline float elem(const float* x, int ld, bool trans, int r, int c) {
  return trans ? x[static_cast<std::size_t>(c) * ld + r] : x[static_cast<std::size_t>(r) * ld + c];
}

// A block (mc x kc) -> strips of kMr rows, p-major inside a strip. alpha folded in.
void pack_a(bool trans, const float* a, int lda, int i0, int p0, int mc, int kc, float alpha,
            float* buf) {
  for (int s = 0; s < mc; s += kMr) {
    const int rows = std::min(kMr, mc - s);
    for (int p = 0; p < kc; ++p) {
      for (int r = 0; r < kMr; ++r) {
        *buf++ = r < rows ? alpha * elem(a, lda, trans, i0 + s + r, p0 + p) : 0.0f;
      }
    }
  }
}

// B block (kc x nc) -> strips of kNr columns, p-major inside a strip.
CYC_AVX2 void pack_b(bool trans, const float* b, int ldb, int p0, int j0, int kc, int nc,
                     float* buf) {
  for (int t = 0; t < nc; t += kNr) {
    const int cols = std::min(kNr, nc - t);
    if (!trans && cols == kNr) {
      for (int p = 0; p < kc; ++p) {
        const float* src = b + static_cast<std::size_t>(p0 + p) * ldb + j0 + t;
        _mm256_storeu_ps(buf, _mm256_loadu_ps(src));
        _mm256_storeu_ps(buf + 8, _mm256_loadu_ps(src + 8));
        buf += kNr;
      }
    } else {
      for (int p = 0; p < kc; ++p) {
        for (int j = 0; j < kNr; ++j) {
          *buf++ = j < cols ? elem(b, ldb, trans, p0 + p, j0 + t + j) : 0.0f;
        }
      }
    }
  }
}

CYC_AVX2 void micro_kernel(int kc, const float* pa, const float* pb, float* c, int ldc, int mr,
                           int nr) {
  __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
  __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
  __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
  __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
  __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
  __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();
  for (int p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(pb);
    const __m256 b1 = _mm256_loadu_ps(pb + 8);
    __m256 a = _mm256_broadcast_ss(pa + 0);
    c00 = _mm256_fmadd_ps(a, b0, c00);
    c01 = _mm256_fmadd_ps(a, b1, c01);
    a = _mm256_broadcast_ss(pa + 1);
    c10 = _mm256_fmadd_ps(a, b0, c10);
    c11 = _mm256_fmadd_ps(a, b1, c11);
    a = _mm256_broadcast_ss(pa + 2);
    c20 = _mm256_fmadd_ps(a, b0, c20);
    c21 = _mm256_fmadd_ps(a, b1, c21);
    a = _mm256_broadcast_ss(pa + 3);
    c30 = _mm256_fmadd_ps(a, b0, c30);
    c31 = _mm256_fmadd_ps(a, b1, c31);
    a = _mm256_broadcast_ss(pa + 4);
    c40 = _mm256_fmadd_ps(a, b0, c40);
    c41 = _mm256_fmadd_ps(a, b1, c41);
    a = _mm256_broadcast_ss(pa + 5);
    c50 = _mm256_fmadd_ps(a, b0, c50);
    c51 = _mm256_fmadd_ps(a, b1, c51);
    pa += kMr;
    pb += kNr;
  }
  alignas(32) float tile[kMr][kNr];
  _mm256_store_ps(tile[0], c00);
  _mm256_store_ps(tile[0] + 8, c01);
  _mm256_store_ps(tile[1], c10);
  _mm256_store_ps(tile[1] + 8, c11);
  _mm256_store_ps(tile[2], c20);
  _mm256_store_ps(tile[2] + 8, c21);
  _mm256_store_ps(tile[3], c30);
  _mm256_store_ps(tile[3] + 8, c31);
  _mm256_store_ps(tile[4], c40);
  _mm256_store_ps(tile[4] + 8, c41);
  _mm256_store_ps(tile[5], c50);
  _mm256_store_ps(tile[5] + 8, c51);
  if (nr == kNr) {
    for (int r = 0; r < mr; ++r) {
      float* dst = c + static_cast<std::size_t>(r) * ldc;
      _mm256_storeu_ps(dst, _mm256_add_ps(_mm256_loadu_ps(dst), _mm256_load_ps(tile[r])));
      _mm256_storeu_ps(dst + 8,
                       _mm256_add_ps(_mm256_loadu_ps(dst + 8), _mm256_load_ps(tile[r] + 8)));
    }
  } else {
    for (int r = 0; r < mr; ++r) {
      float* dst = c + static_cast<std::size_t>(r) * ldc;
      for (int j = 0; j < nr; ++j) dst[j] += tile[r][j];
    }
  }
}

CYC_AVX2 void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                   int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  if (m <= 0 || n <= 0) return;
  for (int i = 0; i < m; ++i) {
    float* row = c + static_cast<std::size_t>(i) * ldc;
    if (beta == 0.0f) {
      std::memset(row, 0, sizeof(float) * static_cast<std::size_t>(n));
    } else if (beta != 1.0f) {
      for (int j = 0; j < n; ++j) row[j] *= beta;
    }
  }
  if (k <= 0 || alpha == 0.0f) return;

  thread_local std::vector<float> a_buf;
  thread_local std::vector<float> b_buf;
  a_buf.resize(static_cast<std::size_t>(kMc + kMr) * kKc);
  b_buf.resize(static_cast<std::size_t>(kNc + kNr) * kKc);

  for (int jc = 0; jc < n; jc += kNc) {
    const int nc = std::min(kNc, n - jc);
    for (int pc = 0; pc < k; pc += kKc) {
      const int kc = std::min(kKc, k - pc);
      pack_b(trans_b, b, ldb, pc, jc, kc, nc, b_buf.data());
      for (int ic = 0; ic < m; ic += kMc) {
        const int mc = std::min(kMc, m - ic);
        pack_a(trans_a, a, lda, ic, pc, mc, kc, alpha, a_buf.data());
        for (int jr = 0; jr < nc; jr += kNr) {
          const int nr = std::min(kNr, nc - jr);
          const float* pb = b_buf.data() + static_cast<std::size_t>(jr) * kc;
          for (int ir = 0; ir < mc; ir += kMr) {
            const int mr = std::min(kMr, mc - ir);
            const float* pa = a_buf.data() + static_cast<std::size_t>(ir) * kc;
            float* cp = c + static_cast<std::size_t>(ic + ir) * ldc + jc + jr;
            micro_kernel(kc, pa, pb, cp, ldc, mr, nr);
          }
        }
      }
    }
  }
}

CYC_AVX2 void select(const float* mask, const float* known, const float* fill, float* out,
                     std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 keep = _mm256_cmp_ps(_mm256_loadu_ps(mask + i), zero, _CMP_NEQ_UQ);
    _mm256_storeu_ps(out + i,
                     _mm256_blendv_ps(_mm256_loadu_ps(fill + i), _mm256_loadu_ps(known + i), keep));
  }
  for (; i < n; ++i) out[i] = mask[i] != 0.0f ? known[i] : fill[i];
}

// Elementwise updates use separate mul/add (no FMA) so they match the scalar
// reference bit for bit; the build sets -ffp-contract=off.
CYC_AVX2 void adam(float* param, const float* grad, float* m, float* v, std::size_t n, float lr_t,
                   float beta1, float beta2, float eps_t) {
  const __m256 b1 = _mm256_set1_ps(beta1), nb1 = _mm256_set1_ps(1.0f - beta1);
  const __m256 b2 = _mm256_set1_ps(beta2), nb2 = _mm256_set1_ps(1.0f - beta2);
  const __m256 lr = _mm256_set1_ps(lr_t), eps = _mm256_set1_ps(eps_t);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(nb1, g));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(_mm256_mul_ps(nb2, g), g));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 step = _mm256_div_ps(_mm256_mul_ps(lr, mi), _mm256_add_ps(_mm256_sqrt_ps(vi), eps));
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), step));
  }
  for (; i < n; ++i) {
    const float g = grad[i];
    m[i] = beta1 * m[i] + (1.0f - beta1) * g;
    v[i] = beta2 * v[i] + (1.0f - beta2) * g * g;
    param[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps_t);
  }
}

CYC_AVX2 void rmsprop(float* param, const float* grad, float* v, std::size_t n, float lr_, float rho,
                      float eps_) {
  const __m256 r = _mm256_set1_ps(rho), nr = _mm256_set1_ps(1.0f - rho);
  const __m256 lr = _mm256_set1_ps(lr_), eps = _mm256_set1_ps(eps_);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(r, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(_mm256_mul_ps(nr, g), g));
    _mm256_storeu_ps(v + i, vi);
    const __m256 step = _mm256_div_ps(_mm256_mul_ps(lr, g), _mm256_add_ps(_mm256_sqrt_ps(vi), eps));
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), step));
  }
  for (; i < n; ++i) {
    const float g = grad[i];
    v[i] = rho * v[i] + (1.0f - rho) * g * g;
    param[i] -= lr_ * g / (std::sqrt(v[i]) + eps_);
  }
}

CYC_AVX2 double sum_abs_diff(const float* a, const float* b, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    const __m256d d0 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                                     _mm256_cvtps_pd(_mm256_castps256_ps128(vb)));
    const __m256d d1 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                                     _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)));
    acc0 = _mm256_add_pd(acc0, _mm256_andnot_pd(sign, d0));
    acc1 = _mm256_add_pd(acc1, _mm256_andnot_pd(sign, d1));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  return s;
}

CYC_AVX2 void axpy(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i),
                                           _mm256_mul_ps(va, _mm256_loadu_ps(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable table{Isa::avx2, gemm, select, adam, rmsprop, sum_abs_diff, axpy};

}  // namespace cycinpaint::simd::avx2
