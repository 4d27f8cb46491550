#pragma once

// Hot inner loops behind a runtime-selected function table.
//
// Every kernel has a portable scalar reference and an AVX2+FMA variant.
// The variant is picked once from CPUID; CYCINPAINT_SIMD=scalar in the
// environment forces the reference path. Variants agree bit-exactly for
// selection/compositing and within float rounding for reductions.

#include <cstddef>
#include <string_view>

namespace cycinpaint::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// Row-major C = alpha * op(A) * op(B) + beta * C, op(X) = X or X^T.
/// op(A) is m x k, op(B) is k x n. beta == 0 overwrites C (NaNs in C ignored).
using GemmFn = void (*)(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                        const float* a, int lda, const float* b, int ldb, float beta, float* c,
                        int ldc);

/// out[i] = mask[i] != 0 ? known[i] : fill[i]. Exact selection, no arithmetic.
using SelectFn = void (*)(const float* mask, const float* known, const float* fill, float* out,
                          std::size_t n);

/// Adam update with bias-corrected step size `lr_t` folded in by the caller:
/// m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2; p -= lr_t * m / (sqrt(v) + eps_t).
using AdamFn = void (*)(float* param, const float* grad, float* m, float* v, std::size_t n,
                        float lr_t, float beta1, float beta2, float eps_t);

/// v = rho v + (1-rho) g^2; p -= lr * g / (sqrt(v) + eps).
using RmspropFn = void (*)(float* param, const float* grad, float* v, std::size_t n, float lr,
                           float rho, float eps);

/// sum |a[i] - b[i]| accumulated in double.
using SumAbsDiffFn = double (*)(const float* a, const float* b, std::size_t n);

/// y[i] += alpha * x[i]
using AxpyFn = void (*)(std::size_t n, float alpha, const float* x, float* y);

struct KernelTable {
  Isa isa;
  GemmFn gemm;
  SelectFn select;
  AdamFn adam;
  RmspropFn rmsprop;
  SumAbsDiffFn sum_abs_diff;
  AxpyFn axpy;
};

bool isa_supported(Isa isa);

/// Best supported ISA, unless overridden by CYCINPAINT_SIMD.
Isa detect_isa();

/// Table for a specific ISA; throws std::runtime_error when unsupported.
const KernelTable& kernels_for(Isa isa);

/// Active table (detected once, changeable with set_active_isa for tests).
const KernelTable& kernels();

void set_active_isa(Isa isa);

namespace scalar {
extern const KernelTable table;
}
namespace avx2 {
extern const KernelTable table;
}

}  // namespace cycinpaint::simd
