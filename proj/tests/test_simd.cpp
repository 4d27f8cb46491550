#include <cmath>
#include <vector>

#include "cycinpaint/core/rng.hpp"
#include "cycinpaint/simd/kernels.hpp"
#include "doctest.h"

using namespace cycinpaint;
using simd::Isa;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

// Double-precision triple loop, independent of both variants.
std::vector<double> gemm_oracle(bool ta, bool tb, int m, int n, int k, float alpha,
                                const std::vector<float>& a, int lda, const std::vector<float>& b,
                                int ldb, float beta, const std::vector<float>& c, int ldc) {
  std::vector<double> out(static_cast<std::size_t>(m) * ldc);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int p = 0; p < k; ++p) {
        const double av = ta ? a[static_cast<std::size_t>(p) * lda + i] : a[static_cast<std::size_t>(i) * lda + p];
        const double bv = tb ? b[static_cast<std::size_t>(j) * ldb + p] : b[static_cast<std::size_t>(p) * ldb + j];
        acc += av * bv;
      }
      const double prior = beta == 0.0f ? 0.0 : static_cast<double>(beta) * c[static_cast<std::size_t>(i) * ldc + j];
      out[static_cast<std::size_t>(i) * ldc + j] = alpha * acc + prior;
    }
  }
  return out;
}

bool have_avx2() { return simd::isa_supported(Isa::avx2); }

}  // namespace

TEST_CASE("gemm variants match a double-precision oracle") {
  Rng rng(7);
  const int dims[][3] = {{1, 1, 1}, {6, 16, 8}, {7, 17, 3}, {13, 33, 257}, {96, 40, 300},
                         {100, 5, 600}, {3, 2100, 9}, {64, 64, 64}};
  std::vector<Isa> isas{Isa::scalar};
  if (have_avx2()) isas.push_back(Isa::avx2);
  for (const auto& d : dims) {
    const int m = d[0], n = d[1], k = d[2];
    for (int combo = 0; combo < 4; ++combo) {
      const bool ta = combo & 1, tb = combo & 2;
      const int lda = ta ? m : k;
      const int ldb = tb ? k : n;
      const int ldc = n + 3;
      auto a = random_vec(static_cast<std::size_t>(ta ? k : m) * lda, rng);
      auto b = random_vec(static_cast<std::size_t>(tb ? n : k) * ldb, rng);
      auto c0 = random_vec(static_cast<std::size_t>(m) * ldc, rng);
      const float alpha = 0.75f, beta = (combo == 3) ? 0.0f : 0.5f;
      const auto expected = gemm_oracle(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c0, ldc);
      for (Isa isa : isas) {
        auto c = c0;
        simd::kernels_for(isa).gemm(ta, tb, m, n, k, alpha, a.data(), lda, b.data(), ldb, beta,
                                    c.data(), ldc);
        double worst = 0.0;
        for (int i = 0; i < m; ++i) {
          for (int j = 0; j < n; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * ldc + j;
            worst = std::max(worst, std::fabs(c[idx] - expected[idx]) / (1.0 + std::fabs(expected[idx])));
          }
          // Padding columns beyond n stay untouched.
          for (int j = n; j < ldc; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * ldc + j;
            CHECK(c[idx] == c0[idx]);
          }
        }
        INFO("isa=", simd::isa_name(isa), " m=", m, " n=", n, " k=", k, " ta=", ta, " tb=", tb);
        CHECK(worst < 1e-5 * std::sqrt(static_cast<double>(k) + 1.0));
      }
    }
  }
}

TEST_CASE("gemm with beta zero ignores NaN garbage in C") {
  std::vector<float> a{1, 2}, b{3, 4};
  for (Isa isa : {Isa::scalar, Isa::avx2}) {
    if (!simd::isa_supported(isa)) continue;
    std::vector<float> c{std::nanf("")};
    simd::kernels_for(isa).gemm(false, false, 1, 1, 2, 1.0f, a.data(), 2, b.data(), 1, 0.0f,
                                c.data(), 1);
    CHECK(c[0] == 11.0f);
  }
}

TEST_CASE("elementwise kernels are bit-identical across variants") {
  if (!have_avx2()) return;
  const auto& ref = simd::kernels_for(Isa::scalar);
  const auto& vec = simd::kernels_for(Isa::avx2);
  Rng rng(11);
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 31u, 1000u}) {
    auto mask = random_vec(n, rng, 0.0, 1.0);
    for (auto& m : mask) m = m > 0.5f ? 1.0f : 0.0f;
    auto known = random_vec(n, rng), fill = random_vec(n, rng);
    std::vector<float> o1(n), o2(n);
    ref.select(mask.data(), known.data(), fill.data(), o1.data(), n);
    vec.select(mask.data(), known.data(), fill.data(), o2.data(), n);
    CHECK(o1 == o2);
    for (std::size_t i = 0; i < n; ++i) CHECK(o1[i] == (mask[i] != 0.0f ? known[i] : fill[i]));

    auto grad = random_vec(n, rng);
    auto p1 = random_vec(n, rng), m1 = random_vec(n, rng, -0.1, 0.1), v1 = random_vec(n, rng, 0.0, 0.1);
    auto p2 = p1, m2 = m1, v2 = v1;
    ref.adam(p1.data(), grad.data(), m1.data(), v1.data(), n, 1e-3f, 0.9f, 0.999f, 1e-8f);
    vec.adam(p2.data(), grad.data(), m2.data(), v2.data(), n, 1e-3f, 0.9f, 0.999f, 1e-8f);
    CHECK(p1 == p2);
    CHECK(m1 == m2);
    CHECK(v1 == v2);

    ref.rmsprop(p1.data(), grad.data(), v1.data(), n, 1e-4f, 0.9f, 1e-8f);
    vec.rmsprop(p2.data(), grad.data(), v2.data(), n, 1e-4f, 0.9f, 1e-8f);
    CHECK(p1 == p2);
    CHECK(v1 == v2);

    ref.axpy(n, -0.3f, grad.data(), p1.data());
    vec.axpy(n, -0.3f, grad.data(), p2.data());
    CHECK(p1 == p2);

    const double s1 = ref.sum_abs_diff(known.data(), fill.data(), n);
    const double s2 = vec.sum_abs_diff(known.data(), fill.data(), n);
    CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
  }
}

TEST_CASE("dispatch honours explicit selection") {
  const auto before = simd::kernels().isa;
  simd::set_active_isa(Isa::scalar);
  CHECK(simd::kernels().isa == Isa::scalar);
  simd::set_active_isa(before);
  CHECK(simd::kernels().isa == before);
  CHECK(simd::isa_name(Isa::avx2) == "avx2");
}
