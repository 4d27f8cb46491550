#pragma once

// Central-difference gradient checker for autograd ops (test-only).

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cycinpaint/core/rng.hpp"
#include "cycinpaint/nn/autograd.hpp"
#include "cycinpaint/nn/ops.hpp"

namespace cycinpaint::testing {

inline Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (auto& v : t.span()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

/// Worst error over all leaves of |analytic - numeric| / max(1, |numeric|)
/// for the scalar probe L = sum(r * f(leaves)) with a fixed random r.
inline double grad_error(const std::function<nn::Var(const std::vector<nn::Var>&)>& f,
                         std::vector<Tensor> leaves, std::uint64_t seed = 3, double step = 1e-2) {
  std::vector<nn::Var> vars;
  for (auto& t : leaves) vars.emplace_back(t, true);
  nn::Var out = f(vars);
  Rng rng(seed);
  const Tensor probe = random_tensor(out.shape(), rng);
  const bool scalar_out = out.value().size() == 1;
  auto loss_of = [&](const nn::Var& y) {
    return scalar_out ? y : nn::sum(nn::mul(y, nn::Var(probe)));
  };
  loss_of(out).backward();

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    const Tensor analytic = vars[li].grad().empty() ? Tensor(leaves[li].shape()) : vars[li].grad();
    for (std::size_t i = 0; i < leaves[li].size(); ++i) {
      auto eval = [&](double delta) {
        nn::NoGradGuard guard;
        std::vector<nn::Var> shifted;
        for (std::size_t j = 0; j < leaves.size(); ++j) {
          Tensor t = leaves[j];
          if (j == li) t[i] = static_cast<float>(t[i] + delta);
          shifted.emplace_back(std::move(t));
        }
        nn::Var y = f(shifted);
        double acc = 0.0;
        for (std::size_t k = 0; k < y.value().size(); ++k) {
          acc += (scalar_out ? 1.0 : static_cast<double>(probe[k])) * y.value()[k];
        }
        return acc;
      };
      const double numeric = (eval(step) - eval(-step)) / (2.0 * step);
      const double err = std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace cycinpaint::testing
