#include "cycinpaint/imaging/fill.hpp"

#include <algorithm>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/core/rng.hpp"

namespace cycinpaint::imaging {

std::array<double, 3> known_region_mean(const Image& img, const Mask& mask) {
  require_same_size(img, mask, "known_region_mean");
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  std::size_t count = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask.known(y, x)) continue;
      ++count;
      for (int c = 0; c < 3; ++c) sum[c] += img.at(y, x, c);
    }
  }
  if (count == 0) throw DegenerateInputError("mean fill needs at least one known pixel");
  for (auto& s : sum) s /= static_cast<double>(count);
  return sum;
}

Image apply_fill(const Image& original, const Mask& mask, const FillPolicy& policy) {
  require_same_size(original, mask, "apply_fill");
  policy.validate();
  if (policy.kind == FillKind::sketch &&
      (policy.sketch->height() != original.height() || policy.sketch->width() != original.width())) {
    throw ShapeError("apply_fill: sketch size differs from image");
  }

  Tensor out = original.tensor();
  auto hole_value = [&](int y, int x, int c, Rng* rng, const std::array<double, 3>& mu) -> float {
    switch (policy.kind) {
      case FillKind::mean:
        return static_cast<float>(mu[c]);
      case FillKind::zero_mean_noise:
        return static_cast<float>(std::clamp(rng->normal(0.0, *policy.noise_sigma), -1.0, 1.0));
      case FillKind::constant:
        return (*policy.constant_color)[c];
      case FillKind::sketch: {
        const Sketch& s = *policy.sketch;
        const float a = s.alpha.at(0, 0, y, x);
        constexpr float kBase = 0.0f;
        return a > 0.0f ? a * s.color.at(y, x, c) + (1.0f - a) * kBase : kBase;
      }
    }
    return 0.0f;
  };

  std::array<double, 3> mu{};
  if (policy.kind == FillKind::mean) mu = known_region_mean(original, mask);
  Rng rng(policy.rng_seed);
  for (int y = 0; y < original.height(); ++y) {
    for (int x = 0; x < original.width(); ++x) {
      if (mask.known(y, x)) continue;
      for (int c = 0; c < 3; ++c) out.at(0, c, y, x) = hole_value(y, x, c, &rng, mu);
    }
  }
  return Image::clamped(std::move(out));
}

}  // namespace cycinpaint::imaging
