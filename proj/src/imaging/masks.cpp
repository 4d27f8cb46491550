#include "cycinpaint/imaging/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/core/rng.hpp"

namespace cycinpaint::imaging {
namespace {

void check_coverage(double v, const char* field) {
  if (!(v > 0.0 && v <= 0.9)) {
    throw ConfigError(std::string(field) + " must lie in (0, 0.9], got " + std::to_string(v));
  }
}

Mask rectangular(const MaskSpec& spec, Rng& rng) {
  RectSpec r;
  if (spec.rect) {
    r = *spec.rect;
    if (r.height <= 0 || r.width <= 0 || r.top < 0 || r.left < 0 || r.top + r.height > spec.size ||
        r.left + r.width > spec.size) {
      throw ConfigError("rectangle lies outside the " + std::to_string(spec.size) + " px image");
    }
    check_coverage(static_cast<double>(r.height) * r.width / (static_cast<double>(spec.size) * spec.size),
                   "rectangle coverage");
  } else {
    check_coverage(spec.rect_coverage, "rect_coverage");
    const double area = spec.rect_coverage * spec.size * spec.size;
    const double aspect = std::exp(rng.uniform(-0.4, 0.4));
    r.height = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 1, spec.size);
    r.width = std::clamp(static_cast<int>(std::lround(area / r.height)), 1, spec.size);
    r.top = static_cast<int>(rng.uniform_int(0, spec.size - r.height));
    r.left = static_cast<int>(rng.uniform_int(0, spec.size - r.width));
  }
  Mask m = Mask::ones(spec.size, spec.size);
  for (int y = r.top; y < r.top + r.height; ++y) {
    for (int x = r.left; x < r.left + r.width; ++x) m.set(y, x, false);
  }
  return m;
}

void stamp_disk(Mask& m, double cy, double cx, double radius, std::size_t& holes) {
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y1 = std::min(m.height() - 1, static_cast<int>(std::ceil(cy + radius)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x1 = std::min(m.width() - 1, static_cast<int>(std::ceil(cx + radius)));
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dy = y + 0.5 - cy;
      const double dx = x + 0.5 - cx;
      if (dy * dy + dx * dx <= r2 && m.known(y, x)) {
        m.set(y, x, false);
        ++holes;
      }
    }
  }
}

Mask brush(const MaskSpec& spec, Rng& rng) {
  const BrushSpec& b = spec.brush;
  check_coverage(b.coverage_lo, "coverage_lo");
  check_coverage(b.coverage_hi, "coverage_hi");
  if (b.coverage_lo > b.coverage_hi) throw ConfigError("coverage_lo exceeds coverage_hi");
  const double scale = spec.size / 64.0;
  const double rmin = b.radius_min.value_or(5.0 * scale);
  const double rmax = b.radius_max.value_or(15.0 * scale);
  if (!(rmin > 0.0) || rmax < rmin) throw ConfigError("invalid brush radius range");
  if (b.max_vertices < 1 || b.max_attempts < 1) throw ConfigError("brush needs at least one vertex and attempt");

  const double total = static_cast<double>(spec.size) * spec.size;
  const double s = spec.size;
  for (int attempt = 0; attempt < b.max_attempts; ++attempt) {
    Mask m = Mask::ones(spec.size, spec.size);
    std::size_t holes = 0;
    bool overshoot = false;
    while (!overshoot && holes < b.coverage_lo * total) {
      double y = rng.uniform(0.0, s);
      double x = rng.uniform(0.0, s);
      double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double radius = rng.uniform(rmin, rmax);
      const int vertices = static_cast<int>(rng.uniform_int(1, b.max_vertices));
      stamp_disk(m, y, x, radius, holes);
      for (int v = 0; v < vertices && !overshoot; ++v) {
        heading += rng.uniform(-b.max_turn, b.max_turn);
        const double length = rng.uniform(radius, 3.0 * radius);
        const int steps = std::max(1, static_cast<int>(std::ceil(length / (0.5 * radius))));
        const double ny = std::clamp(y + length * std::sin(heading), 0.0, s);
        const double nx = std::clamp(x + length * std::cos(heading), 0.0, s);
        for (int k = 1; k <= steps; ++k) {
          const double t = static_cast<double>(k) / steps;
          stamp_disk(m, y + (ny - y) * t, x + (nx - x) * t, radius, holes);
        }
        y = ny;
        x = nx;
        const double frac = holes / total;
        if (frac > b.coverage_hi) overshoot = true;
        else if (frac >= b.coverage_lo) return m;
      }
    }
    if (!overshoot) return m;
  }
  throw GenerationError("irregular mask could not reach coverage [" + std::to_string(b.coverage_lo) + ", " +
                        std::to_string(b.coverage_hi) + "] in " + std::to_string(b.max_attempts) + " attempts");
}

}  // namespace

Mask gen_mask(const MaskSpec& spec, std::uint64_t seed) {
  if (spec.size < 1) throw ConfigError("mask size must be positive");
  Rng rng(seed);
  return spec.kind == MaskKind::rectangular ? rectangular(spec, rng) : brush(spec, rng);
}

}  // namespace cycinpaint::imaging
