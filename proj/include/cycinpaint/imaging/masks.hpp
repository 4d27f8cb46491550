#pragma once

#include <cstdint>
#include <optional>

#include "cycinpaint/imaging/image.hpp"

namespace cycinpaint::imaging {

enum class MaskKind { rectangular, irregular_brush };

struct RectSpec {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

struct BrushSpec {
  double coverage_lo = 0.10;
  double coverage_hi = 0.25;
  /// Stroke radius range in pixels; defaults scale 5-15 px at 64 px linearly.
  std::optional<double> radius_min;
  std::optional<double> radius_max;
  /// Largest heading change between successive stroke segments (radians).
  double max_turn = 1.0;
  int max_vertices = 10;
  int max_attempts = 200;
};

struct MaskSpec {
  MaskKind kind = MaskKind::rectangular;
  int size = 64;
  /// Explicit rectangle; when absent a random one covering `rect_coverage` is drawn.
  std::optional<RectSpec> rect;
  double rect_coverage = 0.25;
  BrushSpec brush;
};

/// Seeded mask generator. Throws ConfigError for coverage outside (0, 0.9]
/// or rectangles outside the image, GenerationError when brush strokes cannot
/// hit the requested coverage band within the attempt budget.
Mask gen_mask(const MaskSpec& spec, std::uint64_t seed);

}  // namespace cycinpaint::imaging
