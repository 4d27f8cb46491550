#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "cycinpaint/core/tensor.hpp"

namespace cycinpaint::imaging {

/// H x W x 3 image in the canonical [-1, 1] range, stored planar as a
/// [1, 3, H, W] tensor so it feeds networks without conversion.
class Image {
 public:
  Image() = default;
  Image(int height, int width, float fill = 0.0f);
  /// Takes a [1,3,H,W] tensor; throws ShapeError on other shapes and
  /// FormatError when any value leaves [-1, 1].
  explicit Image(Tensor pixels);
  /// Like the tensor constructor but clamps into range instead of throwing.
  static Image clamped(Tensor pixels);

  int height() const { return pixels_.h(); }
  int width() const { return pixels_.w(); }
  bool empty() const { return pixels_.empty(); }
  const Tensor& tensor() const { return pixels_; }

  float at(int y, int x, int c) const { return pixels_.at(0, c, y, x); }
  /// Writes one element; the value must already be in range.
  void set(int y, int x, int c, float v);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  Tensor pixels_;
};

/// Binary H x W map; 1 marks known pixels, 0 marks the hole to fill.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, float fill);
  /// Takes a [1,1,H,W] tensor of exact zeros and ones.
  explicit Mask(Tensor values);
  static Mask ones(int height, int width) { return Mask(height, width, 1.0f); }
  static Mask zeros(int height, int width) { return Mask(height, width, 0.0f); }

  int height() const { return values_.h(); }
  int width() const { return values_.w(); }
  const Tensor& tensor() const { return values_; }
  bool known(int y, int x) const { return values_.at(0, 0, y, x) != 0.0f; }
  void set(int y, int x, bool known) { values_.at(0, 0, y, x) = known ? 1.0f : 0.0f; }

  std::size_t hole_pixels() const;
  double hole_fraction() const;

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  Tensor values_;
};

/// User strokes drawn inside a hole: colour plus coverage alpha in [0, 1].
struct Sketch {
  Image color;
  Tensor alpha;  // [1,1,H,W]

  int height() const { return color.height(); }
  int width() const { return color.width(); }
  /// Copy with alpha forced to zero wherever `mask` marks a known pixel.
  Sketch clipped_to(const Mask& mask) const;
};

enum class FillKind { mean, zero_mean_noise, constant, sketch };

std::string_view fill_kind_name(FillKind kind);
/// Accepts mean, noise, zero_mean_noise, constant, sketch.
FillKind parse_fill_kind(std::string_view name);

inline constexpr double kDefaultNoiseSigma = 0.25;

/// Rule for the initial hole content. Build with the factory helpers;
/// validate() enforces that exactly the fields required by `kind` are set.
struct FillPolicy {
  FillKind kind = FillKind::mean;
  std::optional<std::array<float, 3>> constant_color;
  std::optional<double> noise_sigma;
  std::optional<Sketch> sketch;
  std::uint64_t rng_seed = 0;

  static FillPolicy mean();
  static FillPolicy noise(double sigma = kDefaultNoiseSigma, std::uint64_t seed = 0);
  static FillPolicy constant(std::array<float, 3> color);
  static FillPolicy white() { return constant({1.0f, 1.0f, 1.0f}); }
  static FillPolicy black() { return constant({-1.0f, -1.0f, -1.0f}); }
  static FillPolicy with_sketch(Sketch s);

  /// Throws ConfigError naming the missing or superfluous field.
  void validate() const;
};

void require_same_size(const Image& img, const Mask& m, const char* what);
void require_same_size(const Image& a, const Image& b, const char* what);

}  // namespace cycinpaint::imaging
