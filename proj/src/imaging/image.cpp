#include "cycinpaint/imaging/image.hpp"

#include <algorithm>
#include <cmath>

#include "cycinpaint/core/errors.hpp"

namespace cycinpaint::imaging {

Image::Image(int height, int width, float fill) : pixels_(Shape{1, 3, height, width}, fill) {
  if (fill < -1.0f || fill > 1.0f) throw FormatError("image fill value outside [-1, 1]");
}

Image::Image(Tensor pixels) : pixels_(std::move(pixels)) {
  if (pixels_.n() != 1 || pixels_.c() != 3) {
    throw ShapeError("image tensor must be [1,3,H,W], got " + pixels_.shape().str());
  }
  for (float v : pixels_.span()) {
    if (!(v >= -1.0f && v <= 1.0f)) throw FormatError("image value outside [-1, 1]");
  }
}

Image Image::clamped(Tensor pixels) {
  for (auto& v : pixels.span()) v = std::isnan(v) ? 0.0f : std::clamp(v, -1.0f, 1.0f);
  return Image(std::move(pixels));
}

void Image::set(int y, int x, int c, float v) {
  if (!(v >= -1.0f && v <= 1.0f)) throw FormatError("image value outside [-1, 1]");
  pixels_.at(0, c, y, x) = v;
}

Mask::Mask(int height, int width, float fill) : values_(Shape{1, 1, height, width}, fill) {
  if (fill != 0.0f && fill != 1.0f) throw FormatError("mask values must be 0 or 1");
}

Mask::Mask(Tensor values) : values_(std::move(values)) {
  if (values_.n() != 1 || values_.c() != 1) {
    throw ShapeError("mask tensor must be [1,1,H,W], got " + values_.shape().str());
  }
  for (float v : values_.span()) {
    if (v != 0.0f && v != 1.0f) throw FormatError("mask values must be 0 or 1");
  }
}

std::size_t Mask::hole_pixels() const {
  return static_cast<std::size_t>(std::count(values_.span().begin(), values_.span().end(), 0.0f));
}

double Mask::hole_fraction() const {
  return values_.empty() ? 0.0 : static_cast<double>(hole_pixels()) / static_cast<double>(values_.size());
}

Sketch Sketch::clipped_to(const Mask& mask) const {
  if (mask.height() != height() || mask.width() != width()) {
    throw ShapeError("sketch and mask sizes differ");
  }
  Sketch out = *this;
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      if (mask.known(y, x)) out.alpha.at(0, 0, y, x) = 0.0f;
    }
  }
  return out;
}

std::string_view fill_kind_name(FillKind kind) {
  switch (kind) {
    case FillKind::mean:
      return "mean";
    case FillKind::zero_mean_noise:
      return "zero_mean_noise";
    case FillKind::constant:
      return "constant";
    case FillKind::sketch:
      return "sketch";
  }
  return "?";
}

FillKind parse_fill_kind(std::string_view name) {
  if (name == "mean") return FillKind::mean;
  if (name == "noise" || name == "zero_mean_noise") return FillKind::zero_mean_noise;
  if (name == "constant") return FillKind::constant;
  if (name == "sketch") return FillKind::sketch;
  throw ConfigError("unknown fill kind '" + std::string(name) + "'");
}

FillPolicy FillPolicy::mean() { return FillPolicy{}; }

FillPolicy FillPolicy::noise(double sigma, std::uint64_t seed) {
  FillPolicy p;
  p.kind = FillKind::zero_mean_noise;
  p.noise_sigma = sigma;
  p.rng_seed = seed;
  return p;
}

FillPolicy FillPolicy::constant(std::array<float, 3> color) {
  FillPolicy p;
  p.kind = FillKind::constant;
  p.constant_color = color;
  return p;
}

FillPolicy FillPolicy::with_sketch(Sketch s) {
  FillPolicy p;
  p.kind = FillKind::sketch;
  p.sketch = std::move(s);
  return p;
}

void FillPolicy::validate() const {
  const bool need_color = kind == FillKind::constant;
  const bool need_sigma = kind == FillKind::zero_mean_noise;
  const bool need_sketch = kind == FillKind::sketch;
  const std::string k(fill_kind_name(kind));
  if (need_color != constant_color.has_value()) {
    throw ConfigError(need_color ? "fill=constant requires constant_color"
                                 : "constant_color is only valid with fill=constant, not " + k);
  }
  if (need_sigma != noise_sigma.has_value()) {
    throw ConfigError(need_sigma ? "fill=zero_mean_noise requires noise_sigma"
                                 : "noise_sigma is only valid with fill=zero_mean_noise, not " + k);
  }
  if (need_sketch != sketch.has_value()) {
    throw ConfigError(need_sketch ? "fill=sketch requires a sketch"
                                  : "a sketch is only valid with fill=sketch, not " + k);
  }
  if (constant_color) {
    for (float v : *constant_color) {
      if (!(v >= -1.0f && v <= 1.0f)) throw ConfigError("constant_color components must lie in [-1, 1]");
    }
  }
  if (noise_sigma && !(*noise_sigma > 0.0)) throw ConfigError("noise_sigma must be > 0");
}

void require_same_size(const Image& img, const Mask& m, const char* what) {
  if (img.height() != m.height() || img.width() != m.width()) {
    throw ShapeError(std::string(what) + ": image " + std::to_string(img.width()) + "x" +
                     std::to_string(img.height()) + " vs mask " + std::to_string(m.width()) + "x" +
                     std::to_string(m.height()));
  }
}

void require_same_size(const Image& a, const Image& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeError(std::string(what) + ": image sizes " + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()));
  }
}

}  // namespace cycinpaint::imaging
