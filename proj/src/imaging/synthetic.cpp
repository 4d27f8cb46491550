#include "cycinpaint/imaging/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/core/rng.hpp"

namespace cycinpaint::imaging {
namespace {

using Rgb = std::array<double, 3>;

/// Canvas in [0, 1] with soft-edged shape painting.
class Canvas {
 public:
  explicit Canvas(int size) : size_(size), px_(static_cast<std::size_t>(size) * size * 3, 0.0) {}

  Rgb get(int y, int x) const {
    const std::size_t i = (static_cast<std::size_t>(y) * size_ + x) * 3;
    return {px_[i], px_[i + 1], px_[i + 2]};
  }
  void blend(int y, int x, const Rgb& c, double a) {
    const std::size_t i = (static_cast<std::size_t>(y) * size_ + x) * 3;
    for (int k = 0; k < 3; ++k) px_[i + k] += (c[k] - px_[i + k]) * a;
  }

  /// Ellipse in unit coordinates (centre cy, cx; radii ry, rx), rotated by `angle`.
  template <typename ColorFn>
  void ellipse(double cy, double cx, double ry, double rx, double angle, ColorFn color, double feather = 1.0) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double pix = 1.0 / size_;
    for (int y = 0; y < size_; ++y) {
      for (int x = 0; x < size_; ++x) {
        const double py = (y + 0.5) * pix - cy;
        const double px = (x + 0.5) * pix - cx;
        const double u = (px * ca + py * sa) / rx;
        const double v = (-px * sa + py * ca) / ry;
        const double d = std::sqrt(u * u + v * v);
        const double edge = feather * pix / std::min(rx, ry);
        const double a = std::clamp((1.0 - d) / edge + 0.5, 0.0, 1.0);
        if (a > 0.0) blend(y, x, color(u, v), a);
      }
    }
  }

  void ellipse(double cy, double cx, double ry, double rx, double angle, const Rgb& c, double feather = 1.0) {
    ellipse(cy, cx, ry, rx, angle, [&](double, double) { return c; }, feather);
  }

  void rect(double y0, double x0, double y1, double x1, const Rgb& c) {
    for (int y = 0; y < size_; ++y) {
      for (int x = 0; x < size_; ++x) {
        const double py = (y + 0.5) / size_, px = (x + 0.5) / size_;
        if (py >= y0 && py <= y1 && px >= x0 && px <= x1) blend(y, x, c, 1.0);
      }
    }
  }

  Image to_image(Rng& rng, double noise) const {
    Tensor t(Shape{1, 3, size_, size_});
    for (int y = 0; y < size_; ++y) {
      for (int x = 0; x < size_; ++x) {
        const Rgb c = get(y, x);
        const double n = rng.normal(0.0, noise);
        for (int k = 0; k < 3; ++k) {
          const double v = std::clamp(c[k] + n + rng.normal(0.0, noise * 0.3), 0.0, 1.0);
          t.at(0, k, y, x) = static_cast<float>(2.0 * v - 1.0);
        }
      }
    }
    return Image(std::move(t));
  }

  int size() const { return size_; }

 private:
  int size_;
  std::vector<double> px_;
};

Rgb jitter(Rgb c, Rng& rng, double amount) {
  for (auto& v : c) v = std::clamp(v + rng.uniform(-amount, amount), 0.0, 1.0);
  return c;
}

Rgb scaled(const Rgb& c, double f) { return {c[0] * f, c[1] * f, c[2] * f}; }

}  // namespace

Image synthetic_face(int size, std::uint64_t seed, std::uint64_t index) {
  if (size < 8) throw ConfigError("synthetic faces need at least 8 px");
  Rng rng(Rng::derive(seed, index));
  Canvas cv(size);

  // Background: vertical gradient between two random colours.
  const Rgb bg_top = {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
  const Rgb bg_bot = jitter(bg_top, rng, 0.3);
  for (int y = 0; y < size; ++y) {
    const double t = (y + 0.5) / size;
    Rgb c;
    for (int k = 0; k < 3; ++k) c[k] = bg_top[k] + (bg_bot[k] - bg_top[k]) * t;
    for (int x = 0; x < size; ++x) cv.blend(y, x, c, 1.0);
  }

  static constexpr std::array<Rgb, 5> skins = {{
      {0.96, 0.80, 0.69}, {0.90, 0.70, 0.55}, {0.78, 0.57, 0.42}, {0.55, 0.38, 0.26}, {0.38, 0.25, 0.17}}};
  static constexpr std::array<Rgb, 5> hairs = {{
      {0.08, 0.06, 0.05}, {0.30, 0.18, 0.10}, {0.55, 0.38, 0.20}, {0.85, 0.72, 0.45}, {0.60, 0.60, 0.60}}};
  const Rgb skin = jitter(skins[rng.uniform_int(0, 4)], rng, 0.04);
  const Rgb hair = jitter(hairs[rng.uniform_int(0, 4)], rng, 0.05);

  const double cx = 0.5 + rng.uniform(-0.04, 0.04);
  const double cy = 0.54 + rng.uniform(-0.03, 0.03);
  const double ry = rng.uniform(0.30, 0.36);
  const double rx = ry * rng.uniform(0.72, 0.85);
  const double tilt = rng.uniform(-0.12, 0.12);

  // Shoulders and neck.
  const Rgb shirt = {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
  cv.ellipse(1.05, cx, 0.22, 0.48, 0.0, shirt);
  cv.rect(cy + ry * 0.6, cx - rx * 0.45, 1.0, cx + rx * 0.45, scaled(skin, 0.85));

  // Hair mass behind the head.
  const double hair_len = rng.uniform(0.0, 1.0);
  cv.ellipse(cy - ry * 0.15 + hair_len * 0.1, cx, ry * (1.05 + 0.25 * hair_len), rx * 1.18, tilt, hair);

  // Face with simple shading towards the edges.
  cv.ellipse(cy, cx, ry, rx, tilt, [&](double u, double v) {
    const double shade = 1.0 - 0.18 * (u * u + v * v) + 0.05 * u;
    return scaled(skin, shade);
  });

  // Fringe.
  cv.ellipse(cy - ry * 0.88, cx, ry * rng.uniform(0.25, 0.45), rx * 1.02, tilt, hair);

  // Eyes, pupils and brows.
  const double eye_y = cy - ry * 0.12;
  const double eye_dx = rx * rng.uniform(0.38, 0.46);
  const double eye_r = ry * rng.uniform(0.08, 0.11);
  const Rgb iris = jitter(Rgb{0.25, 0.35, 0.45}, rng, 0.2);
  const bool glasses = rng.bernoulli(0.25);
  for (const double side : {-1.0, 1.0}) {
    const double ex = cx + side * eye_dx;
    cv.ellipse(eye_y, ex, eye_r * 0.75, eye_r * 1.3, tilt, Rgb{0.95, 0.95, 0.95});
    cv.ellipse(eye_y, ex, eye_r * 0.6, eye_r * 0.6, 0.0, iris);
    cv.ellipse(eye_y, ex, eye_r * 0.3, eye_r * 0.3, 0.0, Rgb{0.03, 0.03, 0.03});
    cv.ellipse(eye_y - eye_r * 1.9, ex, eye_r * 0.3, eye_r * 1.6, tilt - side * 0.15, scaled(hair, 0.8));
    if (glasses) cv.ellipse(eye_y, ex, eye_r * 1.8, eye_r * 2.0, 0.0, Rgb{0.05, 0.05, 0.05});
  }
  if (glasses) {
    // Redraw the eyes over the glass interior.
    for (const double side : {-1.0, 1.0}) {
      const double ex = cx + side * eye_dx;
      cv.ellipse(eye_y, ex, eye_r * 1.45, eye_r * 1.6, 0.0, scaled(skin, 0.97));
      cv.ellipse(eye_y, ex, eye_r * 0.75, eye_r * 1.3, tilt, Rgb{0.95, 0.95, 0.95});
      cv.ellipse(eye_y, ex, eye_r * 0.6, eye_r * 0.6, 0.0, iris);
      cv.ellipse(eye_y, ex, eye_r * 0.3, eye_r * 0.3, 0.0, Rgb{0.03, 0.03, 0.03});
    }
    cv.rect(eye_y - eye_r * 0.15, cx - eye_dx + eye_r * 1.8, eye_y + eye_r * 0.15, cx + eye_dx - eye_r * 1.8,
            Rgb{0.05, 0.05, 0.05});
  }

  // Nose.
  cv.ellipse(cy + ry * 0.15, cx, ry * 0.16, rx * 0.09, tilt, scaled(skin, 0.82));

  // Beard.
  if (rng.bernoulli(0.3)) {
    cv.ellipse(cy + ry * 0.62, cx, ry * 0.42, rx * 0.85, tilt, [&](double u, double v) {
      return v < -0.3 ? scaled(skin, 1.0) : scaled(hair, 0.9 + 0.1 * u);
    });
  }

  // Mouth.
  const Rgb lips = jitter(Rgb{0.70, 0.30, 0.30}, rng, 0.08);
  const double smile = rng.uniform(0.0, 1.0);
  cv.ellipse(cy + ry * 0.48, cx, ry * (0.05 + 0.04 * smile), rx * rng.uniform(0.28, 0.4), tilt, lips);

  return cv.to_image(rng, 0.015);
}

std::vector<Image> synthetic_faces(int count, int size, std::uint64_t seed) {
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(synthetic_face(size, seed, static_cast<std::uint64_t>(i)));
  return out;
}

}  // namespace cycinpaint::imaging
