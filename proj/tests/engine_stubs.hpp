#pragma once

#include <vector>

#include "cycinpaint/engine/engine.hpp"

namespace stubs {

using cycinpaint::engine::Image;
using cycinpaint::engine::LatentCode;

/// Generator that always returns a fixed image; scores are replayed from a
/// script (cycled), and the refiner inverts pixel values.
class FixedModels : public cycinpaint::engine::Models {
 public:
  FixedModels(Image output, std::vector<double> script = {}, int refiner_res = 0)
      : output_(std::move(output)), script_(std::move(script)), refiner_res_(refiner_res) {}

  int resolution() const override { return output_.height(); }
  LatentCode encode(const Image& img) const override {
    ++encodes;
    double s = 0.0;
    for (float v : img.tensor().span()) s += v;
    return {static_cast<float>(s)};
  }
  Image generate(const LatentCode&) const override { return output_; }
  bool has_discriminator() const override { return !script_.empty(); }
  double score(const Image&) const override { return script_[calls_++ % script_.size()]; }
  bool has_refiner() const override { return refiner_res_ > 0; }
  int refiner_resolution() const override { return refiner_res_; }
  Image refine(const Image& img) const override {
    cycinpaint::Tensor t = img.tensor();
    for (auto& v : t.span()) v = -v;
    return Image(std::move(t));
  }

  mutable int encodes = 0;

 private:
  Image output_;
  std::vector<double> script_;
  mutable std::size_t calls_ = 0;
  int refiner_res_;
};

/// Illustrative ten-cycle score curve peaking at 0.909 on the 8th cycle.
inline const std::vector<double> kPeakScores = {0.412, 0.587, 0.701, 0.768, 0.842,
                                                0.871, 0.895, 0.909, 0.887, 0.902};

}  // namespace stubs
