#include "cycinpaint/imaging/compose.hpp"

#include "cycinpaint/simd/kernels.hpp"

namespace cycinpaint::imaging {

Image composite(const Image& known, const Mask& mask, const Image& fill) {
  require_same_size(known, mask, "composite");
  require_same_size(known, fill, "composite");
  Tensor out(known.tensor().shape());
  const std::size_t plane = known.tensor().shape().plane();
  const auto& k = simd::kernels();
  for (int c = 0; c < 3; ++c) {
    k.select(mask.tensor().data(), known.tensor().data() + c * plane,
             fill.tensor().data() + c * plane, out.data() + c * plane, plane);
  }
  return Image(std::move(out));
}

Image compose_cycle_input(const Image& original, const Mask& mask, const Image& previous) {
  return composite(original, mask, previous);
}

Image compose_refined(const Image& coarse, const Mask& mask, const Image& refiner_out) {
  return composite(coarse, mask, refiner_out);
}

}  // namespace cycinpaint::imaging
