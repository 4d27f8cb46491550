#pragma once

#include "cycinpaint/imaging/image.hpp"

namespace cycinpaint::imaging {

/// Next cycle input: original where the mask is known, previous result in the hole.
Image compose_cycle_input(const Image& original, const Mask& mask, const Image& previous);

/// Refined output: coarse result where known, refiner output in the hole.
Image compose_refined(const Image& coarse, const Mask& mask, const Image& refiner_out);

/// Shared selection primitive: known-region pixels from `known`, hole from `fill`.
/// Exact (no arithmetic), so the known region is bit-identical to `known`.
Image composite(const Image& known, const Mask& mask, const Image& fill);

}  // namespace cycinpaint::imaging
