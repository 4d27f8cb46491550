#pragma once

#include "cycinpaint/imaging/image.hpp"

namespace cycinpaint::imaging {

/// Initial cycle input: known region copied from `original`, hole filled per
/// `policy`. Throws DegenerateInputError for a mean fill with no known pixels.
Image apply_fill(const Image& original, const Mask& mask, const FillPolicy& policy);

/// Per-channel mean over known pixels.
std::array<double, 3> known_region_mean(const Image& img, const Mask& mask);

}  // namespace cycinpaint::imaging
