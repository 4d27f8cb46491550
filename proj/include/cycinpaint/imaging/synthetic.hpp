#pragma once

#include <cstdint>
#include <vector>

#include "cycinpaint/imaging/image.hpp"

namespace cycinpaint::imaging {

/// Procedural face-like portraits: textured background, skin ellipse, hair,
/// eyes, brows, nose, mouth, and optional beard or glasses. Used as the
/// desk-scale training corpus; deterministic in (seed, index).
Image synthetic_face(int size, std::uint64_t seed, std::uint64_t index);

std::vector<Image> synthetic_faces(int count, int size, std::uint64_t seed);

}  // namespace cycinpaint::imaging
