#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cycinpaint/imaging/image.hpp"
#include "cycinpaint/models/networks.hpp"

namespace cycinpaint::models {

using imaging::Image;
using LatentCode = std::vector<float>;

inline constexpr int kBundleFormatVersion = 1;

/// The four trained networks plus their configuration. Any network may be
/// absent (for example before its training stage has run).
struct ModelBundle {
  ArchConfig arch;
  std::string version = "0.1.0";
  nlohmann::json training_meta = nlohmann::json::object();
  std::unique_ptr<Generator> generator;
  std::unique_ptr<Encoder> encoder;
  std::unique_ptr<ArtifactDiscriminator> discriminator;
  std::unique_ptr<Refiner> refiner;

  /// Freshly initialized networks from `arch` with weights drawn from `seed`.
  static ModelBundle create(const ArchConfig& arch, std::uint64_t seed, bool with_refiner = true);
  /// Puts every present network into inference mode.
  void set_inference();
};

LatentCode generate_latent(int dim, std::uint64_t seed);

/// Inference-mode single-sample wrappers; throw ShapeError on wrong sizes.
Image generate(const Generator& g, const LatentCode& z);
LatentCode encode(const Encoder& e, const Image& img);
double discriminate(const ArtifactDiscriminator& d, const Image& img);
Image refine(const Refiner& u, const Image& img);

std::size_t count_params(const nn::Module& net);

/// Writes magic line, header length, JSON header and little-endian f32 payload.
void save_bundle(ModelBundle& b, const std::filesystem::path& path);
/// Throws CheckpointError for unreadable, corrupt or mismatched files, and
/// when `expected_resolution` is given but differs from the stored arch.
/// Parses only the JSON header (arch, version, network table); CheckpointError when unreadable.
nlohmann::json read_bundle_header(const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path, std::optional<int> expected_resolution = std::nullopt);

}  // namespace cycinpaint::models
