#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace cycinpaint::models {

/// Shapes and widths of all four networks.
struct ArchConfig {
  /// Generator, encoder and artifact-discriminator resolution.
  int resolution = 64;
  int latent_dim = 128;
  /// Generator/encoder width at full resolution; doubles per halving up to max_channels.
  int base_channels = 32;
  int max_channels = 256;
  std::vector<int> disc_channels = {64, 128, 256};
  float disc_dropout = 0.5f;
  int refiner_resolution = 128;
  /// Conv1..Conv6 widths; the decoder mirrors them.
  std::vector<int> refiner_channels = {64, 128, 256, 512, 512, 512};

  /// Throws ConfigError naming the offending field.
  void validate() const;
  /// Generator/encoder channels at spatial size `size`.
  int channels_at(int size) const;

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

nlohmann::json to_json(const ArchConfig& a);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
ArchConfig arch_from_json(const nlohmann::json& j);

}  // namespace cycinpaint::models
