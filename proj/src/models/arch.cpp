#include "cycinpaint/models/arch.hpp"

#include <algorithm>
#include <set>

#include "cycinpaint/core/errors.hpp"

namespace cycinpaint::models {
namespace {

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

void ArchConfig::validate() const {
  if (resolution < 32 || !power_of_two(resolution)) {
    throw ConfigError("resolution must be a power of two >= 32, got " + std::to_string(resolution));
  }
  if (latent_dim < 1) throw ConfigError("latent_dim must be positive");
  if (base_channels < 1 || max_channels < base_channels) {
    throw ConfigError("base_channels must be positive and not exceed max_channels");
  }
  if (disc_channels.empty() || std::any_of(disc_channels.begin(), disc_channels.end(), [](int c) { return c < 1; })) {
    throw ConfigError("disc_channels must list positive widths");
  }
  if (!(disc_dropout >= 0.0f && disc_dropout < 1.0f)) throw ConfigError("disc_dropout must lie in [0, 1)");
  if (refiner_resolution < 128 || refiner_resolution % 128 != 0) {
    throw ConfigError("refiner_resolution must be a multiple of 128, got " + std::to_string(refiner_resolution));
  }
  if (refiner_channels.size() != 6 ||
      std::any_of(refiner_channels.begin(), refiner_channels.end(), [](int c) { return c < 1; })) {
    throw ConfigError("refiner_channels must list six positive widths");
  }
}

int ArchConfig::channels_at(int size) const {
  long c = base_channels;
  for (int s = resolution; s > size && c < max_channels; s /= 2) c *= 2;
  return static_cast<int>(std::min<long>(c, max_channels));
}

nlohmann::json to_json(const ArchConfig& a) {
  nlohmann::ordered_json j;
  j["resolution"] = a.resolution;
  j["latent_dim"] = a.latent_dim;
  j["base_channels"] = a.base_channels;
  j["max_channels"] = a.max_channels;
  j["disc_channels"] = a.disc_channels;
  j["disc_dropout"] = a.disc_dropout;
  j["refiner_resolution"] = a.refiner_resolution;
  j["refiner_channels"] = a.refiner_channels;
  return j;
}

ArchConfig arch_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"resolution",   "latent_dim",         "base_channels",
                                              "max_channels", "disc_channels",      "disc_dropout",
                                              "refiner_resolution", "refiner_channels"};
  if (!j.is_object()) throw ConfigError("arch must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown arch field '" + key + "'");
  }
  ArchConfig a;
  try {
    if (j.contains("resolution")) a.resolution = j["resolution"].get<int>();
    if (j.contains("latent_dim")) a.latent_dim = j["latent_dim"].get<int>();
    if (j.contains("base_channels")) a.base_channels = j["base_channels"].get<int>();
    if (j.contains("max_channels")) a.max_channels = j["max_channels"].get<int>();
    if (j.contains("disc_channels")) a.disc_channels = j["disc_channels"].get<std::vector<int>>();
    if (j.contains("disc_dropout")) a.disc_dropout = j["disc_dropout"].get<float>();
    if (j.contains("refiner_resolution")) a.refiner_resolution = j["refiner_resolution"].get<int>();
    if (j.contains("refiner_channels")) a.refiner_channels = j["refiner_channels"].get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad arch field: ") + e.what());
  }
  a.validate();
  return a;
}

}  // namespace cycinpaint::models
