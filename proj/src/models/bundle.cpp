#include "cycinpaint/models/bundle.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/core/rng.hpp"

namespace cycinpaint::models {
namespace {

constexpr std::string_view kMagic = "CYCINPAINT-BUNDLE";

struct NamedNet {
  const char* name;
  nn::Module* net;
};

std::vector<NamedNet> networks_of(ModelBundle& b) {
  return {{"generator", b.generator.get()},
          {"encoder", b.encoder.get()},
          {"discriminator", b.discriminator.get()},
          {"refiner", b.refiner.get()}};
}

void append_le(std::string& out, const Tensor& t) {
  const std::size_t start = out.size();
  out.resize(start + t.size() * 4);
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(t[i]);
    for (int b = 0; b < 4; ++b) out[start + i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
}

void read_le(const std::string& payload, std::size_t offset, Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(payload[(offset + i) * 4 + b])) << (8 * b);
    }
    t[i] = std::bit_cast<float>(bits);
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Var image_batch(const Image& img) { return Var(img.tensor()); }

}  // namespace

ModelBundle ModelBundle::create(const ArchConfig& arch, std::uint64_t seed, bool with_refiner) {
  arch.validate();
  ModelBundle b;
  b.arch = arch;
  Rng g(Rng::derive(seed, 1)), e(Rng::derive(seed, 2)), d(Rng::derive(seed, 3)), u(Rng::derive(seed, 4));
  b.generator = std::make_unique<Generator>(arch, g);
  b.encoder = std::make_unique<Encoder>(arch, arch.latent_dim, true, e);
  b.discriminator = std::make_unique<ArtifactDiscriminator>(arch, d);
  if (with_refiner) b.refiner = std::make_unique<Refiner>(arch, u);
  b.set_inference();
  return b;
}

void ModelBundle::set_inference() {
  for (auto& [name, net] : networks_of(*this))
    if (net) net->set_training(false);
}

LatentCode generate_latent(int dim, std::uint64_t seed) {
  Rng rng(seed);
  LatentCode z(static_cast<std::size_t>(dim));
  for (auto& v : z) v = static_cast<float>(rng.normal());
  return z;
}

Image generate(const Generator& g, const LatentCode& z) {
  if (static_cast<int>(z.size()) != g.latent_dim()) {
    throw ShapeError("latent length " + std::to_string(z.size()) + " does not match " +
                     std::to_string(g.latent_dim()));
  }
  for (float v : z)
    if (!std::isfinite(v)) throw ShapeError("latent code has non-finite values");
  nn::NoGradGuard guard;
  Var out = g(Var(Tensor(Shape{1, g.latent_dim(), 1, 1}, std::vector<float>(z.begin(), z.end()))));
  return Image::clamped(out.value());
}

LatentCode encode(const Encoder& e, const Image& img) {
  nn::NoGradGuard guard;
  Var out = e(image_batch(img));
  return out.value().values();
}

double discriminate(const ArtifactDiscriminator& d, const Image& img) {
  nn::NoGradGuard guard;
  return d(image_batch(img)).item();
}

Image refine(const Refiner& u, const Image& img) {
  nn::NoGradGuard guard;
  return Image::clamped(u(image_batch(img)).value());
}

std::size_t count_params(const nn::Module& net) { return net.count_params(); }

void save_bundle(ModelBundle& b, const std::filesystem::path& path) {
  nlohmann::ordered_json header;
  header["format_version"] = kBundleFormatVersion;
  header["arch"] = to_json(b.arch);
  header["version"] = b.version;
  header["training_meta"] = b.training_meta;
  nlohmann::ordered_json nets = nlohmann::ordered_json::object();
  std::string payload;
  std::size_t offset = 0;
  for (auto& [name, net] : networks_of(b)) {
    if (!net) continue;
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    for (const auto& e : net->state()) {
      const Shape& s = e.tensor->shape();
      tensors.push_back({{"name", e.name}, {"shape", {s.n, s.c, s.h, s.w}}, {"offset", offset},
                         {"count", e.tensor->size()}});
      append_le(payload, *e.tensor);
      offset += e.tensor->size();
    }
    nets[name] = tensors;
  }
  header["networks"] = nets;
  header["payload_bytes"] = payload.size();
  header["checksum"] = hex64(fnv1a64(payload.data(), payload.size()));
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write bundle " + path.string());
  out << kMagic << '\n' << text.size() << '\n' << text;
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

nlohmann::json read_header(std::istream& in, const std::filesystem::path& path) {
  if (!in) throw CheckpointError("cannot open bundle " + path.string());
  std::string magic, len_line;
  std::getline(in, magic);
  if (magic != kMagic) throw CheckpointError(path.string() + " is not a model bundle");
  std::getline(in, len_line);
  std::size_t header_len = 0;
  try {
    header_len = std::stoull(len_line);
  } catch (const std::exception&) {
    throw CheckpointError("corrupt bundle header length in " + path.string());
  }
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw CheckpointError("truncated bundle header in " + path.string());
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt bundle header: ") + e.what());
  }
}

}  // namespace

nlohmann::json read_bundle_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return read_header(in, path);
}

ModelBundle load_bundle(const std::filesystem::path& path, std::optional<int> expected_resolution) {
  std::ifstream in(path, std::ios::binary);
  const nlohmann::json header = read_header(in, path);

  ModelBundle b;
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kBundleFormatVersion) {
      throw CheckpointError("bundle format version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kBundleFormatVersion) + ")");
    }
    try {
      b.arch = arch_from_json(header.at("arch"));
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("bundle arch invalid: ") + e.what());
    }
    if (expected_resolution && *expected_resolution != b.arch.resolution) {
      throw CheckpointError("bundle resolution " + std::to_string(b.arch.resolution) + " does not match expected " +
                            std::to_string(*expected_resolution));
    }
    b.version = header.at("version").get<std::string>();
    b.training_meta = header.at("training_meta");

    const std::size_t payload_bytes = header.at("payload_bytes").get<std::size_t>();
    std::string payload(payload_bytes, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
    if (static_cast<std::size_t>(in.gcount()) != payload_bytes) {
      throw CheckpointError("truncated bundle payload in " + path.string());
    }
    if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes in " + path.string());
    if (hex64(fnv1a64(payload.data(), payload.size())) != header.at("checksum").get<std::string>()) {
      throw CheckpointError("bundle checksum mismatch in " + path.string());
    }

    const auto& nets = header.at("networks");
    Rng rng(0);
    if (nets.contains("generator")) b.generator = std::make_unique<Generator>(b.arch, rng);
    if (nets.contains("encoder")) b.encoder = std::make_unique<Encoder>(b.arch, b.arch.latent_dim, true, rng);
    if (nets.contains("discriminator")) b.discriminator = std::make_unique<ArtifactDiscriminator>(b.arch, rng);
    if (nets.contains("refiner")) b.refiner = std::make_unique<Refiner>(b.arch, rng);
    for (auto& [name, net] : networks_of(b)) {
      if (!net) continue;
      const auto& table = nets.at(name);
      auto entries = net->state();
      if (table.size() != entries.size()) {
        throw CheckpointError(std::string(name) + ": stored " + std::to_string(table.size()) +
                              " tensors, architecture has " + std::to_string(entries.size()));
      }
      for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& rec = table[i];
        const auto dims = rec.at("shape").get<std::vector<int>>();
        const Shape s = entries[i].tensor->shape();
        if (rec.at("name").get<std::string>() != entries[i].name || dims.size() != 4 ||
            Shape{dims[0], dims[1], dims[2], dims[3]} != s) {
          throw CheckpointError(std::string(name) + "." + entries[i].name + ": stored tensor " +
                                rec.at("name").get<std::string>() + " does not match architecture shape " + s.str());
        }
        const std::size_t off = rec.at("offset").get<std::size_t>();
        if ((off + s.numel()) * 4 > payload.size()) throw CheckpointError("tensor data beyond payload end");
        read_le(payload, off, *entries[i].tensor);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt bundle header: ") + e.what());
  }
  b.set_inference();
  return b;
}

}  // namespace cycinpaint::models
