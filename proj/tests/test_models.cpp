#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/imaging/synthetic.hpp"
#include "cycinpaint/models/bundle.hpp"
#include "doctest.h"

using namespace cycinpaint;
using namespace cycinpaint::models;
namespace fs = std::filesystem;

namespace {

ArchConfig small_arch() {
  ArchConfig a;
  a.resolution = 32;
  a.latent_dim = 16;
  a.base_channels = 8;
  a.max_channels = 32;
  a.refiner_channels = {8, 8, 16, 16, 16, 16};
  return a;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cycinpaint_test_models";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("arch validation and json round trip") {
  ArchConfig a = small_arch();
  CHECK(arch_from_json(to_json(a)) == a);
  a.resolution = 48;
  CHECK_THROWS_AS(a.validate(), ConfigError);
  a.resolution = 16;
  CHECK_THROWS_AS(a.validate(), ConfigError);
  CHECK_THROWS_AS(arch_from_json(nlohmann::json{{"bogus", 1}}), ConfigError);
  CHECK(ArchConfig{}.channels_at(64) == 32);
  CHECK(ArchConfig{}.channels_at(4) == 256);
}

TEST_CASE("generator contract") {
  const ArchConfig a = small_arch();
  auto b = ModelBundle::create(a, 3, false);
  const auto z = generate_latent(a.latent_dim, 9);
  const Image img = generate(*b.generator, z);
  CHECK(img.height() == 32);
  CHECK(img.width() == 32);
  for (float v : img.tensor().span()) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(generate(*b.generator, z) == img);
  CHECK_THROWS_AS(generate(*b.generator, LatentCode(5, 0.0f)), ShapeError);
}

TEST_CASE("encoder contract") {
  const ArchConfig a = small_arch();
  auto b = ModelBundle::create(a, 3, false);
  const Image x = imaging::synthetic_face(32, 1, 0);
  const auto z = encode(*b.encoder, x);
  CHECK(z.size() == 16);
  for (float v : z) CHECK(std::isfinite(v));
  CHECK(encode(*b.encoder, x) == z);
  CHECK_FALSE(encode(*b.encoder, imaging::synthetic_face(32, 1, 1)) == z);
  CHECK_THROWS_AS(encode(*b.encoder, Image(16, 16)), ShapeError);
}

TEST_CASE("artifact discriminator contract and parameter count") {
  ArchConfig a;
  Rng rng(1);
  ArtifactDiscriminator d(a, rng);
  d.set_training(false);
  CHECK(count_params(d) == 437761);
  CHECK(count_params(d) >= 350000);
  CHECK(count_params(d) <= 524000);
  for (std::uint64_t i = 0; i < 3; ++i) {
    const double s = discriminate(d, imaging::synthetic_face(64, 2, i));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  const Image x = imaging::synthetic_face(64, 2, 0);
  CHECK(discriminate(d, x) == discriminate(d, x));
  CHECK(count_params(nn::Module{}) == 0);
  Rng r2(0);
  CHECK(count_params(nn::Conv2d(3, 64, 3, 1, 1, r2)) == 1792);
}

TEST_CASE("refiner layer contract at full width") {
  ArchConfig a;
  Rng rng(4);
  Refiner u(a, rng);
  u.set_training(false);
  RefinerTrace t;
  {
    nn::NoGradGuard g;
    Var out = u(Var(Tensor(Shape{1, 3, 128, 128}, 0.1f)), &t);
    CHECK(out.shape() == Shape{1, 3, 128, 128});
  }
  REQUIRE(t.encoder.size() == 6);
  CHECK(t.encoder[0] == Shape{1, 64, 64, 64});
  const int widths[6] = {64, 128, 256, 512, 512, 512};
  for (int i = 0; i < 6; ++i) {
    CHECK(t.encoder[i].c == widths[i]);
    CHECK(t.encoder[i].h == 128 >> (i + 1));
  }
  CHECK(t.bottleneck == Shape{1, 512, 1, 1});
  REQUIRE(t.concat.size() == 7);
  const int concat_widths[7] = {512 + 512, 512 + 512, 512 + 512, 512 + 256, 256 + 128, 128 + 64, 64 + 3};
  for (int k = 0; k < 7; ++k) {
    CHECK(t.concat[k].c == concat_widths[k]);
    CHECK(t.concat[k].h == 2 << k);
  }
  CHECK(t.concat[4].c == 256 + 128);
  CHECK(t.decoder.back() == Shape{1, 3, 128, 128});
}

TEST_CASE("refiner rejects indivisible resolutions and clamps output") {
  ArchConfig a = small_arch();
  Rng rng(4);
  Refiner u(a, rng);
  u.set_training(false);
  CHECK_THROWS_AS(refine(u, Image(96, 96)), ShapeError);
  CHECK_THROWS_AS(refine(u, Image(64, 64)), ShapeError);
  const Image out = refine(u, Image(128, 128, 0.3f));
  CHECK(out.height() == 128);
  for (float v : out.tensor().span()) CHECK(std::abs(v) <= 1.0f);
}

TEST_CASE("bundle round trip is bit exact") {
  auto b = ModelBundle::create(small_arch(), 5);
  b.training_meta = {{"note", "unit"}, {"epochs", 3}};
  const auto path = scratch("bundle.cyc");
  save_bundle(b, path);
  auto c = load_bundle(path);
  CHECK(c.arch == b.arch);
  CHECK(c.training_meta == b.training_meta);
  CHECK(c.version == b.version);
  auto sb = b.generator->state();
  auto sc = c.generator->state();
  REQUIRE(sb.size() == sc.size());
  for (std::size_t i = 0; i < sb.size(); ++i) CHECK(*sb[i].tensor == *sc[i].tensor);
  const auto z = generate_latent(16, 1);
  CHECK(generate(*c.generator, z) == generate(*b.generator, z));
  const Image x = imaging::synthetic_face(32, 1, 0);
  CHECK(discriminate(*c.discriminator, x) == discriminate(*b.discriminator, x));
  CHECK(refine(*c.refiner, Image(128, 128, 0.1f)) == refine(*b.refiner, Image(128, 128, 0.1f)));
  CHECK_THROWS_AS(load_bundle(path, 64), CheckpointError);
}

TEST_CASE("bundle corruption and optional networks") {
  auto b = ModelBundle::create(small_arch(), 5, false);
  b.discriminator.reset();
  const auto path = scratch("partial.cyc");
  save_bundle(b, path);
  auto c = load_bundle(path);
  CHECK(c.generator);
  CHECK_FALSE(c.discriminator);
  CHECK_FALSE(c.refiner);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    bytes = ss.str();
  }
  auto write = [&](const std::string& s) {
    std::ofstream out(scratch("bad.cyc"), std::ios::binary);
    out << s;
  };
  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x5A;
  write(flipped);
  CHECK_THROWS_AS(load_bundle(scratch("bad.cyc")), CheckpointError);
  write(bytes.substr(0, bytes.size() - 10));
  CHECK_THROWS_AS(load_bundle(scratch("bad.cyc")), CheckpointError);

  std::string resized = bytes;
  const auto pos = resized.find("\"resolution\":32");
  REQUIRE(pos != std::string::npos);
  resized.replace(pos, 15, "\"resolution\":64");
  write(resized);
  CHECK_THROWS_AS(load_bundle(scratch("bad.cyc")), CheckpointError);

  std::string versioned = bytes;
  const auto vpos = versioned.find("\"format_version\":1");
  versioned.replace(vpos, 18, "\"format_version\":9");
  write(versioned);
  CHECK_THROWS_AS(load_bundle(scratch("bad.cyc")), CheckpointError);
  CHECK_THROWS_AS(load_bundle(scratch("nonexistent.cyc")), CheckpointError);
}
