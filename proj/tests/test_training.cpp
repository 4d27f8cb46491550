#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/imaging/synthetic.hpp"
#include "cycinpaint/nn/optim.hpp"
#include "cycinpaint/training/training.hpp"
#include "doctest.h"

using namespace cycinpaint;
using namespace cycinpaint::training;
namespace fs = std::filesystem;
using nn::Var;

namespace {

models::ArchConfig tiny_arch() {
  models::ArchConfig a;
  a.resolution = 32;
  a.latent_dim = 16;
  a.base_channels = 8;
  a.max_channels = 32;
  a.disc_channels = {8, 16, 16};
  a.refiner_channels = {8, 8, 16, 16, 16, 16};
  return a;
}

std::vector<std::string> keys_for(std::size_t n, const std::string& prefix) {
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < n; ++i) keys.push_back(prefix + std::to_string(i) + ".png");
  return keys;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cycinpaint_test_training" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TrainConfig small_disc_config() {
  TrainConfig cfg = TrainConfig::defaults(Pipeline::discriminator);
  cfg.arch = tiny_arch();
  cfg.epochs = 4;
  cfg.batch_size = 16;
  cfg.lr = 1e-3;
  cfg.seed = 9;
  cfg.val_fraction = 0.25;
  return cfg;
}

}  // namespace

TEST_CASE("pipeline defaults echo the published recipes") {
  const auto d = TrainConfig::defaults(Pipeline::discriminator);
  CHECK(d.epochs == 300);
  CHECK(d.batch_size == 128);
  CHECK(d.optimizer == OptimizerKind::rmsprop);
  CHECK(d.lr == 0.0001);
  CHECK(d.rho == 0.9);
  CHECK(d.eps == 1e-8);
  CHECK(d.plateau_patience == 15);
  CHECK(d.plateau_factor == 2.0);

  const auto r = TrainConfig::defaults(Pipeline::refiner);
  CHECK(r.epochs == 100);
  CHECK(r.batch_size == 16);
  CHECK(r.optimizer == OptimizerKind::adam);
  CHECK(r.lr == 0.0002);
  CHECK(r.augment_shift);
  CHECK(r.augment_flip);
  CHECK(r.shift_fraction == 0.1);

  const auto c = TrainConfig::defaults(Pipeline::crg);
  CHECK(c.pipeline == Pipeline::crg);
  CHECK_NOTHROW(c.validate());
  CHECK(optimizer_name(d.optimizer) == "rmsprop");
  CHECK(pipeline_name(r.pipeline) == "refiner");
}

TEST_CASE("config files override defaults and report bad lines") {
  std::istringstream in(
      "# toy run\n"
      "epochs = 30\n"
      "\n"
      "lr=0.001   # faster\n"
      "augment_flip=yes\n"
      "arch.disc_channels=8,16,32\n");
  const auto cfg = parse_config(in, TrainConfig::defaults(Pipeline::discriminator), "toy.cfg");
  CHECK(cfg.epochs == 30);
  CHECK(cfg.lr == 0.001);
  CHECK(cfg.augment_flip);
  CHECK(cfg.arch.disc_channels == std::vector<int>{8, 16, 32});
  CHECK(cfg.batch_size == 128);

  std::istringstream unknown("epochs=3\nlearning_rate=1\n");
  try {
    parse_config(unknown, TrainConfig{}, "run.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("run.cfg:2") != std::string::npos);
    CHECK(msg.find("learning_rate") != std::string::npos);
  }
  std::istringstream bad_value("batch_size=many\n");
  CHECK_THROWS_AS(parse_config(bad_value, TrainConfig{}), ConfigError);
  std::istringstream no_equals("epochs 3\n");
  CHECK_THROWS_AS(parse_config(no_equals, TrainConfig{}), ConfigError);
  std::istringstream bad_optimizer("optimizer=sgd\n");
  CHECK_THROWS_AS(parse_config(bad_optimizer, TrainConfig{}), ConfigError);
}

TEST_CASE("describe output parses back to the same settings") {
  TrainConfig cfg = TrainConfig::defaults(Pipeline::refiner);
  cfg.out_dir = "runs/r1";
  cfg.seed = 1234567890123ULL;
  cfg.arch.refiner_channels = {8, 8, 16, 16, 16, 16};
  std::istringstream in(describe(cfg));
  const auto back = parse_config(in, TrainConfig::defaults(Pipeline::discriminator));
  CHECK(describe(back) == describe(cfg));
  CHECK(back.seed == cfg.seed);
  CHECK(back.arch == cfg.arch);
}

TEST_CASE("config validation rejects impossible settings") {
  TrainConfig cfg = TrainConfig::defaults(Pipeline::refiner);
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig::defaults(Pipeline::refiner);
  cfg.val_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig::defaults(Pipeline::refiner);
  cfg.plateau_factor = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(extractor_config("resnet"), ConfigError);
  CHECK(extractor_config("vgg16").stage_channels == std::vector<int>{64, 128, 256});
}

TEST_CASE("validation split is seed-stable, hash based and near 90/10") {
  const auto keys = keys_for(4000, "faces/img_");
  const auto a = split_validation(keys, 0.1, 5);
  const auto b = split_validation(keys, 0.1, 5);
  CHECK(a == b);
  const double frac = static_cast<double>(std::count(a.begin(), a.end(), true)) / keys.size();
  CHECK(frac > 0.085);
  CHECK(frac < 0.115);

  // Membership depends only on the key, not on its position or neighbours.
  std::vector<std::string> reversed(keys.rbegin(), keys.rend());
  reversed.resize(1000);
  const auto c = split_validation(reversed, 0.1, 5);
  for (std::size_t i = 0; i < reversed.size(); ++i) CHECK(c[i] == a[keys.size() - 1 - i]);

  CHECK(split_validation(keys, 0.1, 6) != a);
  const auto two = split_validation({"x", "y"}, 0.1, 1);
  CHECK(two[0] != two[1]);
}

TEST_CASE("paired augmentation shares one transform across image and mask") {
  const auto face = imaging::synthetic_face(64, 3, 0);
  // A mask derived from the image commutes with any spatial transform.
  Tensor mask(Shape{1, 1, 64, 64});
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) mask.at(0, 0, y, x) = face.at(y, x, 0) > 0.0f ? 1.0f : 0.0f;

  TrainConfig cfg = TrainConfig::defaults(Pipeline::refiner);
  Rng rng(21);
  int flips = 0, shifts = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const PairTransform tr = draw_transform(rng, 64, cfg);
    CHECK(std::abs(tr.dy) <= 6);
    CHECK(std::abs(tr.dx) <= 6);
    flips += tr.hflip + tr.vflip;
    shifts += tr.dx != 0 || tr.dy != 0;
    const Tensor img_t = apply_transform(face.tensor(), tr);
    const Tensor mask_t = apply_transform(mask, tr);
    bool consistent = true;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        consistent &= mask_t.at(0, 0, y, x) == (img_t.at(0, 0, y, x) > 0.0f ? 1.0f : 0.0f);
    CHECK(consistent);
  }
  CHECK(flips > 0);
  CHECK(shifts > 0);

  PairTransform h;
  h.hflip = true;
  CHECK(apply_transform(face.tensor(), h).at(0, 1, 5, 0) == face.at(5, 63, 1));
  CHECK(apply_transform(apply_transform(face.tensor(), h), h) == face.tensor());
  PairTransform s;
  s.dx = 3;
  const Tensor shifted = apply_transform(face.tensor(), s);
  CHECK(shifted.at(0, 2, 10, 20) == face.at(10, 17, 2));
  CHECK(shifted.at(0, 2, 10, 0) == face.at(10, 3, 2));  // reflected border
}

TEST_CASE("one plateau event halves the discriminator rate to 5e-5") {
  Var p(Tensor(Shape{1, 1, 1, 1}, 1.0f), true);
  nn::RmsProp opt({p}, TrainConfig::defaults(Pipeline::discriminator).lr, 0.9, 1e-8);
  nn::PlateauSchedule plateau(15, 2.0);
  CHECK_FALSE(plateau.observe(1.0, opt));
  for (int i = 0; i < 14; ++i) CHECK_FALSE(plateau.observe(1.0, opt));
  CHECK(plateau.observe(1.0, opt));
  CHECK(opt.lr() == doctest::Approx(5e-5).epsilon(1e-12));
}

TEST_CASE("discriminator training tracks the best validation epoch") {
  const auto faces = imaging::synthetic_faces(30, 32, 4);
  const auto data = distortion::build_disc_dataset(faces, 120, 8);
  const auto keys = keys_for(data.size(), "d");
  TrainConfig cfg = small_disc_config();
  cfg.plateau_patience = 1;
  cfg.out_dir = scratch("disc").string();
  models::ModelBundle bundle;
  bundle.arch = cfg.arch;
  int callbacks = 0;
  const auto report = train_discriminator(cfg, data, keys, bundle, [&](const EpochRecord&) { ++callbacks; });
  REQUIRE(report.epochs.size() == 4);
  CHECK(callbacks == 4);

  double best = INFINITY;
  int best_epoch = 0;
  for (const auto& e : report.epochs) {
    CHECK(std::isfinite(e.train_loss));
    if (e.val_loss < best) {
      best = e.val_loss;
      best_epoch = e.epoch;
    }
  }
  CHECK(report.best_epoch == best_epoch);
  CHECK(report.best_val_loss == best);

  // The rate halves exactly after an epoch without a new minimum.
  double lowest = INFINITY;
  for (std::size_t i = 0; i + 1 < report.epochs.size(); ++i) {
    const bool improved = report.epochs[i].val_loss < lowest;
    lowest = std::min(lowest, report.epochs[i].val_loss);
    const double ratio = report.epochs[i + 1].lr / report.epochs[i].lr;
    CHECK(ratio == doctest::Approx(improved ? 1.0 : 0.5));
  }

  const fs::path out(cfg.out_dir);
  CHECK(fs::exists(out / "checkpoints" / "best.cyc"));
  CHECK(fs::exists(out / "checkpoints" / "last.cyc"));
  CHECK(fs::exists(out / "best"));
  CHECK(report.best_checkpoint == out / "checkpoints" / "best.cyc");
  std::ifstream csv(out / "reports" / "epochs.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("epoch,phase,train_loss,val_loss,lr", 0) == 0);
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 4);

  // The best checkpoint reloads and scores exactly like the restored in-memory network.
  auto loaded = models::load_bundle(out / "checkpoints" / "best.cyc");
  REQUIRE(loaded.discriminator);
  CHECK(models::discriminate(*loaded.discriminator, data[0].image) ==
        models::discriminate(*bundle.discriminator, data[0].image));
  CHECK(bundle.training_meta["discriminator"]["best_epoch"] == report.best_epoch);

  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto sep = separation(*bundle.discriminator, data, all);
  CHECK(sep.clean == 44);
  CHECK(sep.heavy == 60);
  CHECK(sep.accuracy >= 0.0);
  CHECK(sep.accuracy <= 1.0);
}

TEST_CASE("discriminator training needs both labels") {
  const auto faces = imaging::synthetic_faces(4, 32, 4);
  std::vector<distortion::LabeledSample> data;
  for (const auto& f : faces) data.push_back({f, distortion::kRealLabel, distortion::Severity::none});
  models::ModelBundle bundle;
  bundle.arch = tiny_arch();
  CHECK_THROWS_AS(train_discriminator(small_disc_config(), data, keys_for(data.size(), "k"), bundle), ConfigError);
}

TEST_CASE("crg training refuses small corpora") {
  TrainConfig cfg = TrainConfig::defaults(Pipeline::crg);
  cfg.arch = tiny_arch();
  const auto faces = imaging::synthetic_faces(499, 32, 1);
  models::ModelBundle bundle;
  CHECK_THROWS_AS(train_crg(cfg, faces, keys_for(faces.size(), "f"), bundle), ConfigError);
}

TEST_CASE("seeded crg runs repeat their epoch-1 losses and checkpoint cleanly") {
  const auto faces = imaging::synthetic_faces(500, 32, 12);
  const auto keys = keys_for(faces.size(), "f");
  TrainConfig cfg = TrainConfig::defaults(Pipeline::crg);
  cfg.arch = tiny_arch();
  cfg.epochs = 1;
  cfg.encoder_epochs = 1;
  cfg.batch_size = 50;
  cfg.seed = 17;
  cfg.out_dir = scratch("crg").string();

  models::ModelBundle a, b;
  const auto ra = train_crg(cfg, faces, keys, a);
  cfg.out_dir.clear();
  const auto rb = train_crg(cfg, faces, keys, b);
  REQUIRE(ra.epochs.size() == 2);
  REQUIRE(rb.epochs.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(ra.epochs[i].phase == rb.epochs[i].phase);
    CHECK(ra.epochs[i].train_loss == rb.epochs[i].train_loss);
    CHECK(ra.epochs[i].metrics == rb.epochs[i].metrics);
  }
  CHECK(ra.epochs[0].phase == "gan");
  CHECK(ra.epochs[1].phase == "encoder");
  for (const auto& [name, v] : ra.epochs[1].metrics) CHECK_MESSAGE(std::isfinite(v), name);
  CHECK(a.generator);
  CHECK(a.encoder);
  CHECK_FALSE(a.discriminator);
  CHECK_FALSE(a.refiner);

  const auto loaded = models::load_bundle(ra.best_checkpoint, 32);
  const auto z = models::generate_latent(16, 3);
  CHECK(models::generate(*loaded.generator, z) == models::generate(*a.generator, z));
  CHECK(models::encode(*loaded.encoder, faces[0]) == models::encode(*a.encoder, faces[0]));
}

TEST_CASE("refiner smoke run lowers its training loss") {
  TrainConfig crg_cfg = TrainConfig::defaults(Pipeline::crg);
  crg_cfg.arch = tiny_arch();
  const auto bundle_models = models::ModelBundle::create(tiny_arch(), 2, false);
  const engine::BundleModels view(bundle_models);
  const auto faces = imaging::synthetic_faces(50, 32, 30);
  const auto data = build_refiner_dataset(view, faces, 128, 2, 6);
  REQUIRE(data.size() == 50);
  CHECK(data[0].crg.height() == 128);
  CHECK(data[0].mask.height() == 128);
  CHECK(data[0].org.height() == 128);
  CHECK(data[0].mask.hole_pixels() > 0);

  TrainConfig cfg = TrainConfig::defaults(Pipeline::refiner);
  cfg.arch = tiny_arch();
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.lr = 1e-3;
  cfg.seed = 4;
  models::ModelBundle bundle;
  bundle.arch = tiny_arch();
  const losses::FeatureExtractor fx(losses::ExtractorConfig::toy());
  const auto report = train_refiner(cfg, data, keys_for(data.size(), "r"), bundle, fx);
  REQUIRE(report.epochs.size() == 2);
  CHECK(report.epochs.back().train_loss < report.epochs.front().train_loss);
  REQUIRE(bundle.refiner);
  CHECK(bundle.training_meta["refiner"]["extractor"] == fx.provenance());

  CHECK_THROWS_AS(train_refiner(cfg, {}, {}, bundle, fx), ConfigError);
}
