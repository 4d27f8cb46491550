#include "cycinpaint/training/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/imaging/io.hpp"
#include "cycinpaint/imaging/masks.hpp"
#include "cycinpaint/nn/optim.hpp"

namespace cycinpaint::training {
namespace {

using Clock = std::chrono::steady_clock;
using nn::Var;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::unique_ptr<nn::Optimizer> make_optimizer(const TrainConfig& cfg, std::vector<Var> params) {
  if (cfg.optimizer == OptimizerKind::rmsprop) {
    return std::make_unique<nn::RmsProp>(std::move(params), cfg.lr, cfg.rho, cfg.eps);
  }
  return std::make_unique<nn::Adam>(std::move(params), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

Split make_split(const std::vector<std::string>& keys, std::size_t count, const TrainConfig& cfg) {
  if (keys.size() != count) throw ConfigError("one key per training sample is required");
  const auto is_val = split_validation(keys, cfg.val_fraction, cfg.seed);
  Split s;
  for (std::size_t i = 0; i < count; ++i) (is_val[i] ? s.val : s.train).push_back(i);
  if (s.train.empty() || s.val.empty()) throw ConfigError("training and validation sets must both be non-empty");
  return s;
}

/// Writes checkpoints/<name>.cyc and records it in the report.
void checkpoint(models::ModelBundle& bundle, const TrainConfig& cfg, const std::string& name, TrainReport& report) {
  if (cfg.out_dir.empty()) return;
  const auto dir = std::filesystem::path(cfg.out_dir) / "checkpoints";
  std::filesystem::create_directories(dir);
  const auto path = dir / (name + ".cyc");
  save_bundle(bundle, path);
  if (std::find(report.checkpoints.begin(), report.checkpoints.end(), path) == report.checkpoints.end()) {
    report.checkpoints.push_back(path);
  }
  if (name == "best") {
    report.best_checkpoint = path;
    std::ofstream marker(std::filesystem::path(cfg.out_dir) / "best");
    marker << "checkpoints/best.cyc\nepoch " << report.best_epoch << '\n';
  }
}

void finish(TrainReport& report, const TrainConfig& cfg, Clock::time_point t0) {
  report.wall_seconds = seconds_since(t0);
  if (!cfg.out_dir.empty()) write_epoch_csv(report, cfg.out_dir);
}

Tensor labels_of(const std::vector<float>& labels) {
  return Tensor(Shape{static_cast<int>(labels.size()), 1, 1, 1}, labels);
}

Tensor random_latents(Rng& rng, int n, int dim) {
  Tensor z(Shape{n, dim, 1, 1});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = static_cast<float>(rng.normal());
  return z;
}

int reflect(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

}  // namespace

std::vector<bool> split_validation(const std::vector<std::string>& keys, double val_fraction, std::uint64_t seed) {
  std::vector<bool> out(keys.size(), false);
  if (keys.empty()) return out;
  std::vector<double> u(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto h = Rng::derive(fnv1a64(keys[i].data(), keys[i].size()), seed);
    u[i] = static_cast<double>(h >> 11) * 0x1.0p-53;
    out[i] = u[i] < val_fraction;
  }
  if (keys.size() >= 2) {
    const auto n_val = std::count(out.begin(), out.end(), true);
    if (n_val == 0) out[std::min_element(u.begin(), u.end()) - u.begin()] = true;
    if (n_val == static_cast<long>(keys.size())) out[std::max_element(u.begin(), u.end()) - u.begin()] = false;
  }
  return out;
}

PairTransform draw_transform(Rng& rng, int size, const TrainConfig& cfg) {
  PairTransform tr;
  if (cfg.augment_shift) {
    const int max_shift = static_cast<int>(std::floor(cfg.shift_fraction * size));
    tr.dy = rng.uniform_int(-max_shift, max_shift);
    tr.dx = rng.uniform_int(-max_shift, max_shift);
  }
  if (cfg.augment_flip) {
    tr.hflip = rng.bernoulli(0.5);
    tr.vflip = rng.bernoulli(0.5);
  }
  return tr;
}

Tensor apply_transform(const Tensor& t, const PairTransform& tr) {
  if (t.n() != 1) throw ShapeError("apply_transform expects a single sample");
  if (tr.dy == 0 && tr.dx == 0 && !tr.hflip && !tr.vflip) return t;
  const int h = t.h(), w = t.w();
  Tensor out(t.shape());
  for (int c = 0; c < t.c(); ++c) {
    for (int y = 0; y < h; ++y) {
      const int ys = reflect((tr.vflip ? h - 1 - y : y) - tr.dy, h);
      for (int x = 0; x < w; ++x) {
        const int xs = reflect((tr.hflip ? w - 1 - x : x) - tr.dx, w);
        out.at(0, c, y, x) = t.at(0, c, ys, xs);
      }
    }
  }
  return out;
}

losses::ExtractorConfig extractor_config(const std::string& name) {
  if (name == "vgg16") return losses::ExtractorConfig::vgg16();
  if (name == "lite") return losses::ExtractorConfig::lite();
  if (name == "toy") return losses::ExtractorConfig::toy();
  throw ConfigError("unknown extractor '" + name + "' (expected vgg16, lite or toy)");
}

SeparationStats separation(const models::ArtifactDiscriminator& d, const std::vector<distortion::LabeledSample>& data,
                           const std::vector<std::size_t>& indices) {
  SeparationStats s;
  int correct = 0;
  double sum_clean = 0.0, sum_heavy = 0.0;
  for (std::size_t i : indices) {
    const auto& sample = data.at(i);
    const bool clean = sample.severity == distortion::Severity::none && sample.label == distortion::kRealLabel;
    const bool heavy = sample.severity == distortion::Severity::heavy;
    if (!clean && !heavy) continue;
    const double score = models::discriminate(d, sample.image);
    if (clean) {
      ++s.clean;
      sum_clean += score;
      correct += score >= 0.5;
    } else {
      ++s.heavy;
      sum_heavy += score;
      correct += score < 0.5;
    }
  }
  if (s.clean) s.mean_clean = sum_clean / s.clean;
  if (s.heavy) s.mean_heavy = sum_heavy / s.heavy;
  if (s.clean + s.heavy) s.accuracy = static_cast<double>(correct) / (s.clean + s.heavy);
  return s;
}

void write_epoch_csv(const TrainReport& report, const std::filesystem::path& out_dir) {
  std::vector<std::string> metric_names;
  for (const auto& e : report.epochs) {
    for (const auto& [k, v] : e.metrics) {
      if (std::find(metric_names.begin(), metric_names.end(), k) == metric_names.end()) metric_names.push_back(k);
    }
  }
  std::filesystem::create_directories(out_dir / "reports");
  std::ofstream out(out_dir / "reports" / "epochs.csv");
  if (!out) throw IoError("cannot write " + (out_dir / "reports" / "epochs.csv").string());
  out << "epoch,phase,train_loss,val_loss,lr";
  for (const auto& k : metric_names) out << ',' << k;
  out << '\n';
  out.precision(10);
  for (const auto& e : report.epochs) {
    out << e.epoch << ',' << e.phase << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr;
    for (const auto& k : metric_names) {
      out << ',';
      if (const auto it = e.metrics.find(k); it != e.metrics.end()) out << it->second;
    }
    out << '\n';
  }
}

TrainReport train_discriminator(const TrainConfig& cfg, const std::vector<distortion::LabeledSample>& data,
                                const std::vector<std::string>& keys, models::ModelBundle& bundle,
                                const EpochCallback& on_epoch) {
  cfg.validate();
  const bool has_real = std::any_of(data.begin(), data.end(), [](const auto& s) { return s.label > 0.5f; });
  const bool has_fake = std::any_of(data.begin(), data.end(), [](const auto& s) { return s.label < 0.5f; });
  if (!has_real || !has_fake) throw ConfigError("discriminator dataset must contain both labels");
  const auto t0 = Clock::now();
  const Split split = make_split(keys, data.size(), cfg);

  if (!bundle.discriminator) {
    Rng init(Rng::derive(cfg.seed, 3));
    bundle.discriminator = std::make_unique<models::ArtifactDiscriminator>(bundle.arch, init);
  }
  auto& d = *bundle.discriminator;
  auto opt = make_optimizer(cfg, d.parameters());
  nn::PlateauSchedule plateau(cfg.plateau_patience, cfg.plateau_factor);
  Rng order_rng(Rng::derive(cfg.seed, 101));
  Rng aug_rng(Rng::derive(cfg.seed, 102));

  TrainReport report;
  report.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_state;
  const int res = data.front().image.height();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    d.set_training(true);
    d.reseed_dropout(Rng::derive(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    auto order = split.train;
    shuffle(order, order_rng);
    double train_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      std::vector<Tensor> xs;
      std::vector<float> ys;
      for (std::size_t k = b; k < end; ++k) {
        const auto& s = data[order[k]];
        xs.push_back(apply_transform(s.image.tensor(), draw_transform(aug_rng, res, cfg)));
        ys.push_back(s.label);
      }
      Var loss = nn::bce(d(Var(stack(xs))), labels_of(ys));
      train_sum += static_cast<double>(loss.item()) * static_cast<double>(end - b);
      loss.backward();
      opt->step();
    }

    d.set_training(false);
    std::vector<double> scores, targets;
    {
      nn::NoGradGuard guard;
      for (std::size_t b = 0; b < split.val.size(); b += cfg.batch_size) {
        const std::size_t end = std::min(split.val.size(), b + cfg.batch_size);
        std::vector<Tensor> xs;
        for (std::size_t k = b; k < end; ++k) {
          xs.push_back(data[split.val[k]].image.tensor());
          targets.push_back(data[split.val[k]].label);
        }
        const Var s = d(Var(stack(xs)));
        for (float v : s.value().values()) scores.push_back(v);
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = "discriminator";
    rec.train_loss = train_sum / static_cast<double>(order.size());
    rec.val_loss = losses::disc_loss(scores, targets);
    rec.lr = opt->lr();
    int correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] >= 0.5) == (targets[i] > 0.5);
    rec.metrics["val_accuracy"] = static_cast<double>(correct) / static_cast<double>(scores.size());
    report.epochs.push_back(rec);

    if (rec.val_loss < report.best_val_loss) {
      report.best_val_loss = rec.val_loss;
      report.best_epoch = epoch;
      best_state = d.snapshot();
      checkpoint(bundle, cfg, "best", report);
    }
    if (cfg.plateau_patience > 0) plateau.observe(rec.val_loss, *opt);
    if (on_epoch) on_epoch(rec);
  }

  checkpoint(bundle, cfg, "last", report);
  d.restore(best_state);
  d.set_training(false);
  bundle.training_meta["discriminator"] = {{"epochs", cfg.epochs},
                                           {"best_epoch", report.best_epoch},
                                           {"best_val_loss", report.best_val_loss},
                                           {"optimizer", std::string(optimizer_name(cfg.optimizer))},
                                           {"lr", cfg.lr},
                                           {"samples", data.size()},
                                           {"seed", cfg.seed}};
  finish(report, cfg, t0);
  return report;
}

TrainReport train_crg(const TrainConfig& cfg, const std::vector<Image>& images, const std::vector<std::string>& keys,
                      models::ModelBundle& bundle, const EpochCallback& on_epoch) {
  cfg.validate();
  if (images.size() < 500) {
    throw ConfigError("CRG training needs at least 500 images, got " + std::to_string(images.size()));
  }
  const int res = cfg.arch.resolution;
  for (const auto& img : images) {
    if (img.height() != res || img.width() != res) {
      throw ShapeError("CRG training images must be " + std::to_string(res) + " px square");
    }
  }
  const auto t0 = Clock::now();
  const Split split = make_split(keys, images.size(), cfg);

  bundle.arch = cfg.arch;
  Rng g_init(Rng::derive(cfg.seed, 1)), e_init(Rng::derive(cfg.seed, 2)), c_init(Rng::derive(cfg.seed, 5));
  bundle.generator = std::make_unique<models::Generator>(cfg.arch, g_init);
  bundle.encoder = std::make_unique<models::Encoder>(cfg.arch, cfg.arch.latent_dim, true, e_init);
  models::ConvEncoder critic(cfg.arch, 1, false, c_init);
  auto& g = *bundle.generator;
  auto& e = *bundle.encoder;
  const int dim = cfg.arch.latent_dim;

  Rng order_rng(Rng::derive(cfg.seed, 201));
  Rng aug_rng(Rng::derive(cfg.seed, 202));
  Rng z_rng(Rng::derive(cfg.seed, 203));
  TrainConfig aug = cfg;
  aug.augment_shift = false;

  auto real_batch = [&](const std::vector<std::size_t>& order, std::size_t b, std::size_t end) {
    std::vector<Tensor> xs;
    for (std::size_t k = b; k < end; ++k) {
      PairTransform tr = draw_transform(aug_rng, res, aug);
      tr.vflip = false;
      xs.push_back(apply_transform(images[order[k]].tensor(), tr));
    }
    return stack(xs);
  };

  TrainReport report;

  nn::Adam opt_g(g.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
  nn::Adam opt_c(critic.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
  g.set_training(true);
  critic.set_training(true);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto order = split.train;
    shuffle(order, order_rng);
    double gen_sum = 0.0, disc_sum = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      const int n = static_cast<int>(end - b);
      const Var real(real_batch(order, b, end));
      const Tensor ones(Shape{n, 1, 1, 1}, 1.0f), zeros(Shape{n, 1, 1, 1}, 0.0f);

      Var fake;
      {
        nn::NoGradGuard guard;
        fake = g(Var(random_latents(z_rng, n, dim)));
      }
      Var d_loss = nn::add(nn::bce_with_logits(critic(real), ones), nn::bce_with_logits(critic(fake), zeros));
      disc_sum += d_loss.item();
      d_loss.backward();
      opt_c.step();

      Var g_loss = nn::bce_with_logits(critic(g(Var(random_latents(z_rng, n, dim)))), ones);
      gen_sum += g_loss.item();
      g_loss.backward();
      opt_g.step();
      opt_c.zero_grad();
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = "gan";
    rec.train_loss = gen_sum / batches;
    rec.val_loss = std::numeric_limits<double>::quiet_NaN();
    rec.lr = opt_g.lr();
    rec.metrics["gen_adv"] = gen_sum / batches;
    rec.metrics["disc_adv"] = disc_sum / batches;
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  g.set_training(false);
  g.set_requires_grad(false);
  auto opt_e = make_optimizer(cfg, e.parameters());
  nn::PlateauSchedule plateau(cfg.plateau_patience, cfg.plateau_factor);
  report.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_state;
  for (int epoch = 1; epoch <= cfg.encoder_epochs; ++epoch) {
    e.set_training(true);
    auto order = split.train;
    shuffle(order, order_rng);
    double latent_sum = 0.0, image_sum = 0.0;
    int batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      const int n = static_cast<int>(end - b);
      const Var real(real_batch(order, b, end));
      const Var z(random_latents(z_rng, n, dim));
      Var fake;
      {
        nn::NoGradGuard guard;
        fake = g(z);
      }
      const Var latent = nn::mse_mean(e(fake), z);
      const Var image = nn::l1_mean(g(e(real)), real);
      Var loss = nn::add(latent, image);
      latent_sum += latent.item();
      image_sum += image.item();
      loss.backward();
      opt_e->step();
      ++batches;
    }

    e.set_training(false);
    double val_latent = 0.0, val_image = 0.0;
    {
      nn::NoGradGuard guard;
      Rng val_z(Rng::derive(cfg.seed, 204));
      for (std::size_t b = 0; b < split.val.size(); b += cfg.batch_size) {
        const std::size_t end = std::min(split.val.size(), b + cfg.batch_size);
        const int n = static_cast<int>(end - b);
        std::vector<Tensor> xs;
        for (std::size_t k = b; k < end; ++k) xs.push_back(images[split.val[k]].tensor());
        const Var real(stack(xs));
        const Var z(random_latents(val_z, n, dim));
        val_latent += static_cast<double>(nn::mse_mean(e(g(z)), z).item()) * n;
        val_image += static_cast<double>(nn::l1_mean(g(e(real)), real).item()) * n;
      }
    }
    val_latent /= static_cast<double>(split.val.size());
    val_image /= static_cast<double>(split.val.size());

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = "encoder";
    rec.train_loss = (latent_sum + image_sum) / batches;
    rec.val_loss = val_latent + val_image;
    rec.lr = opt_e->lr();
    rec.metrics["latent_recon"] = latent_sum / batches;
    rec.metrics["image_recon"] = image_sum / batches;
    rec.metrics["val_latent_recon"] = val_latent;
    rec.metrics["val_image_recon"] = val_image;
    report.epochs.push_back(rec);

    if (rec.val_loss < report.best_val_loss) {
      report.best_val_loss = rec.val_loss;
      report.best_epoch = epoch;
      best_state = e.snapshot();
      checkpoint(bundle, cfg, "best", report);
    }
    if (cfg.plateau_patience > 0) plateau.observe(rec.val_loss, *opt_e);
    if (on_epoch) on_epoch(rec);
  }

  checkpoint(bundle, cfg, "last", report);
  e.restore(best_state);
  e.set_training(false);
  g.set_requires_grad(true);
  bundle.training_meta["crg"] = {{"gan_epochs", cfg.epochs},
                                 {"encoder_epochs", cfg.encoder_epochs},
                                 {"best_encoder_epoch", report.best_epoch},
                                 {"best_val_loss", report.best_val_loss},
                                 {"images", images.size()},
                                 {"seed", cfg.seed}};
  finish(report, cfg, t0);
  return report;
}

std::vector<RefinerSample> build_refiner_dataset(const engine::Models& models, const std::vector<Image>& images,
                                                 int refiner_resolution, int cycles, std::uint64_t seed) {
  std::vector<RefinerSample> out;
  out.reserve(images.size());
  const int res = models.resolution();
  for (std::size_t i = 0; i < images.size(); ++i) {
    Rng rng(Rng::derive(seed, i));
    imaging::MaskSpec spec;
    spec.size = res;
    spec.kind = rng.bernoulli(0.5) ? imaging::MaskKind::rectangular : imaging::MaskKind::irregular_brush;
    spec.rect_coverage = rng.uniform(0.1, 0.3);
    engine::InpaintRequest req;
    req.image = images[i];
    req.mask = imaging::gen_mask(spec, rng.next());
    switch (rng.uniform_int(0, 3)) {
      case 0:
        req.fill = imaging::FillPolicy::mean();
        break;
      case 1:
        req.fill = imaging::FillPolicy::noise(imaging::kDefaultNoiseSigma, rng.next());
        break;
      case 2:
        req.fill = imaging::FillPolicy::white();
        break;
      default:
        req.fill = imaging::FillPolicy::black();
        break;
    }
    req.cycles = cycles;
    req.use_discriminator = models.has_discriminator();
    req.refine = false;
    req.seed = rng.next();
    const auto result = engine::inpaint(models, std::move(req));
    out.push_back({imaging::resize_image(result.coarse, refiner_resolution),
                   imaging::resize_mask(result.mask, refiner_resolution),
                   imaging::resize_image(result.input, refiner_resolution)});
  }
  return out;
}

TrainReport train_refiner(const TrainConfig& cfg, const std::vector<RefinerSample>& data,
                          const std::vector<std::string>& keys, models::ModelBundle& bundle,
                          const losses::FeatureExtractor& fx, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.empty()) throw ConfigError("refiner dataset is empty");
  const int res = data.front().crg.height();
  if (res % models::kRefinerDivisor != 0) {
    throw ConfigError("refiner resolution must be a multiple of " + std::to_string(models::kRefinerDivisor));
  }
  const auto t0 = Clock::now();
  const Split split = make_split(keys, data.size(), cfg);

  if (!bundle.refiner || bundle.refiner->resolution() != res) {
    bundle.arch.refiner_resolution = res;
    Rng init(Rng::derive(cfg.seed, 4));
    bundle.refiner = std::make_unique<models::Refiner>(bundle.arch, init);
  }
  auto& u = *bundle.refiner;
  auto opt = make_optimizer(cfg, u.parameters());
  nn::PlateauSchedule plateau(cfg.plateau_patience, cfg.plateau_factor);
  Rng order_rng(Rng::derive(cfg.seed, 301));
  Rng aug_rng(Rng::derive(cfg.seed, 302));

  TrainReport report;
  report.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_state;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    u.set_training(true);
    auto order = split.train;
    shuffle(order, order_rng);
    double train_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      std::vector<Tensor> crg, mask, org;
      for (std::size_t k = b; k < end; ++k) {
        const auto& s = data[order[k]];
        const PairTransform tr = draw_transform(aug_rng, res, cfg);
        crg.push_back(apply_transform(s.crg.tensor(), tr));
        mask.push_back(apply_transform(s.mask.tensor(), tr));
        org.push_back(apply_transform(s.org.tensor(), tr));
      }
      const Tensor crg_b = stack(crg);
      Var loss = losses::joint_loss_var(u(Var(crg_b)), crg_b, stack(org), stack(mask), fx);
      train_sum += static_cast<double>(loss.item()) * static_cast<double>(end - b);
      loss.backward();
      opt->step();
    }

    u.set_training(false);
    double val_sum = 0.0;
    {
      nn::NoGradGuard guard;
      for (std::size_t b = 0; b < split.val.size(); b += cfg.batch_size) {
        const std::size_t end = std::min(split.val.size(), b + cfg.batch_size);
        std::vector<Tensor> crg, mask, org;
        for (std::size_t k = b; k < end; ++k) {
          const auto& s = data[split.val[k]];
          crg.push_back(s.crg.tensor());
          mask.push_back(s.mask.tensor());
          org.push_back(s.org.tensor());
        }
        const Tensor crg_b = stack(crg);
        val_sum += static_cast<double>(losses::joint_loss_var(u(Var(crg_b)), crg_b, stack(org), stack(mask), fx).item()) *
                   static_cast<double>(end - b);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = "refiner";
    rec.train_loss = train_sum / static_cast<double>(order.size());
    rec.val_loss = val_sum / static_cast<double>(split.val.size());
    rec.lr = opt->lr();
    report.epochs.push_back(rec);

    if (rec.val_loss < report.best_val_loss) {
      report.best_val_loss = rec.val_loss;
      report.best_epoch = epoch;
      best_state = u.snapshot();
      checkpoint(bundle, cfg, "best", report);
    }
    if (cfg.plateau_patience > 0) plateau.observe(rec.val_loss, *opt);
    if (on_epoch) on_epoch(rec);
  }

  checkpoint(bundle, cfg, "last", report);
  u.restore(best_state);
  u.set_training(false);
  bundle.training_meta["refiner"] = {{"epochs", cfg.epochs},
                                     {"best_epoch", report.best_epoch},
                                     {"best_val_loss", report.best_val_loss},
                                     {"extractor", fx.provenance()},
                                     {"samples", data.size()},
                                     {"seed", cfg.seed}};
  finish(report, cfg, t0);
  return report;
}

}  // namespace cycinpaint::training
