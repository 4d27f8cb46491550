#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cycinpaint/distortion/distortion.hpp"
#include "cycinpaint/engine/engine.hpp"
#include "cycinpaint/losses/losses.hpp"
#include "cycinpaint/models/bundle.hpp"

namespace cycinpaint::training {

using imaging::Image;
using imaging::Mask;

enum class Pipeline { crg, discriminator, refiner };
enum class OptimizerKind { adam, rmsprop };

std::string_view pipeline_name(Pipeline p);
std::string_view optimizer_name(OptimizerKind o);

struct TrainConfig {
  Pipeline pipeline = Pipeline::discriminator;
  int epochs = 1;
  int batch_size = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double rho = 0.9;
  double eps = 1e-8;
  /// 0 disables the plateau schedule.
  int plateau_patience = 0;
  double plateau_factor = 2.0;
  bool augment_shift = false;
  bool augment_flip = false;
  double shift_fraction = 0.1;
  double val_fraction = 0.1;
  std::string data_dir;
  std::string out_dir;
  std::uint64_t seed = 0;
  /// CRG encoder phase length (the GAN phase uses `epochs`).
  int encoder_epochs = 0;
  /// Corpus size when no data_dir is given (synthetic faces).
  int num_images = 0;
  /// Discriminator dataset size.
  int dataset_total = 0;
  /// Engine cycles used to build refiner inputs.
  int refiner_cycles = 3;
  /// Feature extractor for the refiner's style loss: vgg16, lite or toy.
  std::string extractor = "lite";
  models::ArchConfig arch;

  /// Published hyperparameters per pipeline, at desk-scale corpus sizes.
  static TrainConfig defaults(Pipeline p);
  void validate() const;
};

/// Applies key=value lines (# comments, blank lines allowed) on top of `base`.
/// Errors name the source, line and key.
TrainConfig parse_config(std::istream& in, TrainConfig base, const std::string& source = "<config>");
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base);
/// Every field as key=value lines, in the format parse_config reads.
std::string describe(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  std::string phase;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  std::map<std::string, double> metrics;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  /// Epoch number (1-based, within the monitored phase) of the lowest validation loss.
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path best_checkpoint;
  double wall_seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Validation membership by hash of each key: seed-stable, ~val_fraction of keys,
/// and both sides non-empty when there are at least two keys.
std::vector<bool> split_validation(const std::vector<std::string>& keys, double val_fraction, std::uint64_t seed);

/// One draw shared by every tensor of a paired sample.
struct PairTransform {
  int dy = 0;
  int dx = 0;
  bool hflip = false;
  bool vflip = false;
};

PairTransform draw_transform(Rng& rng, int size, const TrainConfig& cfg);
/// Shift with reflect padding, then flips, on a [1,C,H,W] tensor.
Tensor apply_transform(const Tensor& t, const PairTransform& tr);

TrainReport train_discriminator(const TrainConfig& cfg, const std::vector<distortion::LabeledSample>& data,
                                const std::vector<std::string>& keys, models::ModelBundle& bundle,
                                const EpochCallback& on_epoch = {});

/// Two phases: GAN (generator + internal critic) for cfg.epochs, then the
/// encoder on latent_recon + image_recon with the generator frozen. Needs >= 500 images.
TrainReport train_crg(const TrainConfig& cfg, const std::vector<Image>& images, const std::vector<std::string>& keys,
                      models::ModelBundle& bundle, const EpochCallback& on_epoch = {});

struct RefinerSample {
  Image crg;
  Mask mask;
  Image org;
};

/// Runs the engine over `images` with random masks and fills and returns
/// (coarse, mask, original) triples at the refiner resolution.
std::vector<RefinerSample> build_refiner_dataset(const engine::Models& models, const std::vector<Image>& images,
                                                 int refiner_resolution, int cycles, std::uint64_t seed);

TrainReport train_refiner(const TrainConfig& cfg, const std::vector<RefinerSample>& data,
                          const std::vector<std::string>& keys, models::ModelBundle& bundle,
                          const losses::FeatureExtractor& fx, const EpochCallback& on_epoch = {});

losses::ExtractorConfig extractor_config(const std::string& name);

/// Accuracy at threshold 0.5 between clean (label 0.9, no distortion) and heavy samples,
/// plus the mean score of each group.
struct SeparationStats {
  double accuracy = 0.0;
  double mean_clean = 0.0;
  double mean_heavy = 0.0;
  int clean = 0;
  int heavy = 0;
};

SeparationStats separation(const models::ArtifactDiscriminator& d, const std::vector<distortion::LabeledSample>& data,
                           const std::vector<std::size_t>& indices);

/// Writes reports/epochs.csv under out_dir.
void write_epoch_csv(const TrainReport& report, const std::filesystem::path& out_dir);

}  // namespace cycinpaint::training
