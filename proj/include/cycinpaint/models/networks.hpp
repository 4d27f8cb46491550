#pragma once

#include <memory>
#include <vector>

#include "cycinpaint/models/arch.hpp"
#include "cycinpaint/nn/module.hpp"

namespace cycinpaint::models {

using nn::Var;

/// Latent [N,d,1,1] to images [N,3,R,R] in [-1,1]: linear to 4x4, then
/// upsample + 3x3 conv + batch norm + leaky ReLU per doubling, tanh head.
class Generator : public nn::Module {
 public:
  Generator(const ArchConfig& arch, Rng& rng);
  Var operator()(const Var& z) const;
  int latent_dim() const { return latent_dim_; }
  int resolution() const { return resolution_; }

 private:
  int latent_dim_, resolution_, c0_;
  std::unique_ptr<nn::Linear> fc_;
  std::unique_ptr<nn::BatchNorm2d> bn0_;
  std::vector<std::unique_ptr<nn::Conv2d>> convs_;
  std::vector<std::unique_ptr<nn::BatchNorm2d>> bns_;
  std::unique_ptr<nn::Conv2d> to_rgb_;
};

/// Images [N,3,R,R] to [N,out,1,1]: 3x3 input conv, stride-2 3x3 convs down
/// to 4x4 (optionally batch-normalized), leaky ReLU, linear head. Serves as
/// the CRG encoder (out = latent_dim) and as the GAN critic (out = 1, logits).
class ConvEncoder : public nn::Module {
 public:
  ConvEncoder(const ArchConfig& arch, int out_features, bool batch_norm, Rng& rng);
  Var operator()(const Var& x) const;
  int resolution() const { return resolution_; }
  int out_features() const { return out_; }

 private:
  int resolution_, out_;
  std::unique_ptr<nn::Conv2d> from_rgb_;
  std::vector<std::unique_ptr<nn::Conv2d>> convs_;
  std::vector<std::unique_ptr<nn::BatchNorm2d>> bns_;
  std::unique_ptr<nn::Linear> fc_;
};

using Encoder = ConvEncoder;

/// Artifact scorer: [conv3x3/s2 + BN + leaky ReLU 0.2 + spatial dropout] x3,
/// global max pool, hidden linear + leaky ReLU, linear, sigmoid. Fully convolutional in resolution.
class ArtifactDiscriminator : public nn::Module {
 public:
  ArtifactDiscriminator(const ArchConfig& arch, Rng& rng);
  /// Pre-sigmoid scores [N,1,1,1].
  Var logits(const Var& x) const;
  /// Scores in [0,1].
  Var operator()(const Var& x) const;
  void reseed_dropout(std::uint64_t seed) const { dropout_rng_ = Rng(seed); }

 private:
  float dropout_;
  std::vector<std::unique_ptr<nn::Conv2d>> convs_;
  std::vector<std::unique_ptr<nn::BatchNorm2d>> bns_;
  std::unique_ptr<nn::Linear> hidden_;
  std::unique_ptr<nn::Linear> fc_;
  mutable Rng dropout_rng_{0};
};

/// Spatial sizes observed in one refiner forward pass.
struct RefinerTrace {
  Shape input;
  std::vector<Shape> encoder;  // Conv1..Conv6 outputs
  Shape bottleneck;
  std::vector<Shape> concat;   // Upsample1..Upsample7 after concatenation
  std::vector<Shape> decoder;  // Conv7..Conv13 outputs
};

/// U-Net refiner: Conv1 7x7, Conv2-3 5x5, Conv4-6 3x3, all stride 2 with
/// ReLU and batch norm; 2x2 average-pool bottleneck; seven nearest-upsample
/// + skip-concat + 3x3 conv stages with leaky ReLU 0.2; tanh output.
class Refiner : public nn::Module {
 public:
  Refiner(const ArchConfig& arch, Rng& rng);
  Var operator()(const Var& x, RefinerTrace* trace = nullptr) const;
  int resolution() const { return resolution_; }
  const std::vector<int>& channels() const { return channels_; }

 private:
  int resolution_;
  std::vector<int> channels_;
  std::vector<std::unique_ptr<nn::Conv2d>> enc_;
  std::vector<std::unique_ptr<nn::BatchNorm2d>> enc_bn_;
  std::vector<std::unique_ptr<nn::Conv2d>> dec_;
  std::vector<std::unique_ptr<nn::BatchNorm2d>> dec_bn_;
};

/// Minimum resolution the refiner accepts (seven halvings).
inline constexpr int kRefinerDivisor = 128;

}  // namespace cycinpaint::models
