#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cycinpaint/imaging/image.hpp"
#include "cycinpaint/models/networks.hpp"
#include "cycinpaint/nn/module.hpp"

namespace cycinpaint::losses {

using imaging::Image;
using imaging::Mask;
using nn::Var;

inline constexpr double kStyleWeight = 150.0;

/// Tapped activations, one [N,C,H,W] tensor per tap.
using FeatureStack = std::vector<Tensor>;

struct ExtractorConfig {
  /// Convolutions per stage; a max pool ends each stage and is tapped.
  std::vector<int> stage_convs = {2, 2, 3};
  std::vector<int> stage_channels = {64, 128, 256};
  std::uint64_t seed = 16;

  /// VGG-16 pool1..pool3 layout.
  static ExtractorConfig vgg16();
  /// Narrow variant for desk-scale training.
  static ExtractorConfig lite();
  /// Two single-conv stages, for gradient checks.
  static ExtractorConfig toy();
};

/// Frozen VGG-style backbone. Inputs in [-1,1] are mapped to [0,1] and
/// normalized with ImageNet channel statistics before the first conv.
class FeatureExtractor : public nn::Module {
 public:
  explicit FeatureExtractor(const ExtractorConfig& cfg);
  std::vector<Var> operator()(const Var& x) const;
  const ExtractorConfig& config() const { return cfg_; }
  int taps() const { return static_cast<int>(cfg_.stage_convs.size()); }
  int min_resolution() const { return 1 << taps(); }
  /// Where the weights came from, for bundle metadata.
  std::string provenance() const;

 private:
  ExtractorConfig cfg_;
  std::vector<std::vector<std::unique_ptr<nn::Conv2d>>> stages_;
};

FeatureStack extract_features(const FeatureExtractor& fx, const Image& img);

/// Unnormalized C x C Gram matrix of one sample's activation, row-major, in double.
std::vector<double> gram(const Tensor& act, int sample = 0);

/// Sum over taps of (1/C^2) * || K (G(a) - G(b)) ||_1 with K = 1/(C H W), in double.
double style_loss(const FeatureStack& a, const FeatureStack& b);
/// Mean absolute difference over all H*W*3 elements.
double recon_loss(const Image& i_unet, const Image& i_org);
/// recon + 150 (style(unet, org) + style(comp, org)) with comp = compose_refined(crg, m, unet).
double joint_loss(const Image& i_unet, const Image& i_crg, const Image& i_org, const Mask& m,
                  const FeatureExtractor& fx);
/// Mean BCE with scores clamped to [1e-7, 1 - 1e-7].
double disc_loss(std::span<const double> scores, std::span<const double> labels);

/// Differentiable joint loss over batches. `mask` is [N,1,H,W].
Var joint_loss_var(const Var& i_unet, const Tensor& i_crg, const Tensor& i_org, const Tensor& mask,
                   const FeatureExtractor& fx);

struct CrgLosses {
  Var gen_adv;
  Var disc_adv;
  Var latent_recon;
  Var image_recon;
};

/// Non-saturating GAN losses against an internal critic (logit output), plus
/// mse(e(g(z)), z) and mean-L1(g(e(x)), x).
CrgLosses crg_training_losses(const models::Generator& g, const models::Encoder& e,
                              const models::ConvEncoder& critic, const Var& real, const Var& z);

}  // namespace cycinpaint::losses
