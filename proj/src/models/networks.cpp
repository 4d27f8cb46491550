#include "cycinpaint/models/networks.hpp"

#include "cycinpaint/core/errors.hpp"

namespace cycinpaint::models {
namespace {

constexpr float kSlope = 0.2f;

void require_image_batch(const Var& x, int resolution, const char* who) {
  const Shape& s = x.shape();
  if (s.c != 3 || s.h != resolution || s.w != resolution) {
    throw ShapeError(std::string(who) + " expects [N,3," + std::to_string(resolution) + "," +
                     std::to_string(resolution) + "], got " + s.str());
  }
}

}  // namespace

Generator::Generator(const ArchConfig& arch, Rng& rng)
    : latent_dim_(arch.latent_dim), resolution_(arch.resolution), c0_(arch.channels_at(4)) {
  arch.validate();
  fc_ = std::make_unique<nn::Linear>(latent_dim_, c0_ * 16, rng);
  bn0_ = std::make_unique<nn::BatchNorm2d>(c0_);
  register_module("fc", *fc_);
  register_module("bn0", *bn0_);
  int in = c0_;
  for (int size = 8; size <= resolution_; size *= 2) {
    const int out = arch.channels_at(size);
    convs_.push_back(std::make_unique<nn::Conv2d>(in, out, 3, 1, 1, rng, true, kSlope));
    bns_.push_back(std::make_unique<nn::BatchNorm2d>(out));
    const std::string idx = std::to_string(convs_.size());
    register_module("conv" + idx, *convs_.back());
    register_module("bn" + idx, *bns_.back());
    in = out;
  }
  to_rgb_ = std::make_unique<nn::Conv2d>(in, 3, 3, 1, 1, rng, true, 1.0f);
  register_module("to_rgb", *to_rgb_);
}

Var Generator::operator()(const Var& z) const {
  const Shape& s = z.shape();
  if (s.c * s.h * s.w != latent_dim_) {
    throw ShapeError("generator expects latent length " + std::to_string(latent_dim_) + ", got " + s.str());
  }
  Var h = (*fc_)(z);
  h = nn::reshape(h, Shape{s.n, c0_, 4, 4});
  h = nn::leaky_relu((*bn0_)(h), kSlope);
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = nn::upsample_nearest2(h);
    h = nn::leaky_relu((*bns_[i])((*convs_[i])(h)), kSlope);
  }
  return nn::tanh((*to_rgb_)(h));
}

ConvEncoder::ConvEncoder(const ArchConfig& arch, int out_features, bool batch_norm, Rng& rng)
    : resolution_(arch.resolution), out_(out_features) {
  arch.validate();
  int in = arch.channels_at(resolution_);
  from_rgb_ = std::make_unique<nn::Conv2d>(3, in, 3, 1, 1, rng, true, kSlope);
  register_module("from_rgb", *from_rgb_);
  for (int size = resolution_ / 2; size >= 4; size /= 2) {
    const int out = arch.channels_at(size);
    convs_.push_back(std::make_unique<nn::Conv2d>(in, out, 3, 2, 1, rng, true, kSlope));
    const std::string idx = std::to_string(convs_.size());
    register_module("conv" + idx, *convs_.back());
    if (batch_norm) {
      bns_.push_back(std::make_unique<nn::BatchNorm2d>(out));
      register_module("bn" + idx, *bns_.back());
    }
    in = out;
  }
  fc_ = std::make_unique<nn::Linear>(in * 16, out_features, rng);
  register_module("fc", *fc_);
}

Var ConvEncoder::operator()(const Var& x) const {
  require_image_batch(x, resolution_, "encoder");
  Var h = nn::leaky_relu((*from_rgb_)(x), kSlope);
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = (*convs_[i])(h);
    if (!bns_.empty()) h = (*bns_[i])(h);
    h = nn::leaky_relu(h, kSlope);
  }
  return (*fc_)(h);
}

ArtifactDiscriminator::ArtifactDiscriminator(const ArchConfig& arch, Rng& rng) : dropout_(arch.disc_dropout) {
  arch.validate();
  int in = 3;
  for (int out : arch.disc_channels) {
    convs_.push_back(std::make_unique<nn::Conv2d>(in, out, 3, 2, 1, rng, true, kSlope));
    bns_.push_back(std::make_unique<nn::BatchNorm2d>(out));
    const std::string idx = std::to_string(convs_.size());
    register_module("conv" + idx, *convs_.back());
    register_module("bn" + idx, *bns_.back());
    in = out;
  }
  hidden_ = std::make_unique<nn::Linear>(in, in, rng);
  fc_ = std::make_unique<nn::Linear>(in, 1, rng);
  register_module("hidden", *hidden_);
  register_module("fc", *fc_);
}

Var ArtifactDiscriminator::logits(const Var& x) const {
  if (x.shape().c != 3) throw ShapeError("discriminator expects 3 channels, got " + x.shape().str());
  Var h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = nn::leaky_relu((*bns_[i])((*convs_[i])(h)), kSlope);
    h = nn::spatial_dropout(h, dropout_, dropout_rng_, training());
  }
  return (*fc_)(nn::leaky_relu((*hidden_)(nn::global_max_pool(h)), kSlope));
}

Var ArtifactDiscriminator::operator()(const Var& x) const { return nn::sigmoid(logits(x)); }

Refiner::Refiner(const ArchConfig& arch, Rng& rng)
    : resolution_(arch.refiner_resolution), channels_(arch.refiner_channels) {
  arch.validate();
  static constexpr int kernels[6] = {7, 5, 5, 3, 3, 3};
  int in = 3;
  for (int i = 0; i < 6; ++i) {
    enc_.push_back(std::make_unique<nn::Conv2d>(in, channels_[i], kernels[i], 2, kernels[i] / 2, rng));
    enc_bn_.push_back(std::make_unique<nn::BatchNorm2d>(channels_[i]));
    register_module("conv" + std::to_string(i + 1), *enc_.back());
    register_module("bn" + std::to_string(i + 1), *enc_bn_.back());
    in = channels_[i];
  }
  // Decoder stage k concatenates Conv(6-k) (or the input for the last stage).
  for (int k = 0; k < 7; ++k) {
    const int skip = k < 6 ? channels_[5 - k] : 3;
    const int out = k < 6 ? channels_[5 - k] : 3;
    const float slope = k < 6 ? kSlope : 1.0f;
    dec_.push_back(std::make_unique<nn::Conv2d>(in + skip, out, 3, 1, 1, rng, true, slope));
    register_module("conv" + std::to_string(k + 7), *dec_.back());
    if (k < 6) {
      dec_bn_.push_back(std::make_unique<nn::BatchNorm2d>(out));
      register_module("bn" + std::to_string(k + 7), *dec_bn_.back());
    }
    in = out;
  }
}

Var Refiner::operator()(const Var& x, RefinerTrace* trace) const {
  const Shape& s = x.shape();
  if (s.c != 3 || s.h != s.w || s.h < kRefinerDivisor || s.h % kRefinerDivisor != 0) {
    throw ShapeError("refiner needs a square 3-channel input divisible by 128, got " + s.str());
  }
  if (trace) *trace = RefinerTrace{s, {}, {}, {}, {}};
  std::vector<Var> skips{x};
  Var h = x;
  for (std::size_t i = 0; i < enc_.size(); ++i) {
    h = nn::relu((*enc_bn_[i])((*enc_[i])(h)));
    if (trace) trace->encoder.push_back(h.shape());
    skips.push_back(h);
  }
  h = nn::avg_pool2(h);
  if (trace) trace->bottleneck = h.shape();
  for (std::size_t k = 0; k < dec_.size(); ++k) {
    h = nn::upsample_nearest2(h);
    const Var& skip = skips[skips.size() - 1 - k];
    if (skip.shape().h != h.shape().h) {
      throw ShapeError("refiner skip mismatch at stage " + std::to_string(k + 1));
    }
    h = nn::concat_channels(h, skip);
    if (trace) trace->concat.push_back(h.shape());
    h = (*dec_[k])(h);
    if (k < dec_bn_.size()) h = nn::leaky_relu((*dec_bn_[k])(h), kSlope);
    else h = nn::tanh(h);
    if (trace) trace->decoder.push_back(h.shape());
  }
  return h;
}

}  // namespace cycinpaint::models
