#include "cycinpaint/losses/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cycinpaint/core/errors.hpp"
#include "cycinpaint/imaging/compose.hpp"

namespace cycinpaint::losses {
namespace {

constexpr std::array<float, 3> kImagenetMean = {0.485f, 0.456f, 0.406f};
constexpr std::array<float, 3> kImagenetStd = {0.229f, 0.224f, 0.225f};

Var normalize_input(const Var& x) {
  std::array<float, 3> scale, shift;
  for (int c = 0; c < 3; ++c) {
    scale[c] = 0.5f / kImagenetStd[c];
    shift[c] = (0.5f - kImagenetMean[c]) / kImagenetStd[c];
  }
  return nn::affine_channels(x, scale, shift);
}

Var style_sum(const std::vector<Var>& a, const std::vector<Var>& b) {
  Var total = nn::style_layer_loss(a[0], b[0]);
  for (std::size_t j = 1; j < a.size(); ++j) total = nn::add(total, nn::style_layer_loss(a[j], b[j]));
  return total;
}

}  // namespace

ExtractorConfig ExtractorConfig::vgg16() { return ExtractorConfig{}; }

ExtractorConfig ExtractorConfig::lite() {
  ExtractorConfig c;
  c.stage_convs = {1, 1, 1};
  c.stage_channels = {16, 32, 64};
  return c;
}

ExtractorConfig ExtractorConfig::toy() {
  ExtractorConfig c;
  c.stage_convs = {1, 1};
  c.stage_channels = {4, 6};
  return c;
}

FeatureExtractor::FeatureExtractor(const ExtractorConfig& cfg) : cfg_(cfg) {
  if (cfg.stage_convs.empty() || cfg.stage_convs.size() != cfg.stage_channels.size()) {
    throw ConfigError("extractor needs matching, non-empty stage_convs and stage_channels");
  }
  Rng rng(cfg.seed);
  int in = 3;
  for (std::size_t s = 0; s < cfg.stage_convs.size(); ++s) {
    if (cfg.stage_convs[s] < 1 || cfg.stage_channels[s] < 1) throw ConfigError("extractor stages must be positive");
    stages_.emplace_back();
    for (int i = 0; i < cfg.stage_convs[s]; ++i) {
      stages_.back().push_back(std::make_unique<nn::Conv2d>(in, cfg.stage_channels[s], 3, 1, 1, rng));
      register_module("conv" + std::to_string(s + 1) + "_" + std::to_string(i + 1), *stages_.back().back());
      in = cfg.stage_channels[s];
    }
  }
  set_requires_grad(false);
  set_training(false);
}

std::vector<Var> FeatureExtractor::operator()(const Var& x) const {
  const Shape& s = x.shape();
  if (s.c != 3 || s.h < min_resolution() || s.w < min_resolution()) {
    throw ShapeError("feature extractor needs 3 channels and at least " + std::to_string(min_resolution()) +
                     " px, got " + s.str());
  }
  std::vector<Var> taps;
  Var h = normalize_input(x);
  for (const auto& stage : stages_) {
    for (const auto& conv : stage) h = nn::relu((*conv)(h));
    h = nn::max_pool2(h);
    taps.push_back(h);
  }
  return taps;
}

std::string FeatureExtractor::provenance() const {
  std::string convs, widths;
  for (std::size_t i = 0; i < cfg_.stage_convs.size(); ++i) {
    convs += (i ? "," : "") + std::to_string(cfg_.stage_convs[i]);
    widths += (i ? "," : "") + std::to_string(cfg_.stage_channels[i]);
  }
  return "random-he-normal seed=" + std::to_string(cfg_.seed) + " convs=[" + convs + "] channels=[" + widths + "]";
}

FeatureStack extract_features(const FeatureExtractor& fx, const Image& img) {
  nn::NoGradGuard guard;
  FeatureStack out;
  for (const auto& v : fx(Var(img.tensor()))) out.push_back(v.value());
  return out;
}

std::vector<double> gram(const Tensor& act, int sample) {
  const int C = act.c();
  const std::size_t P = act.shape().plane();
  const float* base = act.sample(sample);
  std::vector<double> g(static_cast<std::size_t>(C) * C, 0.0);
  for (int i = 0; i < C; ++i) {
    const float* ai = base + i * P;
    for (int j = i; j < C; ++j) {
      const float* aj = base + j * P;
      double acc = 0.0;
      for (std::size_t p = 0; p < P; ++p) acc += static_cast<double>(ai[p]) * aj[p];
      g[static_cast<std::size_t>(i) * C + j] = acc;
      g[static_cast<std::size_t>(j) * C + i] = acc;
    }
  }
  return g;
}

double style_loss(const FeatureStack& a, const FeatureStack& b) {
  if (a.size() != b.size()) throw ShapeError("style_loss: feature stacks have different tap counts");
  double total = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    require_same_shape(a[j], b[j], "style_loss");
    const Shape s = a[j].shape();
    const double C = s.c;
    const double K = 1.0 / (C * static_cast<double>(s.plane()));
    double layer = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const auto ga = gram(a[j], n);
      const auto gb = gram(b[j], n);
      double acc = 0.0;
      for (std::size_t i = 0; i < ga.size(); ++i) acc += std::abs(K * (ga[i] - gb[i]));
      layer += acc / (C * C);
    }
    total += layer / s.n;
  }
  return total;
}

double recon_loss(const Image& i_unet, const Image& i_org) {
  imaging::require_same_size(i_unet, i_org, "recon_loss");
  const auto& a = i_unet.tensor();
  const auto& b = i_org.tensor();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(static_cast<double>(a[i]) - b[i]);
  return acc / static_cast<double>(a.size());
}

double joint_loss(const Image& i_unet, const Image& i_crg, const Image& i_org, const Mask& m,
                  const FeatureExtractor& fx) {
  const Image comp = imaging::compose_refined(i_crg, m, i_unet);
  const FeatureStack f_org = extract_features(fx, i_org);
  return recon_loss(i_unet, i_org) +
         kStyleWeight * (style_loss(extract_features(fx, i_unet), f_org) + style_loss(extract_features(fx, comp), f_org));
}

double disc_loss(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw ShapeError("disc_loss needs equally long, non-empty score and label lists");
  }
  constexpr double eps = 1e-7;
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores[i], eps, 1.0 - eps);
    acc -= labels[i] * std::log(s) + (1.0 - labels[i]) * std::log(1.0 - s);
  }
  return acc / static_cast<double>(scores.size());
}

Var joint_loss_var(const Var& i_unet, const Tensor& i_crg, const Tensor& i_org, const Tensor& mask,
                   const FeatureExtractor& fx) {
  require_same_shape(i_unet.value(), i_crg, "joint_loss");
  require_same_shape(i_unet.value(), i_org, "joint_loss");
  const Var org(i_org);
  const Var comp = nn::select_mask(mask, Var(i_crg), i_unet);
  std::vector<Var> f_org;
  {
    nn::NoGradGuard guard;
    f_org = fx(org);
  }
  const Var style = nn::add(style_sum(fx(i_unet), f_org), style_sum(fx(comp), f_org));
  return nn::add(nn::l1_mean(i_unet, org), nn::scale(style, static_cast<float>(kStyleWeight)));
}

CrgLosses crg_training_losses(const models::Generator& g, const models::Encoder& e,
                              const models::ConvEncoder& critic, const Var& real, const Var& z) {
  const int n = real.shape().n;
  const Tensor ones(Shape{z.shape().n, 1, 1, 1}, 1.0f);
  const Tensor real_ones(Shape{n, 1, 1, 1}, 1.0f);
  const Tensor zeros(Shape{z.shape().n, 1, 1, 1}, 0.0f);
  CrgLosses out;
  const Var fake = g(z);
  out.gen_adv = nn::bce_with_logits(critic(fake), ones);
  out.disc_adv = nn::add(nn::bce_with_logits(critic(real), real_ones),
                         nn::bce_with_logits(critic(nn::detach(fake)), zeros));
  out.latent_recon = nn::mse_mean(e(fake), z);
  out.image_recon = nn::l1_mean(g(e(real)), real);
  return out;
}

}  // namespace cycinpaint::losses
