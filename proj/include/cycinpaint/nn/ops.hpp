#pragma once

#include <span>

#include "cycinpaint/core/rng.hpp"
#include "cycinpaint/nn/autograd.hpp"

namespace cycinpaint::nn {

/// 2-D cross-correlation. weight is [out, in, k, k]; bias (optional) [out,1,1,1].
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);

/// Fully connected over each sample's flattened features. weight [out, in, 1, 1].
/// Output is [N, out, 1, 1].
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Per-channel batch normalization over (N, H, W). Running statistics are
/// updated in place (momentum-weighted, unbiased variance) when training.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean,
               Tensor& running_var, bool training, float momentum = 0.1f, float eps = 1e-5f);

Var leaky_relu(const Var& x, float slope);
Var relu(const Var& x);
Var tanh(const Var& x);
Var sigmoid(const Var& x);

/// Drops whole channels with probability p and rescales survivors by 1/(1-p).
Var spatial_dropout(const Var& x, float p, Rng& rng, bool training);

Var max_pool2(const Var& x);
Var avg_pool2(const Var& x);
Var global_avg_pool(const Var& x);
/// Per-channel maximum over the whole plane; the gradient goes to the first maximal element.
Var global_max_pool(const Var& x);
Var upsample_nearest2(const Var& x);
Var concat_channels(const Var& a, const Var& b);
Var reshape(const Var& x, Shape shape);
Var detach(const Var& x);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);

/// mask != 0 ? known : fill, elementwise. mask is [N,1,H,W] (broadcast over
/// channels) or full-shaped, and carries no gradient.
Var select_mask(const Tensor& mask, const Var& known, const Var& fill);

/// y[n,c] = x[n,c] * scale[c] + shift[c] with constant coefficients.
Var affine_channels(const Var& x, std::span<const float> scale, std::span<const float> shift);

Var sum(const Var& x);
Var mean(const Var& x);

/// mean |a - b| over all elements.
Var l1_mean(const Var& a, const Var& b);
/// mean (a - b)^2 over all elements.
Var mse_mean(const Var& a, const Var& b);

/// Mean binary cross-entropy of probabilities against soft targets, with
/// scores clamped to [eps, 1 - eps].
Var bce(const Var& scores, const Tensor& targets, float eps = 1e-7f);
/// Numerically stable binary cross-entropy on logits.
Var bce_with_logits(const Var& logits, const Tensor& targets);

/// Batch mean of (1/C^2) * || K (G(a) - G(b)) ||_1 where G is the unnormalized
/// Gram matrix of each sample's C x (H W) activation and K = 1/(C H W).
Var style_layer_loss(const Var& a, const Var& b);

}  // namespace cycinpaint::nn
