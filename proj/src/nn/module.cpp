#include "cycinpaint/nn/module.hpp"

#include <cmath>

#include "cycinpaint/core/errors.hpp"

namespace cycinpaint::nn {

void Module::set_training(bool on) {
  training_ = on;
  for (auto& [name, child] : children_) child->set_training(on);
}

std::vector<Var> Module::parameters() const {
  std::vector<Var> out;
  for (const auto& [name, p] : params_) out.push_back(p);
  for (const auto& [name, child] : children_) {
    auto sub = child->parameters();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

std::vector<StateEntry> Module::state() {
  std::vector<StateEntry> out;
  collect("", out);
  return out;
}

void Module::collect(const std::string& prefix, std::vector<StateEntry>& out) {
  for (auto& [name, p] : params_) out.push_back({prefix + name, &p.mutable_value(), true});
  for (auto& [name, b] : buffers_) out.push_back({prefix + name, b.get(), false});
  for (auto& [name, child] : children_) child->collect(prefix + name + ".", out);
}

std::size_t Module::count_params() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.value().size();
  return total;
}

void Module::set_requires_grad(bool on) {
  for (auto& p : parameters()) p.set_requires_grad(on);
}

void Module::zero_grad() {
  for (auto& p : parameters()) p.zero_grad();
}

std::vector<Tensor> Module::snapshot() const {
  std::vector<Tensor> out;
  for (const auto& e : const_cast<Module*>(this)->state()) out.push_back(*e.tensor);
  return out;
}

void Module::restore(const std::vector<Tensor>& snap) {
  auto entries = state();
  if (entries.size() != snap.size()) throw ShapeError("restore: state size mismatch");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    require_same_shape(*entries[i].tensor, snap[i], entries[i].name.c_str());
    *entries[i].tensor = snap[i];
  }
}

Var Module::register_parameter(std::string name, Tensor init) {
  Var v(std::move(init), true);
  params_.emplace_back(std::move(name), v);
  return v;
}

Tensor& Module::register_buffer(std::string name, Tensor init) {
  buffers_.emplace_back(std::move(name), std::make_unique<Tensor>(std::move(init)));
  return *buffers_.back().second;
}

void Module::register_module(std::string name, Module& child) {
  children_.emplace_back(std::move(name), &child);
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& rng,
               bool bias, float leaky_slope)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), pad_(pad) {
  const int fan_in = in_channels * kernel * kernel;
  const double std = std::sqrt(2.0 / ((1.0 + leaky_slope * leaky_slope) * fan_in));
  Tensor w(Shape{out_channels, in_channels, kernel, kernel});
  for (auto& v : w.span()) v = static_cast<float>(rng.normal(0.0, std));
  weight_ = register_parameter("weight", std::move(w));
  if (bias) bias_ = register_parameter("bias", Tensor(Shape{out_channels, 1, 1, 1}));
}

Var Conv2d::operator()(const Var& x) const { return conv2d(x, weight_, bias_, stride_, pad_); }

BatchNorm2d::BatchNorm2d(int channels, float momentum, float eps) : momentum_(momentum), eps_(eps) {
  gamma_ = register_parameter("gamma", Tensor(Shape{channels, 1, 1, 1}, 1.0f));
  beta_ = register_parameter("beta", Tensor(Shape{channels, 1, 1, 1}, 0.0f));
  running_mean_ = &register_buffer("running_mean", Tensor(Shape{channels, 1, 1, 1}, 0.0f));
  running_var_ = &register_buffer("running_var", Tensor(Shape{channels, 1, 1, 1}, 1.0f));
}

Var BatchNorm2d::operator()(const Var& x) const {
  return batch_norm(x, gamma_, beta_, *running_mean_, *running_var_, training(), momentum_, eps_);
}

Linear::Linear(int in_features, int out_features, Rng& rng, float init_std)
    : in_(in_features), out_(out_features) {
  const double std = init_std > 0.0f ? init_std : std::sqrt(1.0 / in_features);
  Tensor w(Shape{out_features, in_features, 1, 1});
  for (auto& v : w.span()) v = static_cast<float>(rng.normal(0.0, std));
  weight_ = register_parameter("weight", std::move(w));
  bias_ = register_parameter("bias", Tensor(Shape{out_features, 1, 1, 1}));
}

Var Linear::operator()(const Var& x) const { return linear(x, weight_, bias_); }

}  // namespace cycinpaint::nn
