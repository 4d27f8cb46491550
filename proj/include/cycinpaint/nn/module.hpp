#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cycinpaint/core/rng.hpp"
#include "cycinpaint/nn/autograd.hpp"
#include "cycinpaint/nn/ops.hpp"

namespace cycinpaint::nn {

/// A named slot in a module's serializable state.
struct StateEntry {
  std::string name;
  Tensor* tensor;
  bool trainable;
};

/// Base for layers and networks. Registration stores raw pointers into the
/// derived object, so modules are neither copyable nor movable; hold
/// networks through std::unique_ptr.
class Module {
 public:
  Module() = default;
  virtual ~Module() = default;
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;

  /// Switches batch-norm statistics and dropout between training and inference.
  void set_training(bool on);
  bool training() const { return training_; }

  std::vector<Var> parameters() const;
  /// Parameters then buffers, recursively, with dotted names. Order is stable.
  std::vector<StateEntry> state();
  std::size_t count_params() const;
  void set_requires_grad(bool on);
  void zero_grad();

  /// Deep copy of all state tensors (for best-checkpoint snapshots).
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& snap);

 protected:
  Var register_parameter(std::string name, Tensor init);
  Tensor& register_buffer(std::string name, Tensor init);
  void register_module(std::string name, Module& child);

 private:
  void collect(const std::string& prefix, std::vector<StateEntry>& out);

  bool training_ = false;
  std::vector<std::pair<std::string, Var>> params_;
  std::vector<std::pair<std::string, std::unique_ptr<Tensor>>> buffers_;
  std::vector<std::pair<std::string, Module*>> children_;
};

class Conv2d : public Module {
 public:
  /// He-normal weights for the given leaky slope; zero bias.
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& rng,
         bool bias = true, float leaky_slope = 0.0f);
  Var operator()(const Var& x) const;

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return kernel_; }
  int stride() const { return stride_; }

 private:
  int in_, out_, kernel_, stride_, pad_;
  Var weight_;
  Var bias_;
};

class BatchNorm2d : public Module {
 public:
  explicit BatchNorm2d(int channels, float momentum = 0.1f, float eps = 1e-5f);
  Var operator()(const Var& x) const;

 private:
  float momentum_, eps_;
  Var gamma_;
  Var beta_;
  Tensor* running_mean_;
  Tensor* running_var_;
};

class Linear : public Module {
 public:
  Linear(int in_features, int out_features, Rng& rng, float init_std = 0.0f);
  Var operator()(const Var& x) const;

  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_, out_;
  Var weight_;
  Var bias_;
};

}  // namespace cycinpaint::nn
