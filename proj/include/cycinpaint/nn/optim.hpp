#pragma once

#include <limits>
#include <vector>

#include "cycinpaint/nn/autograd.hpp"

namespace cycinpaint::nn {

class Optimizer {
 public:
  explicit Optimizer(std::vector<Var> params, double lr) : params_(std::move(params)), lr_(lr) {}
  virtual ~Optimizer() = default;

  /// Applies one update from the accumulated gradients, then zeroes them.
  virtual void step() = 0;
  void zero_grad();

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 protected:
  std::vector<Var> params_;
  double lr_;
};

class Adam : public Optimizer {
 public:
  Adam(std::vector<Var> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step() override;

 private:
  double beta1_, beta2_, eps_;
  long steps_ = 0;
  std::vector<Tensor> m_, v_;
};

/// RMSProp with the square root taken before adding epsilon.
class RmsProp : public Optimizer {
 public:
  RmsProp(std::vector<Var> params, double lr, double rho = 0.9, double eps = 1e-8);
  void step() override;

 private:
  double rho_, eps_;
  std::vector<Tensor> v_;
};

/// Divides the learning rate by `factor` once `patience` consecutive epochs
/// pass without a new strict minimum of the monitored loss.
class PlateauSchedule {
 public:
  PlateauSchedule(int patience, double factor) : patience_(patience), factor_(factor) {}

  /// Feeds one epoch's validation loss; returns true when the rate was reduced.
  bool observe(double val_loss, Optimizer& opt);

  double best() const { return best_; }
  int epochs_since_best() const { return wait_; }

 private:
  int patience_;
  double factor_;
  double best_ = std::numeric_limits<double>::infinity();
  int wait_ = 0;
};

}  // namespace cycinpaint::nn
