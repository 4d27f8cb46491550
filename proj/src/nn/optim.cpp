#include "cycinpaint/nn/optim.hpp"

#include <cmath>

#include "cycinpaint/simd/kernels.hpp"

namespace cycinpaint::nn {

void Optimizer::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Adam::Adam(std::vector<Var> params, double lr, double beta1, double beta2, double eps)
    : Optimizer(std::move(params), lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
  }
}

void Adam::step() {
  ++steps_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  // Bias correction folded into the step size and epsilon:
  // lr * m_hat / (sqrt(v_hat) + eps) == lr_t * m / (sqrt(v) + eps * sqrt(bc2)).
  const auto lr_t = static_cast<float>(lr_ * std::sqrt(bc2) / bc1);
  const auto eps_t = static_cast<float>(eps_ * std::sqrt(bc2));
  const auto& k = simd::kernels();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.requires_grad() || p.grad().empty()) continue;
    k.adam(p.mutable_value().data(), p.grad().data(), m_[i].data(), v_[i].data(), p.value().size(),
           lr_t, static_cast<float>(beta1_), static_cast<float>(beta2_), eps_t);
  }
  zero_grad();
}

RmsProp::RmsProp(std::vector<Var> params, double lr, double rho, double eps)
    : Optimizer(std::move(params), lr), rho_(rho), eps_(eps) {
  for (const auto& p : params_) v_.emplace_back(p.shape());
}

void RmsProp::step() {
  const auto& k = simd::kernels();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.requires_grad() || p.grad().empty()) continue;
    k.rmsprop(p.mutable_value().data(), p.grad().data(), v_[i].data(), p.value().size(),
              static_cast<float>(lr_), static_cast<float>(rho_), static_cast<float>(eps_));
  }
  zero_grad();
}

bool PlateauSchedule::observe(double val_loss, Optimizer& opt) {
  if (val_loss < best_) {
    best_ = val_loss;
    wait_ = 0;
    return false;
  }
  if (++wait_ >= patience_) {
    opt.set_lr(opt.lr() / factor_);
    wait_ = 0;
    return true;
  }
  return false;
}

}  // namespace cycinpaint::nn
