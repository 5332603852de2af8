#include "dirforge/optim.hpp"

#include <cmath>
#include <string>

namespace dirforge {

void adamw_step(std::vector<double>& param, const std::vector<double>& grad, AdamWState& state,
                const AdamWConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw InvalidArgument("adamw: learning rate must be > 0, got " + std::to_string(cfg.lr));
  if (grad.size() != param.size()) throw ShapeError("adamw_step", {param.size()}, {grad.size()});
  if (state.m.empty()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
  }
  if (state.m.size() != param.size()) throw ShapeError("adamw_step state", {param.size()}, {state.m.size()});
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    param[i] = param[i] * decay - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg)
    : params_(std::move(params)), states_(params_.size()), cfg_(cfg) {
  if (!(cfg_.lr > 0.0)) throw InvalidArgument("adamw: learning rate must be > 0, got " + std::to_string(cfg_.lr));
}

void AdamW::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adamw_step(params_[i].mutable_values(), params_[i].grad(), states_[i], cfg_);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double grad_norm(const std::vector<Tensor>& params) {
  double s = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) s += g * g;
  return std::sqrt(s);
}

double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
  const double n = grad_norm(params);
  if (n > max_norm && n > 0.0) {
    const double f = max_norm / n;
    for (auto& p : params)
      for (double& g : p.mutable_grad()) g *= f;
  }
  return n;
}

}  // namespace dirforge
