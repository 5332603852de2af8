#pragma once

#include <cstddef>
#include <vector>

#include "dirforge/tensor.hpp"

namespace dirforge {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

// One AdamW update of `param` in place: decay p <- p(1 - lr wd), then the
// bias-corrected Adam step. Throws InvalidArgument for lr <= 0.
void adamw_step(std::vector<double>& param, const std::vector<double>& grad, AdamWState& state,
                const AdamWConfig& cfg);

class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig cfg);

  void step();
  void zero_grad();
  void set_lr(double lr) { cfg_.lr = lr; }
  const AdamWConfig& config() const { return cfg_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamWState> states_;
  AdamWConfig cfg_;
};

// Global L2 norm of all parameter gradients.
double grad_norm(const std::vector<Tensor>& params);
// Rescales gradients so their global norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

}  // namespace dirforge
