#pragma once

#include <cstddef>
#include <vector>

#include "dirforge/tensor.hpp"

namespace dirforge {

// Arrays have length T + 1; index 0 is the clean image (beta 0, alpha_bar 1).
struct NoiseSchedule {
  int T = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;
  // Posterior standard deviation sqrt(beta_t (1 - abar_{t-1}) / (1 - abar_t)); sigma_1 = 0.
  std::vector<double> sigmas;

  static NoiseSchedule linear(int T, double beta_lo, double beta_hi);
  static NoiseSchedule from_betas(std::vector<double> betas_1_to_T);

  double sqrt_ab(int t) const;
  double sqrt_1m_ab(int t) const;
  void check_t(int t) const;
};

// Per-row x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, 1 <= t <= T.
Tensor forward_noise(const NoiseSchedule& s, const Tensor& x0, int t, const Tensor& eps);
Tensor forward_noise(const NoiseSchedule& s, const Tensor& x0, const std::vector<int>& t, const Tensor& eps);

}  // namespace dirforge
