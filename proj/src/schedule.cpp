#include "dirforge/schedule.hpp"

#include <cmath>
#include <string>

namespace dirforge {

NoiseSchedule NoiseSchedule::linear(int T, double beta_lo, double beta_hi) {
  if (T < 1) throw InvalidArgument("schedule: T must be >= 1");
  if (!(beta_lo > 0.0) || !(beta_hi < 1.0) || beta_lo > beta_hi)
    throw InvalidArgument("schedule: need 0 < beta_lo <= beta_hi < 1");
  std::vector<double> b(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) b[t] = T == 1 ? beta_lo : beta_lo + (beta_hi - beta_lo) * t / (T - 1);
  return from_betas(std::move(b));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas_1_to_T) {
  NoiseSchedule s;
  s.T = static_cast<int>(betas_1_to_T.size());
  if (s.T < 1) throw InvalidArgument("schedule: no betas");
  s.betas.assign(1, 0.0);
  s.betas.insert(s.betas.end(), betas_1_to_T.begin(), betas_1_to_T.end());
  s.alphas.resize(s.T + 1);
  s.alpha_bars.resize(s.T + 1);
  s.sigmas.assign(s.T + 1, 0.0);
  s.alphas[0] = 1.0;
  s.alpha_bars[0] = 1.0;
  for (int t = 1; t <= s.T; ++t) {
    if (!(s.betas[t] > 0.0 && s.betas[t] < 1.0) || s.betas[t] < s.betas[t - 1])
      throw InvalidArgument("schedule: betas must be increasing inside (0, 1)");
    s.alphas[t] = 1.0 - s.betas[t];
    s.alpha_bars[t] = s.alpha_bars[t - 1] * s.alphas[t];
    if (t >= 2)
      s.sigmas[t] = std::sqrt(s.betas[t] * (1.0 - s.alpha_bars[t - 1]) / (1.0 - s.alpha_bars[t]));
  }
  return s;
}

void NoiseSchedule::check_t(int t) const {
  if (t < 1 || t > T) throw InvalidArgument("timestep " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
}

double NoiseSchedule::sqrt_ab(int t) const { return std::sqrt(alpha_bars.at(t)); }
double NoiseSchedule::sqrt_1m_ab(int t) const { return std::sqrt(1.0 - alpha_bars.at(t)); }

Tensor forward_noise(const NoiseSchedule& s, const Tensor& x0, const std::vector<int>& t, const Tensor& eps) {
  if (x0.shape() != eps.shape()) throw ShapeError("forward_noise", x0.shape(), eps.shape());
  const std::size_t rows = x0.rank() == 2 ? x0.dim(0) : 1;
  if (t.size() != rows) throw ShapeError("forward_noise timesteps", x0.shape(), {t.size()});
  const std::size_t n = x0.numel() / rows;
  std::vector<double> out(x0.numel());
  for (std::size_t i = 0; i < rows; ++i) {
    s.check_t(t[i]);
    const double a = s.sqrt_ab(t[i]), b = s.sqrt_1m_ab(t[i]);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a * x0.at(i * n + j) + b * eps.at(i * n + j);
  }
  return Tensor::from(x0.shape(), std::move(out));
}

Tensor forward_noise(const NoiseSchedule& s, const Tensor& x0, int t, const Tensor& eps) {
  const std::size_t rows = x0.rank() == 2 ? x0.dim(0) : 1;
  return forward_noise(s, x0, std::vector<int>(rows, t), eps);
}

}  // namespace dirforge
