#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dirforge/diffusion.hpp"
#include "dirforge/direction.hpp"
#include "dirforge/encoder.hpp"
#include "dirforge/rng.hpp"
#include "dirforge/tensor.hpp"

namespace dirforge::testing {

using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

// ||g_analytic - g_fd|| / max(||g_analytic|| + ||g_fd||, 1e-12), taken over
// every element of every leaf. Central differences with step h.
inline double grad_check(const ScalarFn& f, std::vector<Tensor> leaves, double h = 1e-5) {
  for (auto& l : leaves) {
    l.zero_grad();
    l.set_requires_grad(true);
  }
  backward(f(leaves));
  double diff2 = 0.0, na2 = 0.0, nf2 = 0.0;
  for (auto& l : leaves) {
    const std::vector<double> ga = l.has_grad() ? l.grad() : std::vector<double>(l.numel(), 0.0);
    auto& vals = l.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double up = f(leaves).item();
      vals[i] = keep - h;
      const double down = f(leaves).item();
      vals[i] = keep;
      const double g = (up - down) / (2 * h);
      diff2 += (ga[i] - g) * (ga[i] - g);
      na2 += ga[i] * ga[i];
      nf2 += g * g;
    }
  }
  return std::sqrt(diff2) / std::max(std::sqrt(na2) + std::sqrt(nf2), 1e-12);
}

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

// Fixed random weights turn any output into a scalar that exercises every
// output gradient entry.
inline Tensor contract(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed, 99);
  return sum(mul(y, random_tensor(rng, y.shape())));
}

struct GradCase {
  std::string name;
  ScalarFn f;
  std::vector<Tensor> leaves;
};

// Random cases covering every differentiable primitive; `per_op` draws per
// primitive with fresh shapes and values.
std::vector<GradCase> primitive_cases(std::uint64_t seed, int per_op);

// A small untrained model and encoder, enough for identities and gradients.
inline DiffusionModel tiny_model(std::uint64_t seed, int T = 12, std::size_t hidden = 24, std::size_t k = 4) {
  Rng rng(seed, 1);
  DenoiserConfig dc;
  dc.hidden = hidden;
  dc.temb = 8;
  dc.k = k;
  return DiffusionModel{NoiseSchedule::linear(T, 1e-3, 0.2), Denoiser(dc, rng), DataScale{}};
}

inline Encoder tiny_encoder(std::uint64_t seed, std::size_t k = 4, std::size_t hidden = 12) {
  Rng rng(seed, 2);
  return Encoder(hidden, k, rng);
}

// Cases for the full transfer objective w_sem L_sem + w_lat L_latent as a
// function of d, on pairs from the world and shared noise.
std::vector<GradCase> transfer_loss_cases(std::uint64_t seed, int count);

}  // namespace dirforge::testing
