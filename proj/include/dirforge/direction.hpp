#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dirforge/diffusion.hpp"
#include "dirforge/encoder.hpp"
#include "dirforge/world.hpp"

namespace dirforge {

struct TransferConfig {
  std::size_t n = 100;
  std::size_t batch = 8;
  std::size_t iterations = 1000;
  double lr = 5e-3;
  double weight_decay = 0.01;
  // Timesteps drawn uniformly from [t_lo, t_hi]; t_hi = 0 means T.
  int t_lo = 1;
  int t_hi = 0;
  double w_sem = 1.0;
  double w_latent = 1.0;
  double init_scale = 0.01;
  bool clip = false;
  double clip_norm = 1.0;
  double norm_ceiling = 50.0;
  std::uint64_t seed = 0;
};

struct DirectionProvenance {
  std::uint64_t world_seed = 0;
  std::string direction;
  std::size_t n = 0;
  std::size_t iterations = 0;
  std::uint64_t config_hash = 0;
  double w_sem = 1.0;
  double w_latent = 1.0;
};

struct DirectionEmbedding {
  std::string name;
  std::vector<double> d;
  DirectionProvenance provenance;
  double recommended_lambda_e = 1.0;
  double window_lo = 0.0;
  double window_hi = 0.4;
};

// -mean over batch and pixels of (eps(x'_t, d) - eps(x_t, d))^2. x_t and x2_t
// must be noised with the same eps and t. d is [k].
Tensor latent_loss(const DiffusionModel& m, const Tensor& x_t, const Tensor& x2_t, const std::vector<int>& t,
                   const Tensor& d);

// Batch mean of 1 - cos(E(x'), d) + cos(E(x), d); x, x2 are pixel images [B, 256].
Tensor semantic_loss(const Encoder& enc, const Tensor& x, const Tensor& x2, const Tensor& d);

struct LearnLog {
  std::vector<double> loss;
  std::vector<double> semantic;
  std::vector<double> latent;
  std::vector<double> d_norm;
  std::vector<std::string> warnings;
};

// Raised when the loss goes non-finite; carries the last finite d.
class DirectionDivergence : public DivergenceError {
 public:
  DirectionDivergence(const std::string& what, std::vector<double> last_good)
      : DivergenceError(what), last_good_d(std::move(last_good)) {}
  std::vector<double> last_good_d;
};

// AdamW on d only, with model and encoder frozen (checked by checksum). The
// result is rounded to float32 so it matches what a direction file holds.
DirectionEmbedding learn_direction(const world::PairSet& pairs, const std::string& name, const DiffusionModel& m,
                                   const Encoder& enc, const TransferConfig& cfg, LearnLog* log = nullptr);

}  // namespace dirforge
