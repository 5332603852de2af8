#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dirforge/nn.hpp"
#include "dirforge/world.hpp"

namespace dirforge {

struct EncoderConfig {
  std::size_t hidden = 64;
  std::size_t k = 16;
  std::size_t train_samples = 4000;
  std::size_t epochs = 30;
  std::size_t batch = 64;
  double lr = 3e-3;
  std::uint64_t seed = 0;
};

// MLP 256 -> hidden -> k with a softplus hidden layer. Outputs are
// unit-normalized unless `normalize` is off.
class Encoder {
 public:
  Encoder() = default;
  Encoder(std::size_t hidden, std::size_t k, Rng& rng);

  // [B, 256] -> [B, k].
  Tensor forward(const Tensor& x) const;
  Tensor forward_raw(const Tensor& x) const;
  std::vector<double> embed(const world::Image& x) const;
  std::vector<double> embed_raw(const world::Image& x) const;

  std::size_t k() const { return l2_.out(); }
  std::size_t hidden() const { return l1_.out(); }
  bool normalize = true;

  std::vector<NamedTensor> params() const;
  std::uint64_t checksum() const { return dirforge::checksum(params()); }

 private:
  Linear l1_, l2_;
};

struct EncoderTrainLog {
  std::vector<double> epoch_loss;
};

// Regresses normalized style vectors ((s - mid) / half-span) through a linear
// head on the unit-normalized embedding; the head is thrown away afterwards.
// Parameters come back frozen and rounded to float32.
Encoder train_encoder(const EncoderConfig& cfg, EncoderTrainLog* log = nullptr,
                      const std::function<void(std::size_t, double)>& on_epoch = {});

// Held-out R^2 of an affine least-squares probe from embeddings to each style
// attribute (fit on n_fit samples, scored on n_test others).
std::array<double, world::kAttrs> probe_r2(const Encoder& enc, std::uint64_t seed, std::size_t n_fit = 2000,
                                           std::size_t n_test = 1000);

}  // namespace dirforge
