#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dirforge/rng.hpp"
#include "dirforge/tensor.hpp"

namespace dirforge {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// y = x W + b with W stored [in, out]. Weights and bias start uniform in
// +-1/sqrt(in).
struct Linear {
  Tensor w;
  Tensor b;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return add_bias(matmul(x, w), b); }
  std::size_t in() const { return w.dim(0); }
  std::size_t out() const { return w.dim(1); }
};

void set_trainable(std::vector<NamedTensor>& params, bool on);
// Rounds every value through float32, the precision checkpoints store.
void round_to_f32(std::vector<NamedTensor>& params);
// FNV-1a over the raw bytes of every parameter, in order.
std::uint64_t checksum(const std::vector<NamedTensor>& params);
// Copies values from `src` into `dst` by name; throws on a missing name or
// shape mismatch.
void load_values(std::vector<NamedTensor>& dst, const std::vector<NamedTensor>& src);

// Rows of `images` stacked into a [n, width] tensor.
Tensor stack_rows(const std::vector<std::vector<double>>& rows);
std::vector<std::vector<double>> unstack_rows(const Tensor& t);

}  // namespace dirforge
