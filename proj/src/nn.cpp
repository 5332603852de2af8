#include "dirforge/nn.hpp"

#include <cmath>
#include <cstring>

namespace dirforge {

Linear::Linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> wv(in * out), bv(out);
  for (double& v : wv) v = rng.uniform(-bound, bound);
  for (double& v : bv) v = rng.uniform(-bound, bound);
  w = Tensor::from({in, out}, std::move(wv));
  b = Tensor::from({out}, std::move(bv));
}

void set_trainable(std::vector<NamedTensor>& params, bool on) {
  for (auto& p : params) {
    p.tensor.set_requires_grad(on);
    if (!on) p.tensor.node()->grad.clear();
  }
}

void round_to_f32(std::vector<NamedTensor>& params) {
  for (auto& p : params)
    for (double& v : p.tensor.mutable_values()) v = static_cast<double>(static_cast<float>(v));
}

std::uint64_t checksum(const std::vector<NamedTensor>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params) {
    mix(p.name.data(), p.name.size());
    mix(p.tensor.data(), p.tensor.numel() * sizeof(double));
  }
  return h;
}

void load_values(std::vector<NamedTensor>& dst, const std::vector<NamedTensor>& src) {
  for (auto& d : dst) {
    const NamedTensor* match = nullptr;
    for (const auto& s : src)
      if (s.name == d.name) match = &s;
    if (match == nullptr) throw InvalidArgument("missing parameter '" + d.name + "'");
    if (match->tensor.shape() != d.tensor.shape()) throw ShapeError("load " + d.name, d.tensor.shape(), match->tensor.shape());
    d.tensor.mutable_values() = match->tensor.values();
  }
}

Tensor stack_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw InvalidArgument("stack_rows: no rows");
  const std::size_t w = rows[0].size();
  std::vector<double> out;
  out.reserve(rows.size() * w);
  for (const auto& r : rows) {
    if (r.size() != w) throw ShapeError("stack_rows", {w}, {r.size()});
    out.insert(out.end(), r.begin(), r.end());
  }
  return Tensor::from({rows.size(), w}, std::move(out));
}

std::vector<std::vector<double>> unstack_rows(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("unstack_rows", t.shape(), {});
  const std::size_t m = t.dim(0), n = t.dim(1);
  std::vector<std::vector<double>> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i].assign(t.data() + i * n, t.data() + (i + 1) * n);
  return out;
}

}  // namespace dirforge
