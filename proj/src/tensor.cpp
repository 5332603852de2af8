#include "dirforge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>

#include "dirforge/kernels.hpp"
#include "dirforge/parallel.hpp"

namespace dirforge {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

ShapeError::ShapeError(std::string op, Shape lhs, Shape rhs)
    : Error(op + ": incompatible shapes " + shape_str(lhs) + " and " + shape_str(rhs)),
      op_(std::move(op)),
      lhs_(std::move(lhs)),
      rhs_(std::move(rhs)) {}

namespace {

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

Node& checked(const std::shared_ptr<Node>& n) {
  if (!n) throw InvalidArgument("use of an undefined tensor");
  return *n;
}

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> data) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  return n;
}

// Wires parents and the backward closure when any parent tracks gradients.
Tensor finish(std::shared_ptr<Node> out, std::string_view op,
              std::vector<std::shared_ptr<Node>> parents, std::function<void(Node&)> bw) {
  out->op = op;
  bool track = false;
  for (const auto& p : parents) track = track || p->requires_grad;
  if (track) {
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backward = std::move(bw);
  }
  return Tensor(std::move(out));
}

void require_rank(std::string_view op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + " expects rank " + std::to_string(rank), t.shape(), {});
  }
}

enum class Bin { add, sub, mul, div };

std::string_view bin_name(Bin k) {
  switch (k) {
    case Bin::add: return "add";
    case Bin::sub: return "sub";
    case Bin::mul: return "mul";
    case Bin::div: return "div";
  }
  return "?";
}

Tensor binary(Bin kind, const Tensor& a, const Tensor& b) {
  const auto& an = a.node_ptr();
  const auto& bn = b.node_ptr();
  checked(an);
  checked(bn);
  const std::size_t na = a.numel(), nb = b.numel();
  const bool same = a.shape() == b.shape();
  if (!same && na != 1 && nb != 1) throw ShapeError(std::string(bin_name(kind)), a.shape(), b.shape());
  const bool a_scalar = !same && na == 1;
  const bool b_scalar = !same && nb == 1 && !a_scalar;
  const Shape out_shape = a_scalar ? b.shape() : a.shape();
  const std::size_t n = a_scalar ? nb : na;
  std::vector<double> out(n);
  const double* x = a.data();
  const double* y = b.data();
  const auto& kt = kernels::active();
  if (same) {
    switch (kind) {
      case Bin::add: kt.add(x, y, out.data(), n); break;
      case Bin::sub: kt.sub(x, y, out.data(), n); break;
      case Bin::mul: kt.mul(x, y, out.data(), n); break;
      case Bin::div:
        for (std::size_t i = 0; i < n; ++i) out[i] = x[i] / y[i];
        break;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double u = a_scalar ? x[0] : x[i];
      const double v = b_scalar ? y[0] : y[i];
      switch (kind) {
        case Bin::add: out[i] = u + v; break;
        case Bin::sub: out[i] = u - v; break;
        case Bin::mul: out[i] = u * v; break;
        case Bin::div: out[i] = u / v; break;
      }
    }
  }
  auto node = make_node(out_shape, std::move(out));
  return finish(node, bin_name(kind), {an, bn}, [kind, a_scalar, b_scalar, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const double* g = self.grad.data();
    auto xa = [&](std::size_t i) { return pa.data[a_scalar ? 0 : i]; };
    auto yb = [&](std::size_t i) { return pb.data[b_scalar ? 0 : i]; };
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        switch (kind) {
          case Bin::add:
          case Bin::sub: d = g[i]; break;
          case Bin::mul: d = g[i] * yb(i); break;
          case Bin::div: d = g[i] / yb(i); break;
        }
        pa.grad[a_scalar ? 0 : i] += d;
      }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        switch (kind) {
          case Bin::add: d = g[i]; break;
          case Bin::sub: d = -g[i]; break;
          case Bin::mul: d = g[i] * xa(i); break;
          case Bin::div: {
            const double v = yb(i);
            d = -g[i] * xa(i) / (v * v);
            break;
          }
        }
        pb.grad[b_scalar ? 0 : i] += d;
      }
    }
  });
}

// Row-parallel C += op(A) B for forward matmuls; rows are independent so the
// split never changes bits.
void gemm_rows(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t a_row,
               std::size_t a_col, const double* b, double* c) {
  const auto& kt = kernels::active();
  const std::size_t work = m * n * k;
  parallel_rows(m, work, [&](std::size_t lo, std::size_t hi) {
    kt.gemm(hi - lo, n, k, a + lo * a_row, a_row, a_col, b, n, c + lo * n, n);
  });
}

}  // namespace

Tensor::Tensor() = default;

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = product(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = product(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (product(shape) != values.size()) {
    throw ShapeError("from", shape, Shape{values.size()});
  }
  return Tensor(make_node(std::move(shape), std::move(values)));
}

Tensor Tensor::scalar(double value) { return Tensor(make_node({}, {value})); }

const Shape& Tensor::shape() const { return checked(node_).shape; }
std::size_t Tensor::numel() const { return checked(node_).data.size(); }
const std::vector<double>& Tensor::values() const { return checked(node_).data; }
const double* Tensor::data() const { return checked(node_).data.data(); }
std::vector<double>& Tensor::mutable_values() { return checked(node_).data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item", shape(), {});
  return node_->data[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  Node& n = checked(node_);
  if (!n.parents.empty()) throw InvalidArgument("requires_grad can only be set on leaf tensors");
  n.requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return checked(node_).grad.size() == node_->data.size(); }

const std::vector<double>& Tensor::grad() const {
  Node& n = checked(node_);
  n.ensure_grad();
  return n.grad;
}

std::vector<double>& Tensor::mutable_grad() {
  Node& n = checked(node_);
  n.ensure_grad();
  return n.grad;
}

void Tensor::zero_grad() {
  Node& n = checked(node_);
  n.grad.assign(n.data.size(), 0.0);
}

Tensor Tensor::detach() const {
  const Node& n = checked(node_);
  return Tensor(make_node(n.shape, n.data));
}

bool Tensor::is_leaf() const { return checked(node_).parents.empty(); }

BackwardStats backward(const Tensor& loss) {
  Node& root = checked(loss.node_ptr());
  if (root.data.size() != 1) throw ShapeError("backward needs a scalar loss", root.shape, {});
  BackwardStats stats;
  if (!root.requires_grad) return stats;

  // Iterative post-order DFS gives a topological order; each node once.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{&root, 0}};
  seen.insert(&root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) {
    if (!n->parents.empty()) n->grad.assign(n->data.size(), 0.0);
  }
  root.ensure_grad();
  root.grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    ++stats.nodes_visited;
    if ((*it)->backward) (*it)->backward(**it);
  }
  return stats;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(Bin::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(Bin::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(Bin::mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(Bin::div, a, b); }
Tensor add(const Tensor& a, double b) { return binary(Bin::add, a, Tensor::scalar(b)); }
Tensor mul(const Tensor& a, double b) { return binary(Bin::mul, a, Tensor::scalar(b)); }

Tensor scale(const Tensor& a, double s) {
  const auto& an = a.node_ptr();
  std::vector<double> out(a.values());
  for (double& v : out) v *= s;
  return finish(make_node(a.shape(), std::move(out)), "scale", {an}, [s](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    kernels::active().axpy(s, self.grad.data(), p.grad.data(), p.grad.size());
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) throw ShapeError("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  gemm_rows(m, n, k, a.data(), k, 1, b.data(), out.data());
  return finish(make_node({m, n}, std::move(out)), "matmul", {a.node_ptr(), b.node_ptr()},
                [m, n, k](Node& self) {
                  Node& pa = *self.parents[0];
                  Node& pb = *self.parents[1];
                  const auto& kt = kernels::active();
                  if (pa.requires_grad) {
                    // dA[m,k] += G[m,n] * B^T, with B^T materialized as [n,k].
                    std::vector<double> bt(n * k);
                    for (std::size_t p = 0; p < k; ++p)
                      for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = pb.data[p * n + j];
                    pa.ensure_grad();
                    gemm_rows(m, k, n, self.grad.data(), n, 1, bt.data(), pa.grad.data());
                  }
                  if (pb.requires_grad) {
                    // dB[k,n] += A^T G: A^T(i,p) = A[p,i].
                    pb.ensure_grad();
                    kt.gemm(k, n, m, pa.data.data(), 1, k, self.grad.data(), n, pb.grad.data(), n);
                  }
                });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  require_rank("add_bias", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (b.rank() != 1 || b.dim(0) != n) throw ShapeError("add_bias", x.shape(), b.shape());
  std::vector<double> out(x.values());
  const auto& kt = kernels::active();
  for (std::size_t i = 0; i < m; ++i) kt.add(out.data() + i * n, b.data(), out.data() + i * n, n);
  return finish(make_node(x.shape(), std::move(out)), "add_bias", {x.node_ptr(), b.node_ptr()},
                [m, n](Node& self) {
                  Node& px = *self.parents[0];
                  Node& pb = *self.parents[1];
                  const auto& kt = kernels::active();
                  if (px.requires_grad) {
                    px.ensure_grad();
                    kt.axpy(1.0, self.grad.data(), px.grad.data(), m * n);
                  }
                  if (pb.requires_grad) {
                    pb.ensure_grad();
                    for (std::size_t i = 0; i < m; ++i)
                      kt.axpy(1.0, self.grad.data() + i * n, pb.grad.data(), n);
                  }
                });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
  const std::size_t m = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::vector<std::shared_ptr<Node>> parents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank("concat_cols", p, 2);
    if (p.dim(0) != m) throw ShapeError("concat_cols", parts[0].shape(), p.shape());
    widths.push_back(p.dim(1));
    total += p.dim(1);
    parents.push_back(p.node_ptr());
  }
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const double* src = parts[q].data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(src + i * widths[q], widths[q], out.data() + i * total + off);
    off += widths[q];
  }
  return finish(make_node({m, total}, std::move(out)), "concat_cols", std::move(parents),
                [m, total, widths](Node& self) {
                  std::size_t off = 0;
                  for (std::size_t q = 0; q < widths.size(); ++q) {
                    Node& p = *self.parents[q];
                    if (p.requires_grad) {
                      p.ensure_grad();
                      for (std::size_t i = 0; i < m; ++i)
                        kernels::active().axpy(1.0, self.grad.data() + i * total + off,
                                               p.grad.data() + i * widths[q], widths[q]);
                    }
                    off += widths[q];
                  }
                });
}

Tensor broadcast_rows(const Tensor& v, std::size_t rows) {
  require_rank("broadcast_rows", v, 1);
  const std::size_t k = v.dim(0);
  std::vector<double> out(rows * k);
  for (std::size_t i = 0; i < rows; ++i) std::copy_n(v.data(), k, out.data() + i * k);
  return finish(make_node({rows, k}, std::move(out)), "broadcast_rows", {v.node_ptr()},
                [rows, k](Node& self) {
                  Node& p = *self.parents[0];
                  p.ensure_grad();
                  for (std::size_t i = 0; i < rows; ++i)
                    kernels::active().axpy(1.0, self.grad.data() + i * k, p.grad.data(), k);
                });
}

Tensor row(const Tensor& x, std::size_t i) {
  require_rank("row", x, 2);
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (i >= m) throw InvalidArgument("row index " + std::to_string(i) + " out of range for " + shape_str(x.shape()));
  std::vector<double> out(x.data() + i * n, x.data() + (i + 1) * n);
  return finish(make_node({n}, std::move(out)), "row", {x.node_ptr()}, [i, n](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    kernels::active().axpy(1.0, self.grad.data(), p.grad.data() + i * n, n);
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (product(shape) != x.numel()) throw ShapeError("reshape", x.shape(), shape);
  return finish(make_node(std::move(shape), x.values()), "reshape", {x.node_ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    kernels::active().axpy(1.0, self.grad.data(), p.grad.data(), p.grad.size());
  });
}

Tensor normalize_rows(const Tensor& x) {
  require_rank("normalize_rows", x, 2);
  const std::size_t m = x.dim(0), k = x.dim(1);
  const auto& kt = kernels::active();
  std::vector<double> norms(m);
  std::vector<double> out(x.values());
  for (std::size_t i = 0; i < m; ++i) {
    norms[i] = std::sqrt(kt.sum_sq(x.data() + i * k, k));
    if (norms[i] == 0.0) throw DegenerateError("normalize_rows: row " + std::to_string(i) + " has zero norm");
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= norms[i];
  }
  return finish(make_node(x.shape(), std::move(out)), "normalize_rows", {x.node_ptr()},
                [m, k, norms](Node& self) {
                  Node& p = *self.parents[0];
                  p.ensure_grad();
                  const auto& kt = kernels::active();
                  // d(x/|x|) = (g - y (y.g)) / |x|
                  for (std::size_t i = 0; i < m; ++i) {
                    const double* y = self.data.data() + i * k;
                    const double* g = self.grad.data() + i * k;
                    const double yg = kt.dot(y, g, k);
                    for (std::size_t j = 0; j < k; ++j) p.grad[i * k + j] += (g[j] - y[j] * yg) / norms[i];
                  }
                });
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

namespace {
double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Activation parse_activation(std::string_view kind) {
  if (kind == "softplus") return Activation::softplus;
  if (kind == "tanh") return Activation::tanh;
  throw InvalidArgument("unknown nonlinearity '" + std::string(kind) + "' (expected softplus or tanh)");
}

Tensor nonlinearity(Activation kind, const Tensor& x) {
  std::vector<double> out(x.numel());
  const double* v = x.data();
  if (kind == Activation::softplus) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus(v[i]);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(v[i]);
  }
  const std::string_view name = kind == Activation::softplus ? "softplus" : "tanh";
  return finish(make_node(x.shape(), std::move(out)), name, {x.node_ptr()}, [kind](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    const std::size_t n = self.data.size();
    if (kind == Activation::softplus) {
      for (std::size_t i = 0; i < n; ++i) p.grad[i] += self.grad[i] * sigmoid(p.data[i]);
    } else {
      for (std::size_t i = 0; i < n; ++i) p.grad[i] += self.grad[i] * (1.0 - self.data[i] * self.data[i]);
    }
  });
}

Tensor nonlinearity(std::string_view kind, const Tensor& x) { return nonlinearity(parse_activation(kind), x); }

Tensor softplus(const Tensor& x) { return nonlinearity(Activation::softplus, x); }

Tensor sum(const Tensor& x) {
  const double s = kernels::active().sum(x.data(), x.numel());
  return finish(make_node({}, {s}), "sum", {x.node_ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    for (double& g : p.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const std::size_t n = x.numel();
  if (n == 0) throw InvalidArgument("mean of an empty tensor");
  const double s = kernels::active().sum(x.data(), n) / static_cast<double>(n);
  return finish(make_node({}, {s}), "mean", {x.node_ptr()}, [n](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    const double g = self.grad[0] / static_cast<double>(n);
    for (double& v : p.grad) v += g;
  });
}

Tensor sq_l2_norm(const Tensor& x) {
  const double s = kernels::active().sum_sq(x.data(), x.numel());
  return finish(make_node({}, {s}), "sq_l2_norm", {x.node_ptr()}, [](Node& self) {
    Node& p = *self.parents[0];
    p.ensure_grad();
    kernels::active().axpy(2.0 * self.grad[0], p.data.data(), p.grad.data(), p.grad.size());
  });
}

Tensor cosine_similarity(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || a.shape() != b.shape()) throw ShapeError("cosine_similarity", a.shape(), b.shape());
  const auto& kt = kernels::active();
  const std::size_t k = a.numel();
  const double na = std::sqrt(kt.sum_sq(a.data(), k));
  const double nb = std::sqrt(kt.sum_sq(b.data(), k));
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateError("cosine_similarity: zero-norm " + std::string(na == 0.0 ? "first" : "second") +
                          " argument (degenerate direction)");
  }
  const double ab = kt.dot(a.data(), b.data(), k);
  const double c = ab / (na * nb);
  return finish(make_node({}, {c}), "cosine_similarity", {a.node_ptr(), b.node_ptr()},
                [na, nb, c, k](Node& self) {
                  const double g = self.grad[0];
                  // dc/da = b/(|a||b|) - c a/|a|^2
                  for (int side = 0; side < 2; ++side) {
                    Node& p = *self.parents[side];
                    const Node& q = *self.parents[1 - side];
                    if (!p.requires_grad) continue;
                    p.ensure_grad();
                    const double np = side == 0 ? na : nb;
                    for (std::size_t i = 0; i < k; ++i)
                      p.grad[i] += g * (q.data[i] / (na * nb) - c * p.data[i] / (np * np));
                  }
                });
}

}  // namespace dirforge
