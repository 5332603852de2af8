#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "dirforge/errors.hpp"

namespace dirforge {

struct Node;

// Handle to a float64 array that may sit on an autodiff graph. Copies share
// the underlying node. Ops record a backward closure only when some input
// requires a gradient, so inference builds no graph.
class Tensor {
 public:
  Tensor();
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  const Shape& shape() const;
  std::size_t numel() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const { return shape().at(i); }

  const std::vector<double>& values() const;
  const double* data() const;
  // In-place mutation is reserved for leaves (parameters, optimizer updates).
  std::vector<double>& mutable_values();
  double item() const;
  double at(std::size_t i) const { return values()[i]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool has_grad() const;
  const std::vector<double>& grad() const;
  std::vector<double>& mutable_grad();
  void zero_grad();

  // Same values, cut from the graph.
  Tensor detach() const;
  bool is_leaf() const;
  bool defined() const { return node_ != nullptr; }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string_view op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents that require grad.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

struct BackwardStats {
  std::size_t nodes_visited = 0;
};

// Accumulates d(loss)/d(leaf) into every reachable leaf with requires_grad.
// The graph is kept; interior gradients are cleared at the start of each
// call, leaf gradients keep accumulating until zero_grad().
BackwardStats backward(const Tensor& loss);

// Elementwise. Shapes must match exactly, or one side must hold a single
// element, which is broadcast. Anything else throws ShapeError.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor scale(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
// x[m,n] + b[n] on every row.
Tensor add_bias(const Tensor& x, const Tensor& b);
// Concatenate rank-2 tensors with equal row counts along columns.
Tensor concat_cols(const std::vector<Tensor>& parts);
// v[k] repeated into [rows, k].
Tensor broadcast_rows(const Tensor& v, std::size_t rows);
Tensor row(const Tensor& x, std::size_t i);
Tensor reshape(const Tensor& x, Shape shape);
// Each row of x[m,k] divided by its L2 norm.
Tensor normalize_rows(const Tensor& x);

enum class Activation { softplus, tanh };
Activation parse_activation(std::string_view kind);
Tensor nonlinearity(Activation kind, const Tensor& x);
Tensor nonlinearity(std::string_view kind, const Tensor& x);
Tensor softplus(const Tensor& x);
double softplus(double x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sq_l2_norm(const Tensor& x);
Tensor cosine_similarity(const Tensor& a, const Tensor& b);

}  // namespace dirforge
