#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace dirforge {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  ShapeError(std::string op, Shape lhs, Shape rhs);
  const std::string& op() const { return op_; }
  const Shape& lhs() const { return lhs_; }
  const Shape& rhs() const { return rhs_; }

 private:
  std::string op_;
  Shape lhs_, rhs_;
};

// Zero-norm vector where a direction is required (cosine, normalization).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Loss or parameter went non-finite during an optimization loop.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace dirforge
