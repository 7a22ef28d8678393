#pragma once

// Dense row-major matrices and a tape for reverse-mode differentiation.
//
// Every tensor is rank 2 (rows x cols); a scalar is 1x1 and a vector is 1xN.
// The operation set is closed: it covers exactly what MLP forward passes and
// the adversarial chi-squared objective need.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgan/error.hpp"

namespace cgan {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  [[nodiscard]] std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
      : Tensor(Shape{rows, cols}, std::move(values)) {}

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor filled(std::size_t rows, std::size_t cols, double value);
  static Tensor scalar(double value) { return Tensor(1, 1, {value}); }
  static Tensor row(std::span<const double> values);
  static Tensor identity(std::size_t n);

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t rows() const { return shape_.rows; }
  [[nodiscard]] std::size_t cols() const { return shape_.cols; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }

  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }

  [[nodiscard]] double operator()(std::size_t r, std::size_t c) const { return values_[r * shape_.cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * shape_.cols + c]; }

  [[nodiscard]] std::span<const double> row_span(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * shape_.cols, shape_.cols);
  }

  /// Value of a 1x1 tensor.
  [[nodiscard]] double item() const;

  [[nodiscard]] bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_{};
  std::vector<double> values_;
};

enum class Op : std::uint8_t {
  kLeaf,
  kMatMul,
  kAddBias,
  kTanh,
  kSoftplus,
  kSquare,
  kScale,
  kMean,
  kSum,
  kAdd,
  kMul,
};

std::string_view op_name(Op op);

/// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Overflow-stable log(1 + exp(v)).
double softplus(double v);
double sigmoid(double v);

class Gradients;

/// Records primitive operations in topological order.
///
/// A tape is confined to a single thread. Node values are computed eagerly
/// when the operation is recorded.
class Tape {
 public:
  Var constant(Tensor value);
  Var parameter(Tensor value);

  Var matmul(Var a, Var b);
  /// x (n x m) plus a 1 x m row broadcast over the batch dimension.
  Var add_bias(Var x, Var bias);
  Var tanh(Var x);
  Var softplus(Var x);
  Var square(Var x);
  Var scale(Var x, double factor);
  Var mean(Var x);
  Var sum(Var x);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);

  [[nodiscard]] const Tensor& value(Var v) const;
  [[nodiscard]] bool is_parameter(Var v) const;
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  /// d(output)/d(leaf) for every parameter leaf reachable from `output`.
  [[nodiscard]] Gradients backward(Var output) const;

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::size_t lhs = 0;
    std::size_t rhs = 0;
    double factor = 0.0;
    bool parameter = false;
    bool needs_grad = false;
    Tensor value;
  };

  Var push(Op op, std::size_t lhs, std::size_t rhs, double factor, Tensor value);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

class Gradients {
 public:
  /// Gradient for a parameter leaf. Throws if `param` is not a parameter.
  [[nodiscard]] const Tensor& of(Var param) const;
  [[nodiscard]] bool has(Var param) const;

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
};

/// A scalar-valued program over a list of parameter tensors.
using TapeProgram = std::function<Var(Tape&, std::span<const Var>)>;

/// Max over all parameter entries of |analytic - central difference| / max(1, |analytic|).
///
/// `analytic` holds one gradient per parameter, in order.
double compare_to_finite_differences(const TapeProgram& program, std::span<const Tensor> params,
                                     std::span<const Tensor> analytic, double h);

/// Gradients of `program` with respect to `params`, computed by `Tape::backward`.
std::vector<Tensor> analytic_gradients(const TapeProgram& program, std::span<const Tensor> params);

/// Checks `Tape::backward` against central finite differences with step `h`.
double grad_check(const TapeProgram& program, std::span<const Tensor> params, double h = 1e-5);

}  // namespace cgan
