#include "cgan/ndcore.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cgan {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Tensor& t) { return ConstMap(t.values().data(), t.rows(), t.cols()); }
MutMap view(Tensor& t) { return MutMap(t.values().data(), t.rows(), t.cols()); }

[[noreturn]] void shape_error(Op op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

void accumulate(std::optional<Tensor>& slot, const Tensor& g) {
  if (!slot) {
    slot = g;
    return;
  }
  auto dst = slot->values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << "[" << s.rows << "x" << s.cols << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), values_(std::move(values)) {
  if (shape_.size() != values_.size()) {
    throw ShapeError("tensor shape " + to_string(shape_) + " does not match buffer length " +
                     std::to_string(values_.size()));
  }
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) { return filled(rows, cols, 0.0); }

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double value) {
  return Tensor(rows, cols, std::vector<double>(rows * cols, value));
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = zeros(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar tensor " + to_string(shape_));
  return values_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatMul: return "matmul";
    case Op::kAddBias: return "add_bias";
    case Op::kTanh: return "tanh";
    case Op::kSoftplus: return "softplus";
    case Op::kSquare: return "square";
    case Op::kScale: return "scale";
    case Op::kMean: return "mean";
    case Op::kSum: return "sum";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
  }
  return "unknown";
}

double softplus(double v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0); }

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Tape

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw Error("invalid tape node id " + std::to_string(v.id));
  return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

bool Tape::is_parameter(Var v) const { return node(v).parameter; }

Var Tape::push(Op op, std::size_t lhs, std::size_t rhs, double factor, Tensor value) {
  if (!value.all_finite()) {
    throw NumericalError(std::string(op_name(op)) + " (node " + std::to_string(nodes_.size()) +
                         ") produced a non-finite value");
  }
  Node n;
  n.op = op;
  n.lhs = lhs;
  n.rhs = rhs;
  n.factor = factor;
  n.value = std::move(value);
  if (op != Op::kLeaf) {
    n.needs_grad = nodes_[lhs].needs_grad;
    if (op == Op::kMatMul || op == Op::kAddBias || op == Op::kAdd || op == Op::kMul) {
      n.needs_grad = n.needs_grad || nodes_[rhs].needs_grad;
    }
  }
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Tensor value) { return push(Op::kLeaf, 0, 0, 0.0, std::move(value)); }

Var Tape::parameter(Tensor value) {
  Var v = push(Op::kLeaf, 0, 0, 0.0, std::move(value));
  nodes_[v.id].parameter = true;
  nodes_[v.id].needs_grad = true;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.cols() != y.rows()) shape_error(Op::kMatMul, x.shape(), y.shape());
  Tensor out = Tensor::zeros(x.rows(), y.cols());
  view(out).noalias() = view(x) * view(y);
  return push(Op::kMatMul, a.id, b.id, 0.0, std::move(out));
}

Var Tape::add_bias(Var x, Var bias) {
  const Tensor& in = value(x);
  const Tensor& b = value(bias);
  if (b.rows() != 1 || b.cols() != in.cols()) shape_error(Op::kAddBias, in.shape(), b.shape());
  Tensor out = in;
  view(out).rowwise() += view(b).row(0);
  return push(Op::kAddBias, x.id, bias.id, 0.0, std::move(out));
}

Var Tape::tanh(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) v = std::tanh(v);
  return push(Op::kTanh, x.id, 0, 0.0, std::move(out));
}

Var Tape::softplus(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) v = cgan::softplus(v);
  return push(Op::kSoftplus, x.id, 0, 0.0, std::move(out));
}

Var Tape::square(Var x) {
  Tensor out = value(x);
  for (double& v : out.values()) v *= v;
  return push(Op::kSquare, x.id, 0, 0.0, std::move(out));
}

Var Tape::scale(Var x, double factor) {
  Tensor out = value(x);
  for (double& v : out.values()) v *= factor;
  return push(Op::kScale, x.id, 0, factor, std::move(out));
}

Var Tape::mean(Var x) {
  const Tensor& in = value(x);
  if (in.size() == 0) shape_error(Op::kMean, in.shape(), in.shape());
  return push(Op::kMean, x.id, 0, 0.0, Tensor::scalar(view(in).mean()));
}

Var Tape::sum(Var x) { return push(Op::kSum, x.id, 0, 0.0, Tensor::scalar(view(value(x)).sum())); }

Var Tape::add(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.shape() != y.shape()) shape_error(Op::kAdd, x.shape(), y.shape());
  Tensor out = x;
  view(out) += view(y);
  return push(Op::kAdd, a.id, b.id, 0.0, std::move(out));
}

Var Tape::mul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.shape() != y.shape()) shape_error(Op::kMul, x.shape(), y.shape());
  Tensor out = x;
  view(out).array() *= view(y).array();
  return push(Op::kMul, a.id, b.id, 0.0, std::move(out));
}

Gradients Tape::backward(Var output) const {
  const Tensor& out = value(output);
  if (out.size() != 1) throw ShapeError("backward: output must be scalar, got " + to_string(out.shape()));

  Gradients result;
  auto& grads = result.grads_;
  grads.resize(nodes_.size());
  grads[output.id] = Tensor::scalar(1.0);

  for (std::size_t i = output.id + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!grads[i] || n.op == Op::kLeaf) continue;
    const Tensor& g = *grads[i];
    const Node& a = nodes_[n.lhs];

    switch (n.op) {
      case Op::kMatMul: {
        const Node& b = nodes_[n.rhs];
        if (a.needs_grad) {
          Tensor ga = Tensor::zeros(a.value.rows(), a.value.cols());
          view(ga).noalias() = view(g) * view(b.value).transpose();
          accumulate(grads[n.lhs], ga);
        }
        if (b.needs_grad) {
          Tensor gb = Tensor::zeros(b.value.rows(), b.value.cols());
          view(gb).noalias() = view(a.value).transpose() * view(g);
          accumulate(grads[n.rhs], gb);
        }
        break;
      }
      case Op::kAddBias: {
        if (a.needs_grad) accumulate(grads[n.lhs], g);
        if (nodes_[n.rhs].needs_grad) {
          Tensor gb = Tensor::zeros(1, g.cols());
          view(gb) = view(g).colwise().sum();
          accumulate(grads[n.rhs], gb);
        }
        break;
      }
      case Op::kTanh: {
        if (!a.needs_grad) break;
        Tensor ga = g;
        auto y = n.value.values();
        auto d = ga.values();
        for (std::size_t k = 0; k < d.size(); ++k) d[k] *= 1.0 - y[k] * y[k];
        accumulate(grads[n.lhs], ga);
        break;
      }
      case Op::kSoftplus: {
        if (!a.needs_grad) break;
        Tensor ga = g;
        auto x = a.value.values();
        auto d = ga.values();
        for (std::size_t k = 0; k < d.size(); ++k) d[k] *= sigmoid(x[k]);
        accumulate(grads[n.lhs], ga);
        break;
      }
      case Op::kSquare: {
        if (!a.needs_grad) break;
        Tensor ga = g;
        auto x = a.value.values();
        auto d = ga.values();
        for (std::size_t k = 0; k < d.size(); ++k) d[k] *= 2.0 * x[k];
        accumulate(grads[n.lhs], ga);
        break;
      }
      case Op::kScale: {
        if (!a.needs_grad) break;
        Tensor ga = g;
        for (double& v : ga.values()) v *= n.factor;
        accumulate(grads[n.lhs], ga);
        break;
      }
      case Op::kMean:
      case Op::kSum: {
        if (!a.needs_grad) break;
        double s = g.item();
        if (n.op == Op::kMean) s /= static_cast<double>(a.value.size());
        accumulate(grads[n.lhs], Tensor::filled(a.value.rows(), a.value.cols(), s));
        break;
      }
      case Op::kAdd: {
        if (a.needs_grad) accumulate(grads[n.lhs], g);
        if (nodes_[n.rhs].needs_grad) accumulate(grads[n.rhs], g);
        break;
      }
      case Op::kMul: {
        const Node& b = nodes_[n.rhs];
        if (a.needs_grad) {
          Tensor ga = g;
          view(ga).array() *= view(b.value).array();
          accumulate(grads[n.lhs], ga);
        }
        if (b.needs_grad) {
          Tensor gb = g;
          view(gb).array() *= view(a.value).array();
          accumulate(grads[n.rhs], gb);
        }
        break;
      }
      case Op::kLeaf: break;
    }
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].parameter) grads[i].reset();
  }
  return result;
}

const Tensor& Gradients::of(Var param) const {
  if (param.id >= grads_.size()) throw Error("gradient requested for unknown node " + std::to_string(param.id));
  if (!grads_[param.id]) {
    throw Error("node " + std::to_string(param.id) + " is not a parameter reachable from the output");
  }
  return *grads_[param.id];
}

bool Gradients::has(Var param) const { return param.id < grads_.size() && grads_[param.id].has_value(); }

// ---------------------------------------------------------------------------
// Finite-difference checking

namespace {

double evaluate(const TapeProgram& program, std::span<const Tensor> params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.parameter(p));
  const double value = tape.value(program(tape, vars)).item();
  if (!std::isfinite(value)) throw NumericalError("grad_check: non-finite loss at perturbed point");
  return value;
}

}  // namespace

std::vector<Tensor> analytic_gradients(const TapeProgram& program, std::span<const Tensor> params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.parameter(p));
  const Gradients grads = tape.backward(program(tape, vars));
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back(grads.has(vars[i]) ? grads.of(vars[i]) : Tensor::zeros(params[i].rows(), params[i].cols()));
  }
  return out;
}

double compare_to_finite_differences(const TapeProgram& program, std::span<const Tensor> params,
                                     std::span<const Tensor> analytic, double h) {
  if (!(h > 0.0)) throw Error("grad_check: step must be positive");
  if (analytic.size() != params.size()) throw ShapeError("grad_check: gradient count does not match parameters");

  std::vector<Tensor> probe(params.begin(), params.end());
  for (const Tensor& p : probe) {
    if (!p.all_finite()) throw NumericalError("grad_check: non-finite parameter");
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    if (analytic[i].shape() != probe[i].shape()) shape_error(Op::kLeaf, analytic[i].shape(), probe[i].shape());
    for (std::size_t k = 0; k < probe[i].size(); ++k) {
      const double original = probe[i].values()[k];
      probe[i].values()[k] = original + h;
      const double up = evaluate(program, probe);
      probe[i].values()[k] = original - h;
      const double down = evaluate(program, probe);
      probe[i].values()[k] = original;

      const double numeric = (up - down) / (2.0 * h);
      const double exact = analytic[i].values()[k];
      worst = std::max(worst, std::abs(exact - numeric) / std::max(1.0, std::abs(exact)));
    }
  }
  return worst;
}

double grad_check(const TapeProgram& program, std::span<const Tensor> params, double h) {
  const std::vector<Tensor> analytic = analytic_gradients(program, params);
  return compare_to_finite_differences(program, params, analytic, h);
}

}  // namespace cgan
