#include "cgan/nets.hpp"

#include <Eigen/Core>

#include <cmath>

namespace cgan {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Tensor& t) { return ConstMap(t.values().data(), t.rows(), t.cols()); }
MutMap view(Tensor& t) { return MutMap(t.values().data(), t.rows(), t.cols()); }

Tensor negated_row(std::span<const double> v) {
  Tensor t = Tensor::row(v);
  for (double& x : t.values()) x = -x;
  return t;
}

}  // namespace

void MlpConfig::validate() const {
  if (widths.size() < 3) throw Error("MlpConfig: need input, at least one hidden layer, and output widths");
  for (std::size_t w : widths) {
    if (w == 0) throw Error("MlpConfig: layer widths must be positive");
  }
}

std::vector<Tensor> init_params(const MlpConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::vector<Tensor> params;
  const std::size_t layers = config.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_in = config.widths[l];
    const std::size_t fan_out = config.widths[l + 1];
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = normal_matrix(rng, fan_in, fan_out, scale);
    if (config.zero_final_layer && l + 1 == layers) w = Tensor::zeros(fan_in, fan_out);
    params.push_back(std::move(w));
    params.push_back(Tensor::zeros(1, fan_out));
  }
  return params;
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(const MlpConfig& config) : widths_(config.widths), params_(init_params(config, config.seed)) {}

Mlp::Mlp(std::vector<std::size_t> widths, std::vector<Tensor> params)
    : widths_(std::move(widths)), params_(std::move(params)) {
  MlpConfig{widths_}.validate();
  if (params_.size() != 2 * layer_count()) throw ShapeError("Mlp: wrong parameter count");
  for (std::size_t l = 0; l < layer_count(); ++l) {
    if (params_[2 * l].shape() != Shape{widths_[l], widths_[l + 1]} ||
        params_[2 * l + 1].shape() != Shape{1, widths_[l + 1]}) {
      throw ShapeError("Mlp: parameter shapes do not match layer widths at layer " + std::to_string(l));
    }
  }
}

std::vector<Var> Mlp::bind(Tape& tape, bool trainable) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (const Tensor& p : params_) vars.push_back(trainable ? tape.parameter(p) : tape.constant(p));
  return vars;
}

Var Mlp::forward(Tape& tape, Var x, std::span<const Var> params) const {
  if (params.size() != params_.size()) throw ShapeError("Mlp::forward: wrong parameter count");
  Var h = x;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    h = tape.add_bias(tape.matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < layer_count()) h = tape.tanh(h);
  }
  return h;
}

Tensor Mlp::evaluate(const Tensor& x) const {
  if (x.cols() != input_dim()) {
    throw ShapeError("Mlp::evaluate: expected " + std::to_string(input_dim()) + " columns, got " +
                     to_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const Tensor& w = params_[2 * l];
    Tensor next = Tensor::zeros(h.rows(), w.cols());
    view(next).noalias() = view(h) * view(w);
    view(next).rowwise() += view(params_[2 * l + 1]).row(0);
    if (l + 1 < layer_count()) {
      for (double& v : next.values()) v = std::tanh(v);
    }
    h = std::move(next);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Generator

void Generator::check_noise(const Shape& z) const {
  if (z.cols != noise_dim()) {
    throw ShapeError("generator: noise has " + std::to_string(z.cols) + " columns, expected " +
                     std::to_string(noise_dim()));
  }
}

Var Generator::forward(Tape& tape, Var z, std::span<const Var> params) const {
  check_noise(tape.value(z).shape());
  return net_.forward(tape, z, params);
}

Tensor Generator::forward(const Tensor& z) const {
  check_noise(z.shape());
  return net_.evaluate(z);
}

Tensor Generator::sample(std::size_t count, Rng& rng) const { return forward(normal_matrix(rng, count, noise_dim())); }

// ---------------------------------------------------------------------------
// Discriminator

Discriminator::Discriminator(const MlpConfig& config) : net_(config), shift_(config.widths.front(), 0.0) {
  if (net_.output_dim() != 1) throw Error("discriminator must have a single output");
}

Discriminator::Discriminator(Mlp net, std::vector<double> shift) : net_(std::move(net)), shift_(std::move(shift)) {
  if (net_.output_dim() != 1) throw Error("discriminator must have a single output");
  if (shift_.size() != net_.input_dim()) throw ShapeError("discriminator: shift length does not match input width");
}

void Discriminator::set_recenter_shift(std::span<const double> generator_batch_mean) {
  if (generator_batch_mean.size() != input_dim()) {
    throw ShapeError("set_recenter_shift: got " + std::to_string(generator_batch_mean.size()) +
                     " values, expected " + std::to_string(input_dim()));
  }
  shift_.assign(generator_batch_mean.begin(), generator_batch_mean.end());
}

void Discriminator::check_input(const Shape& x) const {
  if (x.cols != input_dim()) {
    throw ShapeError("discriminator: input has " + std::to_string(x.cols) + " columns, expected " +
                     std::to_string(input_dim()));
  }
}

Var Discriminator::raw(Tape& tape, Var x, std::span<const Var> params) const {
  check_input(tape.value(x).shape());
  Var centered = tape.add_bias(x, tape.constant(negated_row(shift_)));
  return net_.forward(tape, centered, params);
}

Tensor Discriminator::raw(const Tensor& x) const {
  check_input(x.shape());
  Tensor centered = x;
  const Tensor neg = negated_row(shift_);
  view(centered).rowwise() += view(neg).row(0);
  return net_.evaluate(centered);
}

// ---------------------------------------------------------------------------

double gf_transform(double v) { return -2.0 + softplus(v); }

Var gf_transform(Tape& tape, Var v) {
  const Tensor& in = tape.value(v);
  return tape.add_bias(tape.softplus(v), tape.constant(Tensor::filled(1, in.cols(), -2.0)));
}

Tensor StandardizationStats::apply(const Tensor& x) const {
  if (x.cols() != dim()) {
    throw ShapeError("standardization: data has " + std::to_string(x.cols()) + " columns, stats cover " +
                     std::to_string(dim()));
  }
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - mean[c]) / stddev[c];
  }
  return out;
}

}  // namespace cgan
