#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cgan/ndcore.hpp"
#include "cgan/random.hpp"

namespace cgan {

/// Fully connected network shape. Hidden layers use tanh, the output is linear.
struct MlpConfig {
  /// Input width, hidden widths..., output width.
  std::vector<std::size_t> widths;
  std::uint64_t seed = 0;
  /// Start the output layer at zero so the network is the zero map.
  bool zero_final_layer = false;

  void validate() const;
};

/// Weights ~ N(0, 2 / (fan_in + fan_out)), biases zero.
/// Layout: W0 (in x out), b0 (1 x out), W1, b1, ...
std::vector<Tensor> init_params(const MlpConfig& config, std::uint64_t seed);

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(const MlpConfig& config);
  Mlp(std::vector<std::size_t> widths, std::vector<Tensor> params);

  [[nodiscard]] const std::vector<std::size_t>& widths() const { return widths_; }
  [[nodiscard]] std::size_t input_dim() const { return widths_.front(); }
  [[nodiscard]] std::size_t output_dim() const { return widths_.back(); }
  [[nodiscard]] std::size_t layer_count() const { return widths_.size() - 1; }

  [[nodiscard]] const std::vector<Tensor>& params() const { return params_; }
  std::vector<Tensor>& params() { return params_; }

  /// Registers every parameter on the tape, in layout order. Frozen
  /// parameters are recorded as constants and receive no gradient.
  std::vector<Var> bind(Tape& tape, bool trainable = true) const;
  Var forward(Tape& tape, Var x, std::span<const Var> params) const;
  /// Tape-free forward pass.
  [[nodiscard]] Tensor evaluate(const Tensor& x) const;

 private:
  std::vector<std::size_t> widths_;
  std::vector<Tensor> params_;
};

/// G_theta: maps isotropic Gaussian noise rows to synthetic feature rows.
class Generator {
 public:
  Generator() = default;
  explicit Generator(const MlpConfig& config) : net_(config) {}
  explicit Generator(Mlp net) : net_(std::move(net)) {}

  [[nodiscard]] std::size_t noise_dim() const { return net_.input_dim(); }
  [[nodiscard]] std::size_t output_dim() const { return net_.output_dim(); }
  [[nodiscard]] const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }

  Var forward(Tape& tape, Var z, std::span<const Var> params) const;
  [[nodiscard]] Tensor forward(const Tensor& z) const;
  /// Draws `count` noise rows from the prior and maps them.
  [[nodiscard]] Tensor sample(std::size_t count, Rng& rng) const;

 private:
  void check_noise(const Shape& z) const;
  Mlp net_;
};

/// V_omega for one arm, fed the input minus a re-centering shift vector.
class Discriminator {
 public:
  Discriminator() = default;
  explicit Discriminator(const MlpConfig& config);
  Discriminator(Mlp net, std::vector<double> shift);

  [[nodiscard]] std::size_t input_dim() const { return net_.input_dim(); }
  [[nodiscard]] const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }
  [[nodiscard]] const std::vector<double>& shift() const { return shift_; }

  void set_recenter_shift(std::span<const double> generator_batch_mean);

  /// Unbounded critic output v, one row per input row.
  Var raw(Tape& tape, Var x, std::span<const Var> params) const;
  [[nodiscard]] Tensor raw(const Tensor& x) const;

 private:
  void check_input(const Shape& x) const;
  Mlp net_;
  std::vector<double> shift_;
};

/// t = -2 + softplus(v); always > -2.
double gf_transform(double v);
Var gf_transform(Tape& tape, Var v);

/// Per-feature mean and standard deviation of the pooled data.
struct StandardizationStats {
  static constexpr double kStdFloor = 1e-8;

  std::vector<double> mean;
  std::vector<double> stddev;

  [[nodiscard]] std::size_t dim() const { return mean.size(); }
  [[nodiscard]] Tensor apply(const Tensor& x) const;
};

}  // namespace cgan
