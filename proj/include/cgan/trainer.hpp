#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cgan/cohort.hpp"
#include "cgan/nets.hpp"

namespace cgan {

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t max_iterations = 20000;
  std::size_t disc_steps = 1;
  double lr_generator = 1e-4;
  double lr_discriminator = 2e-4;
  /// Learning rates are multiplied by this every `decay_period` iterations.
  double lr_decay = 0.95;
  std::size_t decay_period = 1000;
  std::size_t recenter_period = 500;
  std::size_t convergence_window = 500;
  double convergence_tol = 1e-4;
  std::uint64_t seed = 0;

  std::size_t noise_dim = 16;
  std::vector<std::size_t> hidden = {64, 64};
  double beta1 = 0.5;
  double beta2 = 0.999;

  void validate() const;
};

/// Adam with a signed step: +1 ascends, -1 descends.
class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<Tensor>& params, double beta1, double beta2, double eps = 1e-8);

  void step(std::vector<Tensor>& params, std::span<const Tensor> grads, double lr, double direction);
  [[nodiscard]] std::size_t steps() const { return t_; }

 private:
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::size_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

struct TraceRow {
  std::size_t iteration = 0;
  std::vector<double> arm_objective;
  double total = 0.0;
  double lr_generator = 0.0;
  double lr_discriminator = 0.0;
};

struct TrainedModel {
  Generator generator;
  std::vector<Discriminator> discriminators;
  StandardizationStats stats;
  std::vector<std::string> feature_names;
  std::vector<TraceRow> trace;

  [[nodiscard]] std::size_t arm_count() const { return discriminators.size(); }
  [[nodiscard]] std::size_t dim() const { return stats.dim(); }
};

struct StandardizedArms {
  std::vector<Tensor> data;
  StandardizationStats stats;
};

/// Joint standardization: mean and (population) std over all arms pooled.
StandardizedArms standardize(std::span<const StudyArm> arms);

/// mean g_f(V(x_g)) + mean[-g_f(V(x_a))^2 / 4 - g_f(V(x_a))]; ascended by the arm's critic.
Var discriminator_loss(Tape& tape, const Discriminator& disc, std::span<const Var> params, Var gen_batch,
                       Var data_batch);
double discriminator_loss(const Discriminator& disc, const Tensor& gen_batch, const Tensor& data_batch);

/// sum over arms of mean g_f(V_a(G(z))); descended by the generator.
Var generator_loss(Tape& tape, const Generator& gen, std::span<const Var> gen_params, Var z,
                   std::span<const Discriminator> discs);
double generator_loss(const Generator& gen, std::span<const Discriminator> discs, const Tensor& z);

/// Monte Carlo estimate of the variational bound E_p[T] - E_q[T^2/4 + T].
struct BoundEstimate {
  double value = 0.0;
  double std_error = 0.0;
};
BoundEstimate variational_bound(const Discriminator& disc, const Tensor& p_samples, const Tensor& q_samples);

/// Alternating critic ascent / generator descent on the summed chi-squared objective.
class Trainer {
 public:
  Trainer(std::span<const StudyArm> arms, TrainConfig config);

  /// `disc_steps` ascent steps on the arm's critic; returns the last batch objective.
  double discriminator_step(std::size_t arm);
  /// One descent step on the generator; returns the batch loss before the step.
  double generator_step();
  /// Sets every critic's shift to the mean of one fresh generator batch.
  void recenter();
  /// One full outer iteration. Returns true once the convergence test fires.
  bool iterate();
  /// Iterates until convergence or `max_iterations`.
  void run();

  [[nodiscard]] const TrainedModel& model() const { return model_; }
  TrainedModel& model() { return model_; }
  [[nodiscard]] std::size_t iteration() const { return iteration_; }
  [[nodiscard]] const std::vector<Tensor>& standardized_data() const { return data_; }
  [[nodiscard]] const TrainConfig& config() const { return config_; }

 private:
  struct ArmStream {
    Rng rng;
    std::vector<std::size_t> order;
    std::size_t cursor = 0;
  };

  Tensor next_minibatch(std::size_t arm);
  [[nodiscard]] double lr_scale() const;
  bool converged() const;

  TrainConfig config_;
  std::vector<Tensor> data_;
  TrainedModel model_;
  std::vector<ArmStream> streams_;
  Rng gen_rng_;
  Adam gen_opt_;
  std::vector<Adam> disc_opts_;
  std::vector<double> last_arm_objective_;
  std::size_t iteration_ = 0;
};

TrainedModel train(std::span<const StudyArm> arms, const TrainConfig& config);

struct ObjectiveEstimate {
  std::vector<BoundEstimate> per_arm;
  double total = 0.0;
};

/// Per-arm variational bound using `n_mc` fresh generator samples and every row of each arm.
ObjectiveEstimate objective_estimate(const TrainedModel& model, std::span<const StudyArm> arms, std::size_t n_mc,
                                     std::uint64_t seed);

/// Ascent-only fit of one critic against a fixed sampler of P.
struct CriticFitConfig {
  std::size_t batch_size = 256;
  std::size_t iterations = 5000;
  double lr = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
};
using Sampler = std::function<Tensor(std::size_t count, Rng& rng)>;
std::vector<double> fit_critic(Discriminator& disc, const Sampler& p_sampler, const Tensor& q_data,
                               const CriticFitConfig& config);

}  // namespace cgan
