#include "cgan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

namespace cgan {

void TrainConfig::validate() const {
  if (batch_size < 2) throw Error("TrainConfig: batch size must be at least 2");
  if (max_iterations == 0 || disc_steps == 0 || decay_period == 0 || recenter_period == 0 ||
      convergence_window == 0 || noise_dim == 0) {
    throw Error("TrainConfig: iteration counts, periods and noise dim must be positive");
  }
  if (!(lr_generator > 0.0) || !(lr_discriminator > 0.0)) throw Error("TrainConfig: learning rates must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw Error("TrainConfig: lr decay must lie in (0, 1]");
  if (!(convergence_tol > 0.0)) throw Error("TrainConfig: convergence tolerance must be positive");
  if (hidden.empty()) throw Error("TrainConfig: need at least one hidden layer");
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(const std::vector<Tensor>& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Tensor& p : params) {
    m_.push_back(Tensor::zeros(p.rows(), p.cols()));
    v_.push_back(Tensor::zeros(p.rows(), p.cols()));
  }
}

void Adam::step(std::vector<Tensor>& params, std::span<const Tensor> grads, double lr, double direction) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("Adam: parameter count changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].values();
    auto g = grads[i].values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k];
      p[k] += direction * lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------
// Standardization

StandardizedArms standardize(std::span<const StudyArm> arms) {
  if (arms.empty()) throw DataError("standardize: no arms");
  const std::size_t d = arms.front().dim();
  std::size_t total = 0;
  for (const StudyArm& arm : arms) {
    if (arm.dim() != d) {
      throw DataError("standardize: arm " + arm.id + " has " + std::to_string(arm.dim()) + " features, expected " +
                      std::to_string(d));
    }
    total += arm.size();
  }
  if (total < 2) throw DataError("standardize: need at least two rows in total");

  StandardizedArms out;
  out.stats.mean.assign(d, 0.0);
  out.stats.stddev.assign(d, 0.0);
  for (const StudyArm& arm : arms) {
    for (std::size_t r = 0; r < arm.size(); ++r) {
      for (std::size_t c = 0; c < d; ++c) out.stats.mean[c] += arm.features(r, c);
    }
  }
  for (double& m : out.stats.mean) m /= static_cast<double>(total);
  for (const StudyArm& arm : arms) {
    for (std::size_t r = 0; r < arm.size(); ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        const double dev = arm.features(r, c) - out.stats.mean[c];
        out.stats.stddev[c] += dev * dev;
      }
    }
  }
  for (double& s : out.stats.stddev) {
    s = std::max(std::sqrt(s / static_cast<double>(total)), StandardizationStats::kStdFloor);
  }
  for (const StudyArm& arm : arms) out.data.push_back(out.stats.apply(arm.features));
  return out;
}

// ---------------------------------------------------------------------------
// Objective pieces

Var discriminator_loss(Tape& tape, const Discriminator& disc, std::span<const Var> params, Var gen_batch,
                       Var data_batch) {
  const Var t_gen = gf_transform(tape, disc.raw(tape, gen_batch, params));
  const Var t_data = gf_transform(tape, disc.raw(tape, data_batch, params));
  const Var conj = tape.add(tape.scale(tape.mean(tape.square(t_data)), -0.25), tape.scale(tape.mean(t_data), -1.0));
  return tape.add(tape.mean(t_gen), conj);
}

double discriminator_loss(const Discriminator& disc, const Tensor& gen_batch, const Tensor& data_batch) {
  Tape tape;
  const auto params = disc.net().bind(tape, false);
  return tape.value(discriminator_loss(tape, disc, params, tape.constant(gen_batch), tape.constant(data_batch))).item();
}

Var generator_loss(Tape& tape, const Generator& gen, std::span<const Var> gen_params, Var z,
                   std::span<const Discriminator> discs) {
  if (discs.empty()) throw Error("generator_loss: no discriminators");
  const Var x = gen.forward(tape, z, gen_params);
  std::optional<Var> total;
  for (const Discriminator& disc : discs) {
    const auto frozen = disc.net().bind(tape, false);
    const Var term = tape.mean(gf_transform(tape, disc.raw(tape, x, frozen)));
    total = total ? tape.add(*total, term) : term;
  }
  return *total;
}

double generator_loss(const Generator& gen, std::span<const Discriminator> discs, const Tensor& z) {
  Tape tape;
  const auto params = gen.net().bind(tape, false);
  return tape.value(generator_loss(tape, gen, params, tape.constant(z), discs)).item();
}

BoundEstimate variational_bound(const Discriminator& disc, const Tensor& p_samples, const Tensor& q_samples) {
  if (p_samples.rows() < 2 || q_samples.rows() < 2) throw DataError("variational_bound: need at least two samples");
  const Tensor v_p = disc.raw(p_samples);
  const Tensor v_q = disc.raw(q_samples);

  auto mean_var = [](const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };

  std::vector<double> first;
  first.reserve(v_p.size());
  for (double v : v_p.values()) first.push_back(gf_transform(v));
  std::vector<double> second;
  second.reserve(v_q.size());
  for (double v : v_q.values()) {
    const double t = gf_transform(v);
    second.push_back(0.25 * t * t + t);
  }
  const auto [mp, vp] = mean_var(first);
  const auto [mq, vq] = mean_var(second);
  return {mp - mq, std::sqrt(vp / static_cast<double>(first.size()) + vq / static_cast<double>(second.size()))};
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

constexpr std::uint64_t kGeneratorStream = 1;
constexpr std::uint64_t kGeneratorInit = 2;
constexpr std::uint64_t kArmStreamBase = 100;
constexpr std::uint64_t kCriticInitBase = 200;

std::vector<double> column_means(const Tensor& x) {
  std::vector<double> means(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) means[c] += x(r, c);
  }
  for (double& m : means) m /= static_cast<double>(x.rows());
  return means;
}

std::vector<Tensor> collect(const Gradients& grads, std::span<const Var> vars) {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(grads.of(v));
  return out;
}

}  // namespace

Trainer::Trainer(std::span<const StudyArm> arms, TrainConfig config) : config_(std::move(config)) {
  config_.validate();
  if (arms.size() < 2) throw DataError("train: need at least two arms, got " + std::to_string(arms.size()));
  for (const StudyArm& arm : arms) {
    if (arm.size() < config_.batch_size) {
      throw DataError("train: arm " + arm.id + " has " + std::to_string(arm.size()) +
                      " rows, fewer than the batch size " + std::to_string(config_.batch_size));
    }
  }

  StandardizedArms standardized = standardize(arms);
  data_ = std::move(standardized.data);
  model_.stats = std::move(standardized.stats);
  model_.feature_names =
      arms.front().feature_names.empty() ? default_feature_names(arms.front().dim()) : arms.front().feature_names;
  const std::size_t d = model_.dim();

  MlpConfig gen_cfg;
  gen_cfg.widths.push_back(config_.noise_dim);
  gen_cfg.widths.insert(gen_cfg.widths.end(), config_.hidden.begin(), config_.hidden.end());
  gen_cfg.widths.push_back(d);
  gen_cfg.seed = derive_seed(config_.seed, kGeneratorInit);
  model_.generator = Generator(gen_cfg);
  gen_opt_ = Adam(model_.generator.net().params(), config_.beta1, config_.beta2);

  for (std::size_t a = 0; a < arms.size(); ++a) {
    MlpConfig disc_cfg;
    disc_cfg.widths.push_back(d);
    disc_cfg.widths.insert(disc_cfg.widths.end(), config_.hidden.begin(), config_.hidden.end());
    disc_cfg.widths.push_back(1);
    disc_cfg.seed = derive_seed(config_.seed, kCriticInitBase + a);
    model_.discriminators.emplace_back(disc_cfg);
    disc_opts_.emplace_back(model_.discriminators.back().net().params(), config_.beta1, config_.beta2);

    ArmStream stream{Rng(derive_seed(config_.seed, kArmStreamBase + a)), {}, 0};
    stream.order.resize(data_[a].rows());
    std::iota(stream.order.begin(), stream.order.end(), std::size_t{0});
    std::shuffle(stream.order.begin(), stream.order.end(), stream.rng);
    streams_.push_back(std::move(stream));
  }
  gen_rng_ = Rng(derive_seed(config_.seed, kGeneratorStream));
  last_arm_objective_.assign(arms.size(), 0.0);
}

Tensor Trainer::next_minibatch(std::size_t arm) {
  ArmStream& s = streams_[arm];
  const Tensor& data = data_[arm];
  if (s.cursor + config_.batch_size > s.order.size()) {
    std::shuffle(s.order.begin(), s.order.end(), s.rng);
    s.cursor = 0;
  }
  Tensor batch = Tensor::zeros(config_.batch_size, data.cols());
  for (std::size_t m = 0; m < config_.batch_size; ++m) {
    const auto src = data.row_span(s.order[s.cursor + m]);
    std::copy(src.begin(), src.end(), batch.values().begin() + static_cast<std::ptrdiff_t>(m * data.cols()));
  }
  s.cursor += config_.batch_size;
  return batch;
}

double Trainer::lr_scale() const {
  return std::pow(config_.lr_decay, static_cast<double>(iteration_ / config_.decay_period));
}

double Trainer::discriminator_step(std::size_t arm) {
  if (arm >= model_.discriminators.size()) throw Error("discriminator_step: arm index out of range");
  Discriminator& disc = model_.discriminators[arm];
  double objective = 0.0;
  for (std::size_t s = 0; s < config_.disc_steps; ++s) {
    const Tensor fake = model_.generator.sample(config_.batch_size, streams_[arm].rng);
    const Tensor real = next_minibatch(arm);
    Tape tape;
    const auto params = disc.net().bind(tape);
    const Var loss = discriminator_loss(tape, disc, params, tape.constant(fake), tape.constant(real));
    objective = tape.value(loss).item();
    const Gradients grads = tape.backward(loss);
    disc_opts_[arm].step(disc.net().params(), collect(grads, params), config_.lr_discriminator * lr_scale(), +1.0);
  }
  last_arm_objective_[arm] = objective;
  return objective;
}

double Trainer::generator_step() {
  const Tensor z = normal_matrix(gen_rng_, config_.batch_size, model_.generator.noise_dim());
  Tape tape;
  const auto params = model_.generator.net().bind(tape);
  const Var loss = generator_loss(tape, model_.generator, params, tape.constant(z), model_.discriminators);
  const double value = tape.value(loss).item();
  const Gradients grads = tape.backward(loss);
  gen_opt_.step(model_.generator.net().params(), collect(grads, params), config_.lr_generator * lr_scale(), -1.0);
  return value;
}

void Trainer::recenter() {
  const Tensor batch = model_.generator.sample(config_.batch_size, gen_rng_);
  const std::vector<double> mean = column_means(batch);
  for (Discriminator& disc : model_.discriminators) disc.set_recenter_shift(mean);
}

bool Trainer::converged() const {
  const std::size_t w = config_.convergence_window;
  const auto& trace = model_.trace;
  if (trace.size() < 2 * w || trace.size() % w != 0) return false;
  double current = 0.0;
  double previous = 0.0;
  for (std::size_t i = trace.size() - w; i < trace.size(); ++i) current += trace[i].total;
  for (std::size_t i = trace.size() - 2 * w; i < trace.size() - w; ++i) previous += trace[i].total;
  return std::abs(current - previous) / static_cast<double>(w) < config_.convergence_tol;
}

bool Trainer::iterate() {
  try {
    for (std::size_t a = 0; a < model_.discriminators.size(); ++a) discriminator_step(a);
    generator_step();
  } catch (const NumericalError& e) {
    std::ostringstream os;
    os << "non-finite objective at iteration " << iteration_ << ": " << e.what();
    if (!model_.trace.empty()) {
      os << " (last recorded F = " << model_.trace.back().total << " at iteration " << model_.trace.back().iteration
         << ")";
    }
    throw NumericalError(os.str());
  }

  TraceRow row;
  row.iteration = iteration_;
  row.arm_objective = last_arm_objective_;
  row.total = std::accumulate(last_arm_objective_.begin(), last_arm_objective_.end(), 0.0);
  row.lr_generator = config_.lr_generator * lr_scale();
  row.lr_discriminator = config_.lr_discriminator * lr_scale();
  model_.trace.push_back(std::move(row));

  ++iteration_;
  if (iteration_ % config_.recenter_period == 0) recenter();
  return converged();
}

void Trainer::run() {
  while (iteration_ < config_.max_iterations) {
    if (iterate()) break;
  }
}

TrainedModel train(std::span<const StudyArm> arms, const TrainConfig& config) {
  Trainer trainer(arms, config);
  trainer.run();
  return std::move(trainer.model());
}

ObjectiveEstimate objective_estimate(const TrainedModel& model, std::span<const StudyArm> arms, std::size_t n_mc,
                                     std::uint64_t seed) {
  if (arms.size() != model.arm_count()) throw DataError("objective_estimate: arm count does not match the model");
  Rng rng(seed);
  const Tensor fake = model.generator.sample(n_mc, rng);
  ObjectiveEstimate out;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    out.per_arm.push_back(variational_bound(model.discriminators[a], fake, model.stats.apply(arms[a].features)));
    out.total += out.per_arm.back().value;
  }
  return out;
}

std::vector<double> fit_critic(Discriminator& disc, const Sampler& p_sampler, const Tensor& q_data,
                               const CriticFitConfig& config) {
  if (q_data.rows() < config.batch_size) throw DataError("fit_critic: fewer data rows than the batch size");
  Rng rng(config.seed);
  Adam opt(disc.net().params(), config.beta1, config.beta2);
  std::vector<std::size_t> order(q_data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  std::vector<double> trace;
  trace.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    if (cursor + config.batch_size > order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    Tensor real = Tensor::zeros(config.batch_size, q_data.cols());
    for (std::size_t m = 0; m < config.batch_size; ++m) {
      const auto src = q_data.row_span(order[cursor + m]);
      std::copy(src.begin(), src.end(), real.values().begin() + static_cast<std::ptrdiff_t>(m * q_data.cols()));
    }
    cursor += config.batch_size;
    const Tensor fake = p_sampler(config.batch_size, rng);

    Tape tape;
    const auto params = disc.net().bind(tape);
    const Var loss = discriminator_loss(tape, disc, params, tape.constant(fake), tape.constant(real));
    trace.push_back(tape.value(loss).item());
    opt.step(disc.net().params(), collect(tape.backward(loss), params), config.lr, +1.0);
  }
  return trace;
}

}  // namespace cgan
