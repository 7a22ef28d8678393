#include "cgan/simgen.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "cgan/random.hpp"

namespace cgan {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

Matrix to_eigen(const Tensor& t) {
  Matrix m(t.rows(), t.cols());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m(r, c) = t(r, c);
  }
  return m;
}

Tensor from_eigen(const Matrix& m) {
  Tensor t = Tensor::zeros(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) t(r, c) = m(r, c);
  }
  return t;
}

constexpr int kMaxJitterRetries = 3;
constexpr double kJitter = 1e-8;

}  // namespace

SimSpec SimSpec::resolved() const {
  SimSpec s = *this;
  if (s.dim == 0) throw DataError("SimSpec: dim must be positive");
  if (s.n_sub == 0) throw DataError("SimSpec: n_sub must be positive");
  if (s.mu0.empty()) s.mu0.assign(s.dim, 0.0);
  if (s.nu0 <= 0.0) s.nu0 = static_cast<double>(s.dim) + 2.0;
  if (s.psi.size() == 0) s.psi = Tensor::identity(s.dim);
  if (s.mu0.size() != s.dim) throw DataError("SimSpec: mu0 length does not match dim");
  if (s.psi.shape() != Shape{s.dim, s.dim}) throw DataError("SimSpec: psi must be dim x dim");
  if (!(s.kappa0 > 0.0)) throw DataError("SimSpec: kappa0 must be positive");
  if (!(s.nu0 > static_cast<double>(s.dim) - 1.0)) throw DataError("SimSpec: nu0 must exceed dim - 1");
  if (!(s.outcome_std > 0.0)) throw DataError("SimSpec: outcome std must be positive");
  const Matrix psi = to_eigen(s.psi);
  if (!psi.isApprox(psi.transpose()) || Eigen::LLT<Matrix>(psi).info() != Eigen::Success) {
    throw DataError("SimSpec: psi must be symmetric positive definite");
  }
  return s;
}

GaussianParams sample_normal_wishart(const SimSpec& raw_spec, char subpop, std::uint64_t seed) {
  const SimSpec spec = raw_spec.resolved();
  const auto d = static_cast<Eigen::Index>(spec.dim);
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(static_cast<unsigned char>(subpop))));
  std::normal_distribution<double> normal(0.0, 1.0);

  const Matrix psi_chol = Eigen::LLT<Matrix>(to_eigen(spec.psi)).matrixL();

  for (int attempt = 0; attempt <= kMaxJitterRetries; ++attempt) {
    // Bartlett factor: chi-distributed diagonal, standard normal strictly-lower entries.
    Matrix bartlett = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      std::chi_squared_distribution<double> chi2(spec.nu0 - static_cast<double>(i));
      bartlett(i, i) = std::sqrt(chi2(rng));
      for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = normal(rng);
    }
    const Matrix factor = psi_chol * bartlett;
    Matrix precision = factor * factor.transpose();
    if (attempt > 0) precision += kJitter * static_cast<double>(attempt) * Matrix::Identity(d, d);

    Eigen::LLT<Matrix> prec_llt(precision);
    if (prec_llt.info() != Eigen::Success) continue;
    Matrix cov = prec_llt.solve(Matrix::Identity(d, d));
    cov = (0.5 * (cov + cov.transpose())).eval();
    if (Eigen::LLT<Matrix>(cov).info() != Eigen::Success) continue;

    // mean = mu0 + U^-T u where kappa0 * precision = U U^T.
    Eigen::LLT<Matrix> scaled(spec.kappa0 * precision);
    Vector u(d);
    for (Eigen::Index i = 0; i < d; ++i) u(i) = normal(rng);
    const Vector offset = scaled.matrixU().solve(u);

    GaussianParams out;
    out.mean.resize(spec.dim);
    for (Eigen::Index i = 0; i < d; ++i) out.mean[static_cast<std::size_t>(i)] = spec.mu0[i] + offset(i);
    out.cov = from_eigen(cov);
    return out;
  }
  throw NumericalError("normal-Wishart draw is not positive definite after jitter retries");
}

Tensor sample_gaussian(const GaussianParams& params, std::size_t count, std::uint64_t seed) {
  const std::size_t d = params.mean.size();
  Eigen::LLT<Matrix> llt(to_eigen(params.cov));
  if (llt.info() != Eigen::Success) throw NumericalError("sample_gaussian: covariance is not positive definite");
  const Matrix lower = llt.matrixL();

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out = Tensor::zeros(count, d);
  Vector u(static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t i = 0; i < d; ++i) u(static_cast<Eigen::Index>(i)) = normal(rng);
    const Vector x = lower * u;
    for (std::size_t i = 0; i < d; ++i) out(r, i) = params.mean[i] + x(static_cast<Eigen::Index>(i));
  }
  return out;
}

namespace {

StudyArm assemble_arm(const std::string& id, const Tensor& shared, const Tensor& unique, char unique_label) {
  StudyArm arm;
  arm.id = id;
  const std::size_t d = shared.cols();
  arm.feature_names = default_feature_names(d);
  std::vector<double> values;
  values.reserve((shared.rows() + unique.rows()) * d);
  values.insert(values.end(), shared.values().begin(), shared.values().end());
  values.insert(values.end(), unique.values().begin(), unique.values().end());
  arm.features = Tensor(shared.rows() + unique.rows(), d, std::move(values));

  std::vector<std::string> labels(shared.rows(), "A");
  labels.resize(shared.rows() + unique.rows(), std::string(1, unique_label));
  arm.labels = std::move(labels);
  for (std::size_t i = 0; i < arm.size(); ++i) arm.unit_ids.push_back(id + "_" + std::to_string(i));
  return arm;
}

}  // namespace

SimPopulations build_populations(const SimSpec& raw_spec) {
  const SimSpec spec = raw_spec.resolved();
  SimPopulations pops;
  pops.a = sample_normal_wishart(spec, 'A', derive_seed(spec.seed, 10));
  pops.b = sample_normal_wishart(spec, 'B', derive_seed(spec.seed, 11));
  pops.c = sample_normal_wishart(spec, 'C', derive_seed(spec.seed, 12));

  const Tensor a1 = sample_gaussian(pops.a, spec.n_sub, derive_seed(spec.seed, 20));
  const Tensor b1 = sample_gaussian(pops.b, spec.n_sub, derive_seed(spec.seed, 21));
  const Tensor a2 = sample_gaussian(pops.a, spec.n_sub, derive_seed(spec.seed, 22));
  const Tensor c2 = sample_gaussian(pops.c, spec.n_sub, derive_seed(spec.seed, 23));
  pops.arm1 = assemble_arm("1", a1, b1, 'B');
  pops.arm2 = assemble_arm("2", a2, c2, 'C');
  return pops;
}

void simulate_outcomes(StudyArm& arm, const SimSpec& spec, std::uint64_t seed) {
  if (!arm.labels) throw DataError("simulate_outcomes: arm " + arm.id + " has no subpopulation labels");
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, spec.outcome_std);
  std::vector<double> outcomes;
  outcomes.reserve(arm.size());
  for (const std::string& label : *arm.labels) {
    const auto it = spec.outcome_means.find(arm.id + label);
    if (it == spec.outcome_means.end()) {
      throw DataError("simulate_outcomes: no outcome mean for cell " + arm.id + label);
    }
    outcomes.push_back(it->second + noise(rng));
  }
  arm.outcomes = std::move(outcomes);
}

SimPopulations simulate(const SimSpec& spec) {
  SimPopulations pops = build_populations(spec);
  simulate_outcomes(pops.arm1, spec, derive_seed(spec.seed, 30));
  simulate_outcomes(pops.arm2, spec, derive_seed(spec.seed, 31));
  return pops;
}

}  // namespace cgan
