#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cgan/cohort.hpp"
#include "cgan/ndcore.hpp"

namespace cgan {

/// Two-arm synthetic study: arm 1 mixes subpopulations A and B, arm 2 mixes A and C.
struct SimSpec {
  std::size_t dim = 10;
  std::size_t n_sub = 2000;

  /// Normal-Wishart prior. Empty mu0 means zeros, nu0 <= 0 means dim + 2, empty psi means identity.
  std::vector<double> mu0;
  double kappa0 = 0.1;
  double nu0 = 0.0;
  Tensor psi;

  /// Outcome mean keyed by arm id + subpopulation label ("1A", "1B", "2A", "2C").
  std::map<std::string, double> outcome_means = {{"1A", 60.0}, {"1B", 40.0}, {"2A", -10.0}, {"2C", 10.0}};
  double outcome_std = 1.0;
  std::uint64_t seed = 0;

  /// Copy with defaults filled in; throws on invalid hyperparameters.
  [[nodiscard]] SimSpec resolved() const;
};

struct GaussianParams {
  std::vector<double> mean;
  Tensor cov;
};

/// Precision ~ Wishart(nu0, psi) by Bartlett decomposition, mean ~ N(mu0, (kappa0 * precision)^-1).
/// Returns the mean and the covariance (inverse precision).
GaussianParams sample_normal_wishart(const SimSpec& spec, char subpop, std::uint64_t seed);

/// `count` rows from N(mean, cov).
Tensor sample_gaussian(const GaussianParams& params, std::size_t count, std::uint64_t seed);

struct SimPopulations {
  StudyArm arm1;
  StudyArm arm2;
  GaussianParams a;
  GaussianParams b;
  GaussianParams c;
};

/// Draws subpopulations A, B and C and assembles both arms (labels kept, no outcomes yet).
SimPopulations build_populations(const SimSpec& spec);

/// Fills each arm's outcomes from the Gaussian of its (arm id, label) cell.
void simulate_outcomes(StudyArm& arm, const SimSpec& spec, std::uint64_t seed);

/// build_populations + simulate_outcomes with seeds derived from spec.seed.
SimPopulations simulate(const SimSpec& spec);

}  // namespace cgan
