#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cgan/trainer.hpp"

namespace cgan {

/// One measured quantity against its expected range.
struct OracleCheck {
  std::string name;
  double measured = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  [[nodiscard]] bool pass() const { return measured >= lower && measured <= upper; }
};

struct OracleReport {
  std::string suite;
  std::vector<OracleCheck> checks;

  [[nodiscard]] bool pass() const;
  [[nodiscard]] std::string format() const;
};

/// Critic fitted against P = N(1, 1) (sampled fresh each step) and 20k draws of Q = N(0, 1).
/// The variational bound on fresh samples should land in [0.9 (e - 1), (e - 1) + 3 SE].
struct GaussianChi2Options {
  std::size_t q_samples = 20000;
  std::size_t eval_samples = 200000;
  std::size_t iterations = 10000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};
OracleReport gaussian_chi2_oracle(const GaussianChi2Options& options);

/// Two arms drawn from one correlated 2-D Gaussian, trained with the full pipeline.
/// Checks per-arm chi-squared estimates, per-arm ESS / N, and the weighted effect
/// on a synthetic outcome against the plain difference of means.
struct IdentityOptions {
  std::size_t n = 2000;
  TrainConfig train;
  std::size_t n_mc = 20000;
};
OracleReport identity_oracle(const IdentityOptions& options);

/// Exact N(1,1)/N(0,1) ratios on Q draws: bootstrap variance of the IS mean against chi^2 / n.
struct VarianceRelationOptions {
  std::size_t pool = 200000;
  std::size_t n = 1000;
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
};
OracleReport variance_relation_oracle(const VarianceRelationOptions& options);

}  // namespace cgan
