#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cgan/ndcore.hpp"
#include "cgan/weights.hpp"

namespace cgan {

struct EffectReport {
  std::string method;
  double ate = 0.0;
  std::vector<double> arm_means;
  std::vector<double> arm_ess;

  [[nodiscard]] double total_ess() const;
};

struct BalanceReport {
  std::string method;
  std::vector<double> asdm;
  /// Features whose pooled std is zero; their ASDM is reported as 0 and excluded from the mean.
  std::vector<bool> skipped;
  double mean_asdm = 0.0;
};

/// sum(w * y). Lengths must match.
double weighted_mean(std::span<const double> y, std::span<const double> w);

/// sum(w1 * y1) - sum(w2 * y2) with normalized weights.
double weighted_ate(std::span<const double> y1, const WeightVector& w1, std::span<const double> y2,
                    const WeightVector& w2);

/// Kish effective sample size (sum w)^2 / sum w^2.
double kish_ess(std::span<const double> w);
inline double kish_ess(const WeightVector& w) { return kish_ess(w.weights); }

EffectReport effect_report(std::string method, std::span<const double> y1, const WeightVector& w1,
                           std::span<const double> y2, const WeightVector& w2);

/// Per-feature |weighted mean difference| / sqrt((s1^2 + s2^2) / 2), unweighted sample variances.
BalanceReport asdm(const Tensor& x1, std::span<const double> w1, const Tensor& x2, std::span<const double> w2);

/// mean(r^2) - 1 for likelihood-ratio estimates on samples from q.
double chi2_from_ratios(std::span<const double> ratios);

struct Gaussian1d {
  double mean = 0.0;
  double var = 1.0;
};

/// Closed-form Pearson chi-squared divergence between univariate Gaussians.
/// Throws NumericalError when 2/var_p <= 1/var_q (the integral diverges).
double analytic_gaussian_chi2(Gaussian1d p, Gaussian1d q);

struct VarianceRelation {
  /// Bootstrap variance of the IS estimate of a constant estimand (mu = 1).
  double lhs = 0.0;
  /// chi2_from_ratios(ratios) / n.
  double rhs = 0.0;
};

/// Compares the importance sampling variance with chi^2 / n by resampling `n` ratios
/// with replacement `replicates` times.
VarianceRelation is_variance_relation_check(std::span<const double> ratios, std::size_t n,
                                            std::size_t replicates = 200, std::uint64_t seed = 0);

void write_effect_csv(const std::filesystem::path& path, std::span<const EffectReport> reports);
void write_balance_csv(const std::filesystem::path& path, std::span<const BalanceReport> reports,
                       std::span<const std::string> feature_names);
/// Fixed-width text table: method, ATE, ESS, mean ASDM.
std::string format_report_table(std::span<const EffectReport> effects, std::span<const BalanceReport> balances);

}  // namespace cgan
