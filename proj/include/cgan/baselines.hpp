#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "cgan/cohort.hpp"
#include "cgan/weights.hpp"

namespace cgan {

/// Logistic model of P(treated | x).
struct PropensityModel {
  std::vector<double> coef;
  double intercept = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  /// Set when the fitted linear predictor separates the classes or coefficients diverge.
  bool separation_warning = false;

  [[nodiscard]] std::vector<double> scores(const Tensor& x) const;
};

/// Newton / IRLS fit of the Bernoulli log-likelihood with an L2 ridge of 1e-6 on the slopes.
/// `treated[i]` is 1 for treated rows and 0 for controls.
PropensityModel fit_logistic_propensity(const Tensor& x, std::span<const int> treated);

/// Stacks both arms (treated first) and fits.
PropensityModel fit_logistic_propensity(const StudyArm& treated, const StudyArm& control);

/// Self-normalized inverse probability weights: 1/e for treated, 1/(1-e) for controls.
/// Scores are clamped to [1e-12, 1 - 1e-12]. Returns (treated weights, control weights).
std::pair<WeightVector, WeightVector> ipw_weights(std::span<const double> scores, std::span<const int> treated);

/// Linear-interpolation percentile (pct in [0, 100]).
double percentile(std::span<const double> values, double pct);

struct ClipBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Empirical percentiles of the pooled score vector.
ClipBounds percentile_bounds(std::span<const double> scores, double lower_pct = 10.0, double upper_pct = 90.0);

/// Clamps every score into [bounds.lower, bounds.upper]. Idempotent for fixed bounds.
std::vector<double> clip_to(std::span<const double> scores, ClipBounds bounds);

/// Winsorizes scores to the [lower, upper] empirical percentiles of the pooled vector.
///
/// Re-running on already clipped scores re-derives the percentiles and may tighten
/// them slightly under interpolation; use clip_to with the original bounds to reapply.
std::vector<double> clip_percentile(std::span<const double> scores, double lower_pct = 10.0, double upper_pct = 90.0);

}  // namespace cgan
