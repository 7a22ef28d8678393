#include "cgan/baselines.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cgan {

namespace {

constexpr double kRidge = 1e-6;
constexpr double kGradTol = 1e-8;
constexpr std::size_t kMaxIterations = 200;
constexpr double kDivergentNorm = 1e3;
constexpr double kScoreClamp = 1e-12;

}  // namespace

std::vector<double> PropensityModel::scores(const Tensor& x) const {
  if (x.cols() != coef.size()) throw DataError("propensity: feature count does not match the model");
  std::vector<double> out;
  out.reserve(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double eta = intercept;
    for (std::size_t c = 0; c < x.cols(); ++c) eta += coef[c] * x(r, c);
    out.push_back(sigmoid(eta));
  }
  return out;
}

PropensityModel fit_logistic_propensity(const Tensor& x, std::span<const int> treated) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (treated.size() != n) throw DataError("fit_logistic_propensity: indicator length does not match rows");
  const auto n_treated = static_cast<std::size_t>(std::count(treated.begin(), treated.end(), 1));
  if (n_treated == 0 || n_treated == n) throw DataError("fit_logistic_propensity: both classes must be present");

  // Work on standardized columns for conditioning, map back at the end.
  std::vector<double> mean(d, 0.0);
  std::vector<double> scale(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t r = 0; r < n; ++r) mean[c] += x(r, c);
    mean[c] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) scale[c] += (x(r, c) - mean[c]) * (x(r, c) - mean[c]);
    scale[c] = std::sqrt(scale[c] / static_cast<double>(n));
    if (!(scale[c] > 0.0)) scale[c] = 1.0;
  }

  const auto p = static_cast<Eigen::Index>(d + 1);
  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), p);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    design(i, 0) = 1.0;
    for (std::size_t c = 0; c < d; ++c) design(i, static_cast<Eigen::Index>(c + 1)) = (x(r, c) - mean[c]) / scale[c];
    y(i) = treated[r] == 1 ? 1.0 : 0.0;
  }
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, kRidge);
  penalty(0) = 0.0;

  PropensityModel model;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  const double base = static_cast<double>(n_treated) / static_cast<double>(n);
  beta(0) = std::log(base / (1.0 - base));

  for (std::size_t it = 0; it < kMaxIterations; ++it) {
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd mu(eta.size());
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      mu(i) = sigmoid(eta(i));
      w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-12);
    }
    const Eigen::VectorXd grad = design.transpose() * (y - mu) - penalty.cwiseProduct(beta);
    model.iterations = it + 1;
    if (grad.norm() < kGradTol) {
      model.converged = true;
      break;
    }
    Eigen::MatrixXd hessian = design.transpose() * w.asDiagonal() * design;
    hessian.diagonal() += penalty;
    beta += hessian.ldlt().solve(grad);
    if (!beta.allFinite()) throw NumericalError("fit_logistic_propensity: coefficients diverged to non-finite values");
  }

  model.coef.resize(d);
  model.intercept = beta(0);
  for (std::size_t c = 0; c < d; ++c) {
    model.coef[c] = beta(static_cast<Eigen::Index>(c + 1)) / scale[c];
    model.intercept -= model.coef[c] * mean[c];
  }

  const Eigen::VectorXd eta = design * beta;
  double min_treated = std::numeric_limits<double>::infinity();
  double max_control = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < n; ++r) {
    const double e = eta(static_cast<Eigen::Index>(r));
    if (treated[r] == 1) {
      min_treated = std::min(min_treated, e);
    } else {
      max_control = std::max(max_control, e);
    }
  }
  model.separation_warning = min_treated > max_control || beta.tail(p - 1).norm() > kDivergentNorm;
  return model;
}

PropensityModel fit_logistic_propensity(const StudyArm& treated, const StudyArm& control) {
  if (treated.dim() != control.dim()) throw DataError("fit_logistic_propensity: arms have different feature counts");
  std::vector<double> values(treated.features.values().begin(), treated.features.values().end());
  values.insert(values.end(), control.features.values().begin(), control.features.values().end());
  const Tensor x(treated.size() + control.size(), treated.dim(), std::move(values));
  std::vector<int> indicator(treated.size(), 1);
  indicator.resize(treated.size() + control.size(), 0);
  return fit_logistic_propensity(x, indicator);
}

std::pair<WeightVector, WeightVector> ipw_weights(std::span<const double> scores, std::span<const int> treated) {
  if (scores.size() != treated.size()) throw DataError("ipw_weights: score count does not match indicators");
  std::vector<double> raw_treated;
  std::vector<double> raw_control;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double e = std::clamp(scores[i], kScoreClamp, 1.0 - kScoreClamp);
    if (treated[i] == 1) {
      raw_treated.push_back(1.0 / e);
    } else {
      raw_control.push_back(1.0 / (1.0 - e));
    }
  }
  return {normalize(raw_treated, 0), normalize(raw_control, 1)};
}

double percentile(std::span<const double> values, double pct) {
  if (values.empty()) throw DataError("percentile: no values");
  if (!(pct >= 0.0 && pct <= 100.0)) throw Error("percentile: pct must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ClipBounds percentile_bounds(std::span<const double> scores, double lower_pct, double upper_pct) {
  if (lower_pct > upper_pct) throw Error("percentile_bounds: lower percentile exceeds upper");
  return {percentile(scores, lower_pct), percentile(scores, upper_pct)};
}

std::vector<double> clip_to(std::span<const double> scores, ClipBounds bounds) {
  std::vector<double> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(std::clamp(s, bounds.lower, bounds.upper));
  return out;
}

std::vector<double> clip_percentile(std::span<const double> scores, double lower_pct, double upper_pct) {
  if (scores.empty()) throw DataError("clip_percentile: no scores");
  return clip_to(scores, percentile_bounds(scores, lower_pct, upper_pct));
}

}  // namespace cgan
