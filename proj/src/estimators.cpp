#include "cgan/estimators.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace cgan {

double EffectReport::total_ess() const { return std::accumulate(arm_ess.begin(), arm_ess.end(), 0.0); }

double weighted_mean(std::span<const double> y, std::span<const double> w) {
  if (y.size() != w.size()) {
    throw DataError("weighted mean: " + std::to_string(y.size()) + " outcomes but " + std::to_string(w.size()) +
                    " weights");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
  return s;
}

double weighted_ate(std::span<const double> y1, const WeightVector& w1, std::span<const double> y2,
                    const WeightVector& w2) {
  return weighted_mean(y1, w1.weights) - weighted_mean(y2, w2.weights);
}

double kish_ess(std::span<const double> w) {
  double s = 0.0;
  double s2 = 0.0;
  for (double x : w) {
    s += x;
    s2 += x * x;
  }
  if (!(s2 > 0.0)) throw NumericalError("kish_ess: all weights are zero");
  return s * s / s2;
}

EffectReport effect_report(std::string method, std::span<const double> y1, const WeightVector& w1,
                           std::span<const double> y2, const WeightVector& w2) {
  EffectReport r;
  r.method = std::move(method);
  r.arm_means = {weighted_mean(y1, w1.weights), weighted_mean(y2, w2.weights)};
  r.ate = r.arm_means[0] - r.arm_means[1];
  r.arm_ess = {kish_ess(w1), kish_ess(w2)};
  return r;
}

BalanceReport asdm(const Tensor& x1, std::span<const double> w1, const Tensor& x2, std::span<const double> w2) {
  if (x1.cols() != x2.cols()) throw DataError("asdm: arms have different feature counts");
  if (x1.rows() != w1.size() || x2.rows() != w2.size()) throw DataError("asdm: weight count does not match rows");
  if (x1.rows() < 2 || x2.rows() < 2) throw DataError("asdm: each arm needs at least two rows");

  auto unweighted_var = [](const Tensor& x, std::size_t c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c);
    mean /= static_cast<double>(x.rows());
    double ss = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
    return ss / static_cast<double>(x.rows() - 1);
  };
  auto weighted_col_mean = [](const Tensor& x, std::span<const double> w, std::size_t c) {
    double s = 0.0;
    double total = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      s += w[r] * x(r, c);
      total += w[r];
    }
    return s / total;
  };

  BalanceReport report;
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < x1.cols(); ++c) {
    const double pooled = std::sqrt(0.5 * (unweighted_var(x1, c) + unweighted_var(x2, c)));
    if (!(pooled > 0.0)) {
      report.asdm.push_back(0.0);
      report.skipped.push_back(true);
      continue;
    }
    const double value = std::abs(weighted_col_mean(x1, w1, c) - weighted_col_mean(x2, w2, c)) / pooled;
    report.asdm.push_back(value);
    report.skipped.push_back(false);
    sum += value;
    ++counted;
  }
  report.mean_asdm = counted ? sum / static_cast<double>(counted) : 0.0;
  return report;
}

double chi2_from_ratios(std::span<const double> ratios) {
  if (ratios.empty()) throw DataError("chi2_from_ratios: no ratios");
  double s = 0.0;
  for (double r : ratios) s += r * r;
  return s / static_cast<double>(ratios.size()) - 1.0;
}

double analytic_gaussian_chi2(Gaussian1d p, Gaussian1d q) {
  if (!(p.var > 0.0) || !(q.var > 0.0)) throw Error("analytic_gaussian_chi2: variances must be positive");
  const double denom = 2.0 * q.var - p.var;
  if (!(2.0 / p.var - 1.0 / q.var > 0.0) || !(denom > 0.0)) {
    throw NumericalError("chi-squared divergence infinite");
  }
  const double diff = p.mean - q.mean;
  return q.var / std::sqrt(p.var * denom) * std::exp(diff * diff / denom) - 1.0;
}

VarianceRelation is_variance_relation_check(std::span<const double> ratios, std::size_t n, std::size_t replicates,
                                            std::uint64_t seed) {
  if (ratios.empty() || n == 0 || replicates < 2) throw Error("is_variance_relation_check: empty input");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, ratios.size() - 1);
  std::vector<double> estimates;
  estimates.reserve(replicates);
  for (std::size_t b = 0; b < replicates; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += ratios[pick(rng)];
    estimates.push_back(s / static_cast<double>(n));
  }
  const double mean = std::accumulate(estimates.begin(), estimates.end(), 0.0) / static_cast<double>(replicates);
  double ss = 0.0;
  for (double e : estimates) ss += (e - mean) * (e - mean);
  return {ss / static_cast<double>(replicates - 1), chi2_from_ratios(ratios) / static_cast<double>(n)};
}

void write_effect_csv(const std::filesystem::path& path, std::span<const EffectReport> reports) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "method,ate,mean_arm0,mean_arm1,ess_arm0,ess_arm1,ess_total\n";
  for (const EffectReport& r : reports) {
    out << r.method << ',' << format_double(r.ate) << ',' << format_double(r.arm_means.at(0)) << ','
        << format_double(r.arm_means.at(1)) << ',' << format_double(r.arm_ess.at(0)) << ','
        << format_double(r.arm_ess.at(1)) << ',' << format_double(r.total_ess()) << '\n';
  }
}

void write_balance_csv(const std::filesystem::path& path, std::span<const BalanceReport> reports,
                       std::span<const std::string> feature_names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "method,feature,asdm,skipped\n";
  for (const BalanceReport& r : reports) {
    for (std::size_t j = 0; j < r.asdm.size(); ++j) {
      const std::string name = j < feature_names.size() ? feature_names[j] : "f_" + std::to_string(j);
      out << r.method << ',' << name << ',' << format_double(r.asdm[j]) << ',' << (r.skipped[j] ? 1 : 0) << '\n';
    }
    out << r.method << ",mean," << format_double(r.mean_asdm) << ",0\n";
  }
}

std::string format_report_table(std::span<const EffectReport> effects, std::span<const BalanceReport> balances) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "method" << std::right << std::setw(12) << "ATE" << std::setw(12) << "ESS"
     << std::setw(12) << "mean ASDM" << '\n';
  os << std::string(52, '-') << '\n';
  for (std::size_t i = 0; i < std::max(effects.size(), balances.size()); ++i) {
    const std::string method = i < effects.size() ? effects[i].method : balances[i].method;
    os << std::left << std::setw(16) << method << std::right << std::fixed;
    if (i < effects.size()) {
      os << std::setw(12) << std::setprecision(2) << effects[i].ate << std::setw(12) << std::setprecision(0)
         << effects[i].total_ess();
    } else {
      os << std::setw(12) << "-" << std::setw(12) << "-";
    }
    if (i < balances.size()) {
      os << std::setw(12) << std::setprecision(4) << balances[i].mean_asdm;
    } else {
      os << std::setw(12) << "-";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace cgan
