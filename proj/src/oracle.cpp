#include "cgan/oracle.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "cgan/estimators.hpp"
#include "cgan/weights.hpp"

namespace cgan {

bool OracleReport::pass() const {
  for (const OracleCheck& c : checks) {
    if (!c.pass()) return false;
  }
  return true;
}

std::string OracleReport::format() const {
  std::ostringstream os;
  os << "suite " << suite << '\n';
  for (const OracleCheck& c : checks) {
    os << "  " << (c.pass() ? "PASS" : "FAIL") << "  " << std::left << std::setw(28) << c.name << std::right
       << " measured " << std::setprecision(6) << c.measured << "  expected [" << c.lower << ", " << c.upper << "]\n";
  }
  os << (pass() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

OracleReport gaussian_chi2_oracle(const GaussianChi2Options& options) {
  const Gaussian1d p{1.0, 1.0};
  const Gaussian1d q{0.0, 1.0};
  const double analytic = analytic_gaussian_chi2(p, q);

  Rng data_rng(derive_seed(options.seed, 1));
  const Tensor q_data = normal_matrix(data_rng, options.q_samples, 1);
  const Sampler p_sampler = [p](std::size_t count, Rng& rng) {
    Tensor t = normal_matrix(rng, count, 1, std::sqrt(p.var));
    for (double& v : t.values()) v += p.mean;
    return t;
  };

  Discriminator disc(MlpConfig{{1, 64, 64, 1}, derive_seed(options.seed, 2)});
  CriticFitConfig fit;
  fit.iterations = options.iterations;
  fit.lr = options.lr;
  fit.seed = derive_seed(options.seed, 3);
  (void)fit_critic(disc, p_sampler, q_data, fit);

  Rng eval_rng(derive_seed(options.seed, 4));
  const Tensor p_eval = p_sampler(options.eval_samples, eval_rng);
  const Tensor q_eval = normal_matrix(eval_rng, options.eval_samples, 1);
  const BoundEstimate bound = variational_bound(disc, p_eval, q_eval);

  OracleReport report{"gaussian-chi2", {}};
  report.checks.push_back({"variational estimate", bound.value, 0.9 * analytic, analytic + 3.0 * bound.std_error});
  return report;
}

OracleReport identity_oracle(const IdentityOptions& options) {
  constexpr double kEffect = 3.0;
  Rng rng(derive_seed(options.train.seed, 900));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<StudyArm> arms(2);
  for (std::size_t a = 0; a < 2; ++a) {
    StudyArm& arm = arms[a];
    arm.id = std::to_string(a + 1);
    arm.feature_names = default_feature_names(2);
    arm.features = normal_matrix(rng, options.n, 2);
    std::vector<double> y;
    for (std::size_t r = 0; r < options.n; ++r) {
      const double z0 = arm.features(r, 0);
      const double z1 = arm.features(r, 1);
      arm.features(r, 0) = 1.0 + 2.0 * z0;
      arm.features(r, 1) = -0.5 + 0.6 * z0 + 0.8 * z1;
      arm.unit_ids.push_back(arm.id + "_" + std::to_string(r));
      y.push_back((a == 0 ? kEffect : 0.0) + arm.features(r, 0) - arm.features(r, 1) + noise(rng));
    }
    arm.outcomes = std::move(y);
  }

  const TrainedModel model = train(arms, options.train);
  const ObjectiveEstimate est = objective_estimate(model, arms, options.n_mc, derive_seed(options.train.seed, 901));

  OracleReport report{"identity", {}};
  std::vector<WeightVector> weights;
  for (std::size_t a = 0; a < 2; ++a) {
    weights.push_back(extract_weights(model, a, arms[a]));
    report.checks.push_back({"chi2 estimate arm " + std::to_string(a), est.per_arm[a].value,
                             -std::numeric_limits<double>::infinity(), 0.05});
  }
  for (std::size_t a = 0; a < 2; ++a) {
    report.checks.push_back(
        {"ESS / N arm " + std::to_string(a), kish_ess(weights[a]) / static_cast<double>(options.n), 0.8, 1.0});
  }

  const auto mean_var = [](const std::vector<double>& y) {
    double m = 0.0;
    for (double v : y) m += v;
    m /= static_cast<double>(y.size());
    double ss = 0.0;
    for (double v : y) ss += (v - m) * (v - m);
    return std::pair{m, ss / static_cast<double>(y.size() - 1)};
  };
  const auto [m1, v1] = mean_var(*arms[0].outcomes);
  const auto [m2, v2] = mean_var(*arms[1].outcomes);
  const double plain = m1 - m2;
  const double se = std::sqrt(v1 / static_cast<double>(options.n) + v2 / static_cast<double>(options.n));
  const double weighted = weighted_ate(*arms[0].outcomes, weights[0], *arms[1].outcomes, weights[1]);
  report.checks.push_back({"weighted ATE", weighted, plain - 3.0 * se, plain + 3.0 * se});
  return report;
}

OracleReport variance_relation_oracle(const VarianceRelationOptions& options) {
  Rng rng(derive_seed(options.seed, 1));
  std::normal_distribution<double> draw(0.0, 1.0);
  std::vector<double> ratios(options.pool);
  // N(1,1) over N(0,1) at x is exp(x - 1/2).
  for (double& r : ratios) r = std::exp(draw(rng) - 0.5);
  const VarianceRelation v = is_variance_relation_check(ratios, options.n, options.replicates,
                                                        derive_seed(options.seed, 2));
  OracleReport report{"variance-relation", {}};
  report.checks.push_back({"bootstrap variance", v.lhs, 0.8 * v.rhs, 1.2 * v.rhs});
  return report;
}

}  // namespace cgan
