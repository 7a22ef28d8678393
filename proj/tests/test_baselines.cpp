#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cgan/baselines.hpp"
#include "cgan/estimators.hpp"

using namespace cgan;

TEST_CASE("no signal gives flat scores") {
  Rng rng(1);
  const Tensor x = normal_matrix(rng, 4000, 3);
  std::vector<int> t(4000, 0);
  std::fill(t.begin(), t.begin() + 1000, 1);
  std::shuffle(t.begin(), t.end(), rng);
  const PropensityModel m = fit_logistic_propensity(x, t);
  CHECK(m.converged);
  CHECK_FALSE(m.separation_warning);
  for (double c : m.coef) CHECK(std::abs(c) < 0.15);
  for (double s : m.scores(x)) CHECK(std::abs(s - 0.25) < 0.06);
}

TEST_CASE("separated data raises the warning") {
  const Tensor x(6, 1, {-3.0, -2.0, -1.0, 1.0, 2.0, 3.0});
  const std::vector<int> t{0, 0, 0, 1, 1, 1};
  const PropensityModel m = fit_logistic_propensity(x, t);
  CHECK(m.separation_warning);
  const auto s = m.scores(x);
  CHECK(s.size() == 6);
  CHECK(s[5] > s[0]);
}

TEST_CASE("known coefficients are recovered") {
  const std::vector<double> beta{1.0, -0.5, 0.25};
  const double intercept = -0.3;
  Rng rng(2);
  const std::size_t n = 50000;
  const Tensor x = normal_matrix(rng, n, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<int> t(n);
  for (std::size_t r = 0; r < n; ++r) {
    double eta = intercept;
    for (std::size_t c = 0; c < 3; ++c) eta += beta[c] * x(r, c);
    t[r] = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
  }
  const PropensityModel m = fit_logistic_propensity(x, t);
  CHECK(m.converged);
  for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(m.coef[c] - beta[c]) < 0.05 * std::abs(beta[c]));
}

TEST_CASE("fit preconditions") {
  const Tensor x(3, 1, {0.0, 1.0, 2.0});
  CHECK_THROWS_AS((void)fit_logistic_propensity(x, std::vector<int>{1, 1, 1}), DataError);
  CHECK_THROWS_AS((void)fit_logistic_propensity(x, std::vector<int>{1, 0}), DataError);
}

TEST_CASE("inverse probability weights") {
  const std::vector<int> t{1, 1, 0, 0, 0};
  SUBCASE("constant score gives uniform weights") {
    const auto [w1, w0] = ipw_weights(std::vector<double>(5, 0.5), t);
    CHECK(w1.arm == 0);
    CHECK(w0.arm == 1);
    for (double w : w1.weights) CHECK(w == doctest::Approx(0.5));
    for (double w : w0.weights) CHECK(w == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("a control with score near one dominates") {
    const auto [w1, w0] = ipw_weights(std::vector<double>{0.5, 0.5, 0.5, 0.5, 1.0 - 1e-9}, t);
    CHECK(w0.weights[2] > 0.99);
    CHECK(kish_ess(w0) < 1.01);
    for (double w : w0.weights) CHECK(std::isfinite(w));
  }
  SUBCASE("clamping keeps extreme scores finite") {
    const auto [w1, w0] = ipw_weights(std::vector<double>{0.0, 0.3, 1.0, 0.2, 0.4}, t);
    const double s1 = std::accumulate(w1.weights.begin(), w1.weights.end(), 0.0);
    const double s0 = std::accumulate(w0.weights.begin(), w0.weights.end(), 0.0);
    CHECK(std::abs(s1 - 1.0) < 1e-12);
    CHECK(std::abs(s0 - 1.0) < 1e-12);
    for (double w : w1.weights) CHECK(w > 0.0);
  }
}

TEST_CASE("exchangeable arms: IPW effect matches the plain difference") {
  Rng rng(3);
  const std::size_t n = 4000;
  StudyArm treated;
  treated.features = normal_matrix(rng, n, 3);
  StudyArm control;
  control.features = normal_matrix(rng, n, 3);
  const PropensityModel m = fit_logistic_propensity(treated, control);
  std::vector<double> scores = m.scores(treated.features);
  const auto sc = m.scores(control.features);
  scores.insert(scores.end(), sc.begin(), sc.end());
  std::vector<int> t(n, 1);
  t.resize(2 * n, 0);
  const auto [w1, w0] = ipw_weights(scores, t);

  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> y1(n), y0(n);
  for (std::size_t i = 0; i < n; ++i) {
    y1[i] = 3.0 + treated.features(i, 0) + noise(rng);
    y0[i] = control.features(i, 0) + noise(rng);
  }
  const double plain = std::accumulate(y1.begin(), y1.end(), 0.0) / n - std::accumulate(y0.begin(), y0.end(), 0.0) / n;
  const double se = std::sqrt(2.0 * 2.0 / n);
  CHECK(std::abs(weighted_ate(y1, w1, y0, w0) - plain) < 3.0 * se);

  // Clipping the same scores cannot lower the effective sample size.
  const auto clipped = clip_percentile(scores);
  const auto [c1, c0] = ipw_weights(clipped, t);
  CHECK(kish_ess(c1) + kish_ess(c0) >= kish_ess(w1) + kish_ess(w0) - 1e-9);
}

TEST_CASE("percentiles and clipping") {
  std::vector<double> s(100);
  std::iota(s.begin(), s.end(), 1.0);
  CHECK(percentile(s, 10.0) == doctest::Approx(10.9).epsilon(1e-14));
  CHECK(percentile(s, 90.0) == doctest::Approx(90.1).epsilon(1e-14));
  CHECK(percentile(s, 0.0) == 1.0);
  CHECK(percentile(s, 100.0) == 100.0);
  CHECK(percentile(std::vector<double>{5.0}, 37.0) == 5.0);
  CHECK_THROWS((void)percentile(s, 101.0));

  const auto c = clip_percentile(s);
  CHECK(*std::min_element(c.begin(), c.end()) == doctest::Approx(10.9));
  CHECK(*std::max_element(c.begin(), c.end()) == doctest::Approx(90.1));
  CHECK(c[50] == 51.0);

  // Reapplying the same bounds is a fixed point.
  const ClipBounds bounds = percentile_bounds(s);
  CHECK(clip_to(c, bounds) == c);
  // Re-deriving percentiles from clipped scores tightens the bounds under interpolation.
  const auto twice = clip_percentile(c);
  CHECK(*std::min_element(twice.begin(), twice.end()) == doctest::Approx(10.99));

  const std::vector<double> flat(7, 0.3);
  CHECK(clip_percentile(flat) == flat);
  CHECK(clip_percentile(clip_percentile(flat)) == flat);
}
