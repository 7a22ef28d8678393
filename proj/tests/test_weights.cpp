#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cgan/weights.hpp"

using namespace cgan;

namespace {

StudyArm tiny_arm(std::size_t n, std::size_t d) {
  StudyArm arm;
  arm.id = "1";
  arm.features = Tensor::zeros(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) arm.features(r, c) = static_cast<double>(r * d + c);
    arm.unit_ids.push_back("u" + std::to_string(r));
  }
  arm.feature_names = default_feature_names(d);
  return arm;
}

TrainedModel zero_model(std::size_t d, std::size_t arms) {
  TrainedModel m;
  m.generator = Generator(MlpConfig{{4, 8, 8, d}, 0});
  for (std::size_t a = 0; a < arms; ++a) m.discriminators.emplace_back(MlpConfig{{d, 8, 8, 1}, a, true});
  m.stats.mean.assign(d, 0.0);
  m.stats.stddev.assign(d, 1.0);
  m.feature_names = default_feature_names(d);
  return m;
}

}  // namespace

TEST_CASE("zero critic gives ratio ln2 / 2 everywhere") {
  const TrainedModel m = zero_model(3, 2);
  const StudyArm arm = tiny_arm(5, 3);
  const auto r = raw_ratios(m, 1, arm);
  REQUIRE(r.size() == 5);
  for (double x : r) CHECK(x == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-15));
  CHECK(r[0] == doctest::Approx(0.34657).epsilon(1e-5));

  const WeightVector w = extract_weights(m, 0, arm);
  for (double x : w.weights) CHECK(x == doctest::Approx(0.2).epsilon(1e-15));

  CHECK_THROWS_AS((void)raw_ratios(m, 2, arm), DataError);
  CHECK_THROWS_AS((void)raw_ratios(m, 0, tiny_arm(5, 4)), DataError);
}

TEST_CASE("ratios stay nonnegative for extreme critic outputs") {
  Discriminator disc(MlpConfig{{1, 4, 4, 1}, 3});
  Tensor x(4, 1, {-1e3, -10.0, 10.0, 1e3});
  for (double r : raw_ratios(disc, x)) {
    CHECK(r >= 0.0);
    CHECK(std::isfinite(r));
  }
}

TEST_CASE("normalization") {
  const std::vector<double> raw{1.0, 0.0, 3.0};
  const WeightVector w = normalize(raw, 1);
  CHECK(w.arm == 1);
  CHECK(w.weights == std::vector<double>{0.25, 0.0, 0.75});
  CHECK(w.raw == raw);

  Rng rng(2);
  std::vector<double> many(1000);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (double& v : many) v = u(rng);
  double sum = 0.0;
  for (double v : normalize(many).weights) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);

  CHECK_THROWS_WITH_AS((void)normalize(std::vector<double>{0.0, 0.0}), "degenerate weights: no overlap detected",
                       NumericalError);
  CHECK_THROWS_AS((void)normalize(std::vector<double>{1.0, -1.0}), NumericalError);
}

TEST_CASE("sampling-importance-resampling") {
  const StudyArm arm = tiny_arm(4, 2);
  SUBCASE("point mass always returns the same row") {
    const WeightVector w = normalize(std::vector<double>{0.0, 0.0, 1.0, 0.0});
    const Resampled s = sir_resample(arm, w, 100, 1);
    CHECK(s.rows.shape() == Shape{100, 2});
    for (std::size_t i = 0; i < 100; ++i) {
      CHECK(s.source[i] == 2);
      CHECK(s.rows(i, 0) == arm.features(2, 0));
      CHECK(s.rows(i, 1) == arm.features(2, 1));
    }
  }
  SUBCASE("frequencies track the weights") {
    const WeightVector w = normalize(std::vector<double>{1.0, 2.0, 3.0, 4.0});
    const std::size_t m = 20000;
    const Resampled s = sir_resample(arm, w, m, 2);
    std::vector<double> counts(4, 0.0);
    for (std::size_t k : s.source) counts[k] += 1.0;
    for (std::size_t k = 0; k < 4; ++k) {
      const double p = w.weights[k];
      const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(m));
      CHECK(std::abs(counts[k] / static_cast<double>(m) - p) < 4.0 * se);
    }
    const Resampled again = sir_resample(arm, w, m, 2);
    CHECK(again.source == s.source);
  }
  SUBCASE("size mismatch") {
    CHECK_THROWS_AS((void)sir_resample(arm, normalize(std::vector<double>{1.0}), 5, 0), DataError);
  }
}

TEST_CASE("weights CSV round trip") {
  const StudyArm arm = tiny_arm(3, 1);
  const WeightVector w = normalize(std::vector<double>{0.1, 0.7, 1.0 / 3.0}, 1);
  const auto path = std::filesystem::temp_directory_path() / "cgan_test_weights.csv";
  write_weights_csv(path, arm, w, std::string("cgan"));
  const WeightsTable t = read_weights_csv(path);
  CHECK(t.unit_ids == arm.unit_ids);
  CHECK(t.arm == 1);
  CHECK(t.method == std::optional<std::string>("cgan"));
  CHECK(t.weights.raw == w.raw);
  CHECK(t.weights.weights == w.weights);
  std::filesystem::remove(path);
}
