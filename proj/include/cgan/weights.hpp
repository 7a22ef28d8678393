#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgan/cohort.hpp"
#include "cgan/trainer.hpp"

namespace cgan {

/// Per-unit importance weights for one arm.
struct WeightVector {
  std::size_t arm = 0;
  /// Unnormalized likelihood-ratio estimates p(x)/q_a(x).
  std::vector<double> raw;
  /// raw / sum(raw).
  std::vector<double> weights;

  [[nodiscard]] std::size_t size() const { return weights.size(); }
};

/// softplus(v) / 2 == g_f(v) / 2 + 1 for already-standardized rows.
std::vector<double> raw_ratios(const Discriminator& disc, const Tensor& standardized);
/// Standardizes the arm with the model's stats, then evaluates critic `arm`.
std::vector<double> raw_ratios(const TrainedModel& model, std::size_t arm, const StudyArm& data);

/// Self-normalizes. Throws NumericalError if no ratio is positive.
WeightVector normalize(std::span<const double> ratios, std::size_t arm = 0);

/// raw_ratios followed by normalize.
WeightVector extract_weights(const TrainedModel& model, std::size_t arm, const StudyArm& data);

struct Resampled {
  Tensor rows;
  std::vector<std::size_t> source;
};

/// Multinomial sampling-importance-resampling: m draws with replacement.
Resampled sir_resample(const StudyArm& arm, const WeightVector& w, std::size_t m, std::uint64_t seed);

/// Weights CSV: unit_id, arm, raw_ratio, weight[, method].
void write_weights_csv(const std::filesystem::path& path, const StudyArm& arm, const WeightVector& w,
                       const std::optional<std::string>& method = std::nullopt);

struct WeightsTable {
  std::vector<std::string> unit_ids;
  std::size_t arm = 0;
  std::optional<std::string> method;
  WeightVector weights;
};
WeightsTable read_weights_csv(const std::filesystem::path& path);

}  // namespace cgan
