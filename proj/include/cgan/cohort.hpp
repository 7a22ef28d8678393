#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cgan/ndcore.hpp"

namespace cgan {

/// Units of one treatment group: features, optional outcomes and subpopulation labels.
struct StudyArm {
  std::string id;
  std::vector<std::string> unit_ids;
  std::vector<std::string> feature_names;
  Tensor features;
  std::optional<std::vector<double>> outcomes;
  std::optional<std::vector<std::string>> labels;

  [[nodiscard]] std::size_t size() const { return features.rows(); }
  [[nodiscard]] std::size_t dim() const { return features.cols(); }

  /// Throws DataError if the per-unit fields disagree in length.
  void validate() const;
};

/// Default feature column names f_0 .. f_{d-1}.
std::vector<std::string> default_feature_names(std::size_t d);

/// Cohort CSV: unit_id, feature columns..., optional subpop_label, optional outcome.
///
/// Every column other than unit_id, subpop_label and outcome is a feature.
StudyArm read_cohort_csv(const std::filesystem::path& path, std::string arm_id);
void write_cohort_csv(const std::filesystem::path& path, const StudyArm& arm);

/// Shortest round-trip decimal representation.
std::string format_double(double v);
/// Parses a whole cell as a double; std::nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view cell);

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace cgan
