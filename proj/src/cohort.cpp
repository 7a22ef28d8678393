#include "cgan/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cgan {

void StudyArm::validate() const {
  const std::size_t n = size();
  if (!unit_ids.empty() && unit_ids.size() != n) throw DataError("arm " + id + ": unit_id count does not match rows");
  if (!feature_names.empty() && feature_names.size() != dim()) {
    throw DataError("arm " + id + ": feature name count does not match columns");
  }
  if (outcomes && outcomes->size() != n) throw DataError("arm " + id + ": outcome count does not match rows");
  if (labels && labels->size() != n) throw DataError("arm " + id + ": label count does not match rows");
}

std::vector<std::string> default_feature_names(std::size_t d) {
  std::vector<std::string> names;
  names.reserve(d);
  for (std::size_t j = 0; j < d; ++j) names.push_back("f_" + std::to_string(j));
  return names;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view cell) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

StudyArm read_cohort_csv(const std::filesystem::path& path, std::string arm_id) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cohort file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty cohort file");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.empty() || header.front() != "unit_id") throw DataError(path.string() + ": first column must be unit_id");

  std::optional<std::size_t> label_col;
  std::optional<std::size_t> outcome_col;
  std::vector<std::size_t> feature_cols;
  StudyArm arm;
  arm.id = std::move(arm_id);
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (header[c] == "subpop_label") {
      label_col = c;
    } else if (header[c] == "outcome") {
      outcome_col = c;
    } else {
      feature_cols.push_back(c);
      arm.feature_names.push_back(header[c]);
    }
  }
  if (feature_cols.empty()) throw DataError(path.string() + ": no feature columns");

  std::vector<double> values;
  std::vector<double> outcomes;
  std::vector<std::string> labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(header.size()));
    }
    arm.unit_ids.push_back(cells[0]);
    for (std::size_t c : feature_cols) {
      const auto v = parse_double(cells[c]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(path.string() + ": non-numeric feature value '" + cells[c] + "' at row " +
                        std::to_string(row) + ", column " + header[c]);
      }
      values.push_back(*v);
    }
    if (label_col) labels.push_back(cells[*label_col]);
    if (outcome_col) {
      const auto v = parse_double(cells[*outcome_col]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(path.string() + ": non-numeric outcome '" + cells[*outcome_col] + "' at row " +
                        std::to_string(row));
      }
      outcomes.push_back(*v);
    }
  }
  if (arm.unit_ids.empty()) throw DataError(path.string() + ": cohort has no rows");

  arm.features = Tensor(arm.unit_ids.size(), feature_cols.size(), std::move(values));
  if (outcome_col) arm.outcomes = std::move(outcomes);
  if (label_col) arm.labels = std::move(labels);
  return arm;
}

void write_cohort_csv(const std::filesystem::path& path, const StudyArm& arm) {
  arm.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write cohort file " + path.string());

  const std::vector<std::string> names =
      arm.feature_names.empty() ? default_feature_names(arm.dim()) : arm.feature_names;
  out << "unit_id";
  for (const std::string& n : names) out << ',' << n;
  if (arm.labels) out << ",subpop_label";
  if (arm.outcomes) out << ",outcome";
  out << '\n';

  for (std::size_t r = 0; r < arm.size(); ++r) {
    out << (arm.unit_ids.empty() ? std::to_string(r) : arm.unit_ids[r]);
    for (std::size_t c = 0; c < arm.dim(); ++c) out << ',' << format_double(arm.features(r, c));
    if (arm.labels) out << ',' << (*arm.labels)[r];
    if (arm.outcomes) out << ',' << format_double((*arm.outcomes)[r]);
    out << '\n';
  }
  if (!out) throw DataError("failed writing cohort file " + path.string());
}

}  // namespace cgan
