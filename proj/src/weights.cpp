#include "cgan/weights.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace cgan {

std::vector<double> raw_ratios(const Discriminator& disc, const Tensor& standardized) {
  const Tensor v = disc.raw(standardized);
  std::vector<double> out;
  out.reserve(v.size());
  for (double x : v.values()) out.push_back(0.5 * softplus(x));
  return out;
}

std::vector<double> raw_ratios(const TrainedModel& model, std::size_t arm, const StudyArm& data) {
  if (arm >= model.arm_count()) {
    throw DataError("arm index " + std::to_string(arm) + " out of range for a model with " +
                    std::to_string(model.arm_count()) + " arms");
  }
  if (data.dim() != model.dim()) {
    throw DataError("cohort has " + std::to_string(data.dim()) + " features, model expects " +
                    std::to_string(model.dim()));
  }
  return raw_ratios(model.discriminators[arm], model.stats.apply(data.features));
}

WeightVector normalize(std::span<const double> ratios, std::size_t arm) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw NumericalError("normalize: ratios must be finite and nonnegative");
    total += r;
  }
  if (!(total > 0.0)) throw NumericalError("degenerate weights: no overlap detected");
  WeightVector w;
  w.arm = arm;
  w.raw.assign(ratios.begin(), ratios.end());
  w.weights.reserve(ratios.size());
  for (double r : ratios) w.weights.push_back(r / total);
  return w;
}

WeightVector extract_weights(const TrainedModel& model, std::size_t arm, const StudyArm& data) {
  return normalize(raw_ratios(model, arm, data), arm);
}

Resampled sir_resample(const StudyArm& arm, const WeightVector& w, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw Error("sir_resample: need at least one draw");
  if (w.size() != arm.size()) throw DataError("sir_resample: weight count does not match arm rows");
  double total = 0.0;
  for (double x : w.weights) total += x;
  if (!(total > 0.0)) throw NumericalError("degenerate weights: no overlap detected");

  Rng rng(seed);
  std::discrete_distribution<std::size_t> pick(w.weights.begin(), w.weights.end());
  Resampled out;
  out.rows = Tensor::zeros(m, arm.dim());
  out.source.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t k = pick(rng);
    out.source.push_back(k);
    for (std::size_t c = 0; c < arm.dim(); ++c) out.rows(i, c) = arm.features(k, c);
  }
  return out;
}

void write_weights_csv(const std::filesystem::path& path, const StudyArm& arm, const WeightVector& w,
                       const std::optional<std::string>& method) {
  if (w.size() != arm.size() || w.raw.size() != w.size()) {
    throw DataError("write_weights_csv: weight count does not match arm rows");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write weights file " + path.string());
  out << "unit_id,arm,raw_ratio,weight" << (method ? ",method" : "") << '\n';
  for (std::size_t n = 0; n < w.size(); ++n) {
    out << (arm.unit_ids.empty() ? std::to_string(n) : arm.unit_ids[n]) << ',' << w.arm << ','
        << format_double(w.raw[n]) << ',' << format_double(w.weights[n]);
    if (method) out << ',' << *method;
    out << '\n';
  }
  if (!out) throw DataError("failed writing weights file " + path.string());
}

WeightsTable read_weights_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open weights file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty weights file");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "unit_id" || header[1] != "arm" || header[2] != "raw_ratio" ||
      header[3] != "weight") {
    throw DataError(path.string() + ": expected header unit_id,arm,raw_ratio,weight[,method]");
  }
  const bool has_method = header.size() > 4 && header[4] == "method";

  WeightsTable table;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw DataError(path.string() + ": malformed row " + std::to_string(row));
    const auto arm = parse_double(cells[1]);
    const auto raw = parse_double(cells[2]);
    const auto weight = parse_double(cells[3]);
    if (!arm || !raw || !weight) {
      throw DataError(path.string() + ": non-numeric value at row " + std::to_string(row));
    }
    table.unit_ids.push_back(cells[0]);
    table.arm = static_cast<std::size_t>(*arm);
    table.weights.raw.push_back(*raw);
    table.weights.weights.push_back(*weight);
    if (has_method) table.method = cells[4];
  }
  if (table.unit_ids.empty()) throw DataError(path.string() + ": weights file has no rows");
  table.weights.arm = table.arm;
  return table;
}

}  // namespace cgan
