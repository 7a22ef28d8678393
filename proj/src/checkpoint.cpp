#include "cgan/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace cgan {

namespace {

constexpr const char* kMagic = "CGAN1";

void write_values(std::ostream& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? " " : "") << format_double(values[i]);
  out << '\n';
}

void write_mlp(std::ostream& out, const Mlp& net) {
  out << "widths";
  for (std::size_t w : net.widths()) out << ' ' << w;
  out << '\n';
  for (const Tensor& p : net.params()) {
    out << "param " << p.rows() << ' ' << p.cols() << '\n';
    write_values(out, p.values());
  }
}

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  std::istringstream line(const std::string& keyword) {
    std::string text;
    if (!std::getline(in_, text)) fail("unexpected end of file, expected '" + keyword + "'");
    ++line_no_;
    std::istringstream ss(text);
    std::string head;
    ss >> head;
    if (head != keyword) fail("expected '" + keyword + "', found '" + head + "'");
    return ss;
  }

  std::vector<double> values(std::size_t count) {
    std::string text;
    if (!std::getline(in_, text)) fail("unexpected end of file in a value row");
    ++line_no_;
    std::istringstream ss(text);
    std::vector<double> out;
    out.reserve(count);
    std::string token;
    while (ss >> token) {
      const auto v = parse_double(token);
      if (!v) fail("bad number '" + token + "'");
      out.push_back(*v);
    }
    if (out.size() != count) {
      fail("expected " + std::to_string(count) + " values, found " + std::to_string(out.size()));
    }
    return out;
  }

  std::size_t count(std::istringstream& ss, const std::string& what) {
    long long n = -1;
    if (!(ss >> n) || n < 0) fail("bad " + what);
    return static_cast<std::size_t>(n);
  }

  Mlp mlp() {
    auto ss = line("widths");
    std::vector<std::size_t> widths;
    long long w = 0;
    while (ss >> w) {
      if (w <= 0) fail("layer widths must be positive");
      widths.push_back(static_cast<std::size_t>(w));
    }
    if (widths.size() < 2) fail("a network needs at least two widths");
    std::vector<Tensor> params;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      for (int k = 0; k < 2; ++k) {
        auto ps = line("param");
        const std::size_t rows = count(ps, "parameter rows");
        const std::size_t cols = count(ps, "parameter cols");
        params.emplace_back(rows, cols, values(rows * cols));
      }
    }
    try {
      return Mlp(std::move(widths), std::move(params));
    } catch (const ShapeError& e) {
      fail(e.what());
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError(source_ + ": checkpoint line " + std::to_string(line_no_) + ": " + msg);
  }

  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << kMagic << '\n';
  out << "features " << model.feature_names.size() << '\n';
  for (const std::string& name : model.feature_names) out << name << '\n';
  out << "mean\n";
  write_values(out, model.stats.mean);
  out << "stddev\n";
  write_values(out, model.stats.stddev);
  out << "generator\n";
  write_mlp(out, model.generator.net());
  out << "discriminators " << model.discriminators.size() << '\n';
  for (const Discriminator& disc : model.discriminators) {
    out << "shift\n";
    write_values(out, disc.shift());
    write_mlp(out, disc.net());
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string magic;
  if (!std::getline(in, magic) || magic != kMagic) {
    throw DataError(path.string() + ": not a checkpoint (missing " + kMagic + " header)");
  }
  Reader r(in, path.string());
  r.line_no_ = 1;

  TrainedModel model;
  auto fs = r.line("features");
  const std::size_t d = r.count(fs, "feature count");
  for (std::size_t j = 0; j < d; ++j) {
    std::string name;
    if (!std::getline(in, name)) r.fail("missing feature names");
    ++r.line_no_;
    model.feature_names.push_back(name);
  }
  (void)r.line("mean");
  model.stats.mean = r.values(d);
  (void)r.line("stddev");
  model.stats.stddev = r.values(d);

  (void)r.line("generator");
  model.generator = Generator(r.mlp());
  if (model.generator.output_dim() != d) r.fail("generator output does not match the feature count");

  auto ds = r.line("discriminators");
  const std::size_t arms = r.count(ds, "discriminator count");
  for (std::size_t a = 0; a < arms; ++a) {
    (void)r.line("shift");
    std::vector<double> shift = r.values(d);
    Mlp net = r.mlp();
    if (net.input_dim() != d || net.output_dim() != 1) r.fail("discriminator shape does not match the features");
    model.discriminators.emplace_back(std::move(net), std::move(shift));
  }
  return model;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write trace " + path.string());
  const std::size_t arms = trace.empty() ? 0 : trace.front().arm_objective.size();
  out << "iteration";
  for (std::size_t a = 0; a < arms; ++a) out << ",F_" << a;
  out << ",F_total,lr_generator,lr_discriminator\n";
  for (const TraceRow& row : trace) {
    out << row.iteration;
    for (double f : row.arm_objective) out << ',' << format_double(f);
    out << ',' << format_double(row.total) << ',' << format_double(row.lr_generator) << ','
        << format_double(row.lr_discriminator) << '\n';
  }
}

}  // namespace cgan
