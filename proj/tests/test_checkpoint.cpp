#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "cgan/checkpoint.hpp"
#include "cgan/weights.hpp"

using namespace cgan;
namespace fs = std::filesystem;

namespace {

StudyArm gaussian_arm(std::string id, std::size_t n, double shift, std::uint64_t seed) {
  Rng rng(seed);
  StudyArm arm;
  arm.id = std::move(id);
  arm.features = normal_matrix(rng, n, 3);
  for (double& v : arm.features.values()) v += shift;
  for (std::size_t i = 0; i < n; ++i) arm.unit_ids.push_back(arm.id + "_" + std::to_string(i));
  arm.feature_names = {"age", "dose", "bmi"};
  return arm;
}

TrainedModel small_model() {
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.hidden = {8, 8};
  cfg.noise_dim = 4;
  cfg.max_iterations = 25;
  cfg.recenter_period = 10;
  cfg.convergence_window = 10;
  cfg.seed = 11;
  const std::vector<StudyArm> arms{gaussian_arm("1", 60, 0.0, 1), gaussian_arm("2", 50, 0.7, 2)};
  return train(arms, cfg);
}

bool same_mlp(const Mlp& a, const Mlp& b) {
  if (a.widths() != b.widths() || a.params().size() != b.params().size()) return false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    if (a.params()[i].shape() != b.params()[i].shape()) return false;
    if (!std::ranges::equal(a.params()[i].values(), b.params()[i].values())) return false;
  }
  return true;
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("cgan_ckpt_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-exact") {
  TempDir dir;
  const TrainedModel model = small_model();
  save_checkpoint(dir.path / "m.cgan", model);
  const TrainedModel back = load_checkpoint(dir.path / "m.cgan");

  CHECK(back.feature_names == model.feature_names);
  CHECK(back.stats.mean == model.stats.mean);
  CHECK(back.stats.stddev == model.stats.stddev);
  CHECK(same_mlp(back.generator.net(), model.generator.net()));
  REQUIRE(back.arm_count() == 2);
  for (std::size_t a = 0; a < 2; ++a) {
    CHECK(same_mlp(back.discriminators[a].net(), model.discriminators[a].net()));
    CHECK(back.discriminators[a].shift() == model.discriminators[a].shift());
  }

  const StudyArm arm = gaussian_arm("1", 60, 0.0, 1);
  CHECK(extract_weights(back, 0, arm).weights == extract_weights(model, 0, arm).weights);

  save_checkpoint(dir.path / "again.cgan", back);
  CHECK(slurp(dir.path / "again.cgan") == slurp(dir.path / "m.cgan"));
}

TEST_CASE("corrupt checkpoints are data errors") {
  TempDir dir;
  const fs::path good = dir.path / "m.cgan";
  save_checkpoint(good, small_model());
  const std::string text = slurp(good);

  const auto write = [&](const std::string& body) {
    std::ofstream(dir.path / "bad.cgan") << body;
    return dir.path / "bad.cgan";
  };
  CHECK_THROWS_AS((void)load_checkpoint(dir.path / "missing.cgan"), DataError);
  CHECK_THROWS_AS((void)load_checkpoint(write("")), DataError);
  CHECK_THROWS_AS((void)load_checkpoint(write("CGAN0\n")), DataError);
  CHECK_THROWS_AS((void)load_checkpoint(write(text.substr(0, text.size() / 2))), DataError);

  std::string garbled = text;
  garbled.replace(garbled.find("mean\n") + 5, 1, "x");
  CHECK_THROWS_AS((void)load_checkpoint(write(garbled)), DataError);
}

TEST_CASE("trace csv") {
  TempDir dir;
  const TrainedModel model = small_model();
  write_trace_csv(dir.path / "trace.csv", model.trace);
  std::ifstream in(dir.path / "trace.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,F_0,F_1,F_total,lr_generator,lr_discriminator");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == model.trace.size());
}
