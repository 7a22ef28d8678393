#include <doctest.h>

#include <cmath>

#include "cgan/nets.hpp"

using namespace cgan;

namespace {

MlpConfig disc_config(std::size_t d, std::uint64_t seed, bool zero_final = false) {
  return MlpConfig{{d, 64, 64, 1}, seed, zero_final};
}

Tensor randn(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  return normal_matrix(rng, r, c);
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_THROWS((MlpConfig{{3, 1}, 0}.validate()));
  CHECK_THROWS((MlpConfig{{3, 0, 1}, 0}.validate()));
  CHECK_NOTHROW((MlpConfig{{3, 4, 1}, 0}.validate()));
}

TEST_CASE("init_params layout and determinism") {
  const MlpConfig cfg{{16, 64, 64, 3}, 5};
  const auto a = init_params(cfg, 5);
  const auto b = init_params(cfg, 5);
  const auto c = init_params(cfg, 6);
  REQUIRE(a.size() == 6);
  CHECK(a[0].shape() == Shape{16, 64});
  CHECK(a[1].shape() == Shape{1, 64});
  CHECK(a[5].shape() == Shape{1, 3});
  CHECK(a == b);
  CHECK(a[0] != c[0]);
  for (double v : a[1].values()) CHECK(v == 0.0);
}

TEST_CASE("init scale of a 64x64 layer is sqrt(2/128) within 20%") {
  const double target = std::sqrt(2.0 / 128.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto params = init_params(MlpConfig{{64, 64, 64, 1}, seed}, seed);
    const Tensor& w = params[2];
    double ss = 0.0;
    for (double v : w.values()) ss += v * v;
    const double sd = std::sqrt(ss / static_cast<double>(w.size()));
    CHECK(std::abs(sd - target) < 0.2 * target);
  }
}

TEST_CASE("generator forward") {
  const Generator gen(MlpConfig{{16, 64, 64, 10}, 3});
  Rng rng(1);
  const Tensor z = normal_matrix(rng, 256, 16);
  const Tensor x = gen.forward(z);
  CHECK(x.shape() == Shape{256, 10});
  CHECK(gen.forward(z) == x);
  CHECK_THROWS_AS((void)gen.forward(Tensor::zeros(4, 15)), ShapeError);

  const Generator zero(MlpConfig{{16, 64, 64, 10}, 3, true});
  const Tensor out = zero.forward(z);
  for (double v : out.values()) CHECK(v == 0.0);

  // Tape and tape-free paths agree bit for bit.
  Tape tape;
  const auto params = gen.net().bind(tape);
  CHECK(tape.value(gen.forward(tape, tape.constant(z), params)) == x);
}

TEST_CASE("discriminator raw output and shift") {
  const Discriminator zero(disc_config(3, 1, true));
  const Tensor zero_out = zero.raw(randn(10, 3, 2));
  for (double v : zero_out.values()) CHECK(v == 0.0);

  Discriminator disc(disc_config(3, 4));
  const Tensor x = randn(20, 3, 5);
  const Tensor before = disc.raw(x);

  SUBCASE("zero shift changes nothing") {
    disc.set_recenter_shift(std::vector<double>{0.0, 0.0, 0.0});
    CHECK(disc.raw(x) == before);
  }
  SUBCASE("shift by the batch mean equals evaluating the centered batch") {
    std::vector<double> mean(3, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < 3; ++c) mean[c] += x(r, c) / static_cast<double>(x.rows());
    }
    Tensor centered = x;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < 3; ++c) centered(r, c) -= mean[c];
    }
    const Tensor expected = disc.raw(centered);
    const double at_origin = disc.raw(Tensor::zeros(1, 3)).item();

    disc.set_recenter_shift(mean);
    const Tensor shifted = disc.raw(x);
    for (std::size_t r = 0; r < x.rows(); ++r) CHECK(shifted(r, 0) == doctest::Approx(expected(r, 0)).epsilon(1e-14));
    CHECK(disc.raw(Tensor::row(mean)).item() == doctest::Approx(at_origin).epsilon(1e-14));

    // Real and generated rows go through the same subtraction on the tape.
    Tape tape;
    const auto params = disc.net().bind(tape);
    CHECK(tape.value(disc.raw(tape, tape.constant(x), params)) == shifted);
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(disc.set_recenter_shift(std::vector<double>{1.0}), ShapeError);
    CHECK_THROWS_AS((void)disc.raw(Tensor::zeros(2, 4)), ShapeError);
  }
}

TEST_CASE("discriminator mean output gradient passes grad_check") {
  Discriminator disc(MlpConfig{{3, 8, 8, 1}, 11});
  disc.set_recenter_shift(std::vector<double>{0.3, -0.2, 0.1});
  const Tensor x = randn(16, 3, 12);
  const TapeProgram program = [&](Tape& t, std::span<const Var> p) {
    return t.mean(disc.raw(t, t.constant(x), p));
  };
  CHECK(grad_check(program, disc.net().params(), 1e-5) < 1e-6);
}

TEST_CASE("gf transform") {
  CHECK(gf_transform(0.0) == doctest::Approx(-2.0 + std::log(2.0)).epsilon(1e-15));
  CHECK(gf_transform(0.0) == doctest::Approx(-1.306853).epsilon(1e-6));
  CHECK(std::abs(gf_transform(-40.0) + 2.0) < 1e-12);
  CHECK(std::abs(gf_transform(40.0) - 38.0) < 1e-12);

  // Strictly above -2 and strictly increasing over a grid.
  double previous = -3.0;
  for (double v = -30.0; v <= 30.0; v += 0.25) {
    const double t = gf_transform(v);
    CHECK(t > -2.0);
    CHECK(t > previous);
    CHECK(t / 2.0 + 1.0 == doctest::Approx(softplus(v) / 2.0).epsilon(1e-12));
    previous = t;
  }

  Tape tape;
  Var v = tape.constant(Tensor(2, 1, {0.0, 40.0}));
  const Tensor& t = tape.value(gf_transform(tape, v));
  CHECK(t(0, 0) == gf_transform(0.0));
  CHECK(t(1, 0) == gf_transform(40.0));
}

TEST_CASE("standardization stats apply") {
  const StandardizationStats stats{{1.0, -2.0}, {2.0, 0.5}};
  const Tensor out = stats.apply(Tensor(1, 2, {3.0, -1.0}));
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == 2.0);
  CHECK_THROWS_AS((void)stats.apply(Tensor::zeros(1, 3)), ShapeError);
}
