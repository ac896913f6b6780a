#include <doctest.h>

#include <cmath>
#include <complex>

#include "patrec/fft.hpp"
#include "patrec/field.hpp"
#include "patrec/rng.hpp"

using namespace patrec;

namespace {

ScalarField random_field(std::vector<std::size_t> dims, std::uint64_t seed) {
  ScalarField f(std::move(dims), 1e-4);
  SeededRng rng(seed);
  f.data = rng.gaussians(f.size());
  return f;
}

}  // namespace

TEST_CASE("fft: delta image has flat magnitude spectrum") {
  ScalarField f({8, 8}, 1.0);
  f.data[0] = 1.0;
  Spectrum s = fft_forward(f);
  for (const auto& c : s.coeff) CHECK(std::abs(c) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fft: roundtrip identity on random fields") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    ScalarField f = random_field({16, 16}, seed);
    ScalarField back = fft_inverse(fft_forward(f));
    double max_err = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      max_err = std::max(max_err, std::abs(back.data[i] - f.data[i]));
    CHECK(max_err <= 1e-10);
  }
}

TEST_CASE("fft: roundtrip identity up to 64x64, relative") {
  for (std::size_t n : {32ull, 64ull}) {
    ScalarField f = random_field({n, n}, n);
    ScalarField back = fft_inverse(fft_forward(f));
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      num += (back.data[i] - f.data[i]) * (back.data[i] - f.data[i]);
      den += f.data[i] * f.data[i];
    }
    CHECK(std::sqrt(num / den) <= 1e-10);
  }
}

TEST_CASE("fft: Parseval under the unnormalized-forward convention") {
  // ||f||^2 == (1/N) sum |F_k|^2, checked by direct summation.
  ScalarField f = random_field({8, 8}, 99);
  Spectrum s = fft_forward(f);
  double lhs = 0.0;
  for (double v : f.data) lhs += v * v;
  double rhs = 0.0;
  for (const auto& c : s.coeff) rhs += std::norm(c);
  rhs /= double(f.size());
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("fft: linearity") {
  ScalarField f = random_field({12, 20}, 5);
  ScalarField g = random_field({12, 20}, 6);
  const double a = 1.7, b = -0.3;
  ScalarField combo({12, 20}, 1e-4);
  for (std::size_t i = 0; i < combo.size(); ++i)
    combo.data[i] = a * f.data[i] + b * g.data[i];

  Spectrum sf = fft_forward(f), sg = fft_forward(g), sc = fft_forward(combo);
  double max_err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < sc.coeff.size(); ++i) {
    max_err = std::max(max_err, std::abs(sc.coeff[i] - (a * sf.coeff[i] + b * sg.coeff[i])));
    scale = std::max(scale, std::abs(sc.coeff[i]));
  }
  CHECK(max_err / scale <= 1e-10);
}

TEST_CASE("fft: non-finite input rejected") {
  ScalarField f({4, 4}, 1.0);
  f.data[3] = std::nan("");
  CHECK_THROWS(fft_forward(f));
}

TEST_CASE("fft: 3D roundtrip") {
  ScalarField f = random_field({8, 6, 10}, 17);
  ScalarField back = fft_inverse(fft_forward(f));
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(f.data[i]).epsilon(1e-10));
}

TEST_CASE("rng: zero draws give an empty list") {
  SeededRng rng(1);
  CHECK(rng.gaussians(0).empty());
}

TEST_CASE("rng: identical seeds give identical streams") {
  SeededRng a(12345), b(12345);
  auto va = a.gaussians(1000);
  auto vb = b.gaussians(1000);
  CHECK(va == vb);
}

TEST_CASE("rng: different seeds differ") {
  SeededRng a(1), b(2);
  CHECK(a.gaussians(16) != b.gaussians(16));
}

TEST_CASE("rng: gaussian sample statistics") {
  SeededRng rng(777);
  auto v = rng.gaussians(100000);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= double(v.size());
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("field: validation catches inconsistent shapes") {
  ScalarField f({4, 4}, 1.0);
  f.data.pop_back();
  CHECK_THROWS(validate(f));
  ScalarField g({4, 4}, -1.0);
  CHECK_THROWS(validate(g));
}
