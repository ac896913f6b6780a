#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "patrec/acoustic.hpp"
#include "patrec/phantom.hpp"

using namespace patrec;

namespace {

AcousticOperator make_op(std::size_t factor = 2) {
  AcousticGeometry g = make_desk_geometry({32, 32}, 1e-4, 1500.0, 24, 0.0, 2);
  SeededRng rng(77);
  if (factor > 1) g = with_subsampling(std::move(g), factor, rng);
  return AcousticOperator(std::move(g));
}

}  // namespace

TEST_CASE("tube phantom: deterministic per seed, normalized") {
  PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Tubes, 42);
  ScalarField a = tube_phantom(spec, {64, 64});
  ScalarField b = tube_phantom(spec, {64, 64});
  CHECK(a.data == b.data);
  CHECK(min_value(a) >= 0.0);
  CHECK(max_value(a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("tube phantom: nonzero fraction stays within the regression band") {
  // Band fixed from a 100-seed survey of the default spec at 64x64.
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Tubes, seed);
    ScalarField f = tube_phantom(spec, {64, 64});
    std::size_t nonzero = 0;
    for (double v : f.data) nonzero += v > 0.0;
    double fraction = double(nonzero) / double(f.size());
    CHECK(fraction >= 0.02);
    CHECK(fraction <= 0.25);
  }
}

TEST_CASE("tube phantom: undersized grid rejected") {
  PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Tubes, 1);
  CHECK_THROWS(tube_phantom(spec, {16, 16}));
}

TEST_CASE("vessel phantom: deterministic, normalized, connected trees") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Vessels, seed);
    ScalarField a = vessel_phantom(spec, {64, 64});
    CHECK(min_value(a) >= 0.0);
    CHECK(max_value(a) == doctest::Approx(1.0).epsilon(1e-12));
    // flood-fill components of the thresholded image never exceed the tree cap
    CHECK(oracles::component_count(a, 0.1) <= spec.count_max);
  }
  PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Vessels, 4);
  CHECK(vessel_phantom(spec, {64, 64}).data == vessel_phantom(spec, {64, 64}).data);
}

TEST_CASE("tumor phantom: normalized and distinct from vessels") {
  PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::TumorLike, 9);
  ScalarField f = tumor_phantom(spec, {64, 64});
  CHECK(min_value(f) >= 0.0);
  CHECK(max_value(f) == doctest::Approx(1.0).epsilon(1e-12));
  // the filled ellipse puts a sizable mass at intensity ~0.6
  std::size_t mid = 0;
  for (double v : f.data) mid += (v > 0.5 && v < 0.7);
  CHECK(mid > 50);
}

TEST_CASE("background: untouched where the target is bright") {
  ScalarField x({32, 32}, 1e-4);
  x.data.assign(x.size(), 0.2);  // everywhere above the threshold
  SeededRng rng(5);
  ScalarField back = background_field(x, rng);
  CHECK(back.data == x.data);
}

TEST_CASE("background: component peaks at exactly 0.1 before masking") {
  SeededRng rng(6);
  ScalarField b = background_component({32, 32}, {1e-4, 1e-4}, rng);
  CHECK(max_value(b) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(min_value(b) >= 0.0);
}

TEST_CASE("background: additive, cap preserved, bright voxels untouched") {
  PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Vessels, 12);
  ScalarField x = vessel_phantom(spec, {32, 32});
  SeededRng rng(7);
  ScalarField back = background_field(x, rng);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(back.data[i] >= x.data[i]);
    if (x.data[i] > 0.1) CHECK(back.data[i] == x.data[i]);
  }
  CHECK(max_value(back) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("noise: exact RMS ratio at snr 15") {
  AcousticOperator op = make_op();
  PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Vessels, 3);
  SensorData y = op.forward(vessel_phantom(spec, {32, 32}));
  SeededRng rng(8);
  SensorData noisy = add_noise_snr(y, 15.0, rng);
  std::vector<double> eps(noisy.data.size());
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = noisy.data[i] - y.data[i];
  CHECK(l2_norm(y.data) / l2_norm(eps) == doctest::Approx(15.0).epsilon(1e-10));
}

TEST_CASE("noise: huge snr leaves the data unchanged") {
  AcousticOperator op = make_op();
  PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Vessels, 3);
  SensorData y = op.forward(vessel_phantom(spec, {32, 32}));
  SeededRng rng(9);
  SensorData noisy = add_noise_snr(y, 1e12, rng);
  double num = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    double d = noisy.data[i] - y.data[i];
    num += d * d;
  }
  CHECK(std::sqrt(num) / l2_norm(y.data) <= 1e-10);
}

TEST_CASE("noise: deterministic per seed, zero signal rejected") {
  AcousticOperator op = make_op();
  PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Vessels, 3);
  SensorData y = op.forward(vessel_phantom(spec, {32, 32}));
  SeededRng a(10), b(10);
  CHECK(add_noise_snr(y, 15.0, a).data == add_noise_snr(y, 15.0, b).data);
  SensorData zero = op.zero_data();
  SeededRng c(10);
  CHECK_THROWS(add_noise_snr(zero, 15.0, c));
}

TEST_CASE("rescale: exact standard deviation, scale invariance") {
  SeededRng rng(11);
  SensorData y(4, 32, 1e-8);
  y.data = rng.gaussians(y.data.size());

  SensorData r1 = rescale_to_reference_std(y, 0.37);
  CHECK(standard_deviation(r1.data) == doctest::Approx(0.37).epsilon(1e-12));

  SensorData y7 = y;
  for (double& v : y7.data) v *= 7.0;
  SensorData r2 = rescale_to_reference_std(y7, 0.37);
  for (std::size_t i = 0; i < r1.data.size(); ++i)
    CHECK(r2.data[i] == doctest::Approx(r1.data[i]).epsilon(1e-12));

  SensorData matched = rescale_to_reference_std(y, standard_deviation(y.data));
  for (std::size_t i = 0; i < y.data.size(); ++i)
    CHECK(matched.data[i] == doctest::Approx(y.data[i]).epsilon(1e-12));

  SensorData constant(2, 4, 1e-8);
  constant.data.assign(8, 3.0);
  CHECK_THROWS(rescale_to_reference_std(constant, 1.0));
}

TEST_CASE("dataset: noiseless consistency hook") {
  AcousticOperator op = make_op();
  PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Vessels, 0);
  DatasetOptions opt;
  opt.snr = 1e12;
  auto samples = build_dataset(1, spec, op, opt, 100);
  ScalarField grad = op.data_fit_gradient(samples[0].x_true, samples[0].y);
  CHECK(l2_norm(grad) / l2_norm(samples[0].x_true) <= 1e-9);
  // x0 stored as the adjoint of the measurement
  ScalarField x0 = op.adjoint(samples[0].y);
  CHECK(samples[0].x0.data == x0.data);
}

TEST_CASE("dataset: rerun with the same seed is byte-identical") {
  AcousticOperator op = make_op();
  PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Vessels, 0);
  DatasetOptions opt;
  auto a = build_dataset(16, spec, op, opt, 999);
  auto b = build_dataset(16, spec, op, opt, 999);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x_true.data == b[i].x_true.data);
    CHECK(a[i].y.data == b[i].y.data);
    CHECK(a[i].x0.data == b[i].x0.data);
  }
}

TEST_CASE("dataset: background mode keeps the clean target") {
  AcousticOperator op = make_op();
  PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Vessels, 0);
  DatasetOptions clean_opt;
  clean_opt.snr = 1e12;
  DatasetOptions back_opt = clean_opt;
  back_opt.background = true;
  auto clean = build_dataset(2, spec, op, clean_opt, 55);
  auto back = build_dataset(2, spec, op, back_opt, 55);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    // same clean phantom as target on both sides
    CHECK(back[i].x_true.data == clean[i].x_true.data);
    // but the measurement came from the augmented image
    double diff = 0.0;
    for (std::size_t j = 0; j < back[i].y.data.size(); ++j)
      diff = std::max(diff, std::abs(back[i].y.data[j] - clean[i].y.data[j]));
    CHECK(diff > 0.0);
  }
}
