#include <benchmark/benchmark.h>

#include "patrec/acoustic.hpp"
#include "patrec/fft.hpp"
#include "patrec/rng.hpp"

using namespace patrec;

namespace {

AcousticOperator& desk_operator() {
  static AcousticOperator op = [] {
    AcousticGeometry g = make_desk_geometry();
    SeededRng rng(1);
    return AcousticOperator(with_subsampling(std::move(g), 4, rng));
  }();
  return op;
}

ScalarField random_field(const AcousticGeometry& g, std::uint64_t seed) {
  ScalarField f(g.dims, g.spacing);
  SeededRng rng(seed);
  f.data = rng.gaussians(f.size());
  return f;
}

}  // namespace

static void BM_FftRoundtrip64(benchmark::State& state) {
  ScalarField f({64, 64}, 84.75e-6);
  SeededRng rng(2);
  f.data = rng.gaussians(f.size());
  for (auto _ : state) {
    ScalarField back = fft_inverse(fft_forward(f));
    benchmark::DoNotOptimize(back.data.data());
  }
}
BENCHMARK(BM_FftRoundtrip64);

static void BM_Forward(benchmark::State& state) {
  AcousticOperator& op = desk_operator();
  ScalarField x = random_field(op.geometry(), 3);
  for (auto _ : state) {
    SensorData y = op.forward(x);
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(BM_Forward);

static void BM_Adjoint(benchmark::State& state) {
  AcousticOperator& op = desk_operator();
  ScalarField x = random_field(op.geometry(), 4);
  SensorData y = op.forward(x);
  for (auto _ : state) {
    ScalarField back = op.adjoint(y);
    benchmark::DoNotOptimize(back.data.data());
  }
}
BENCHMARK(BM_Adjoint);

static void BM_DataFitGradient(benchmark::State& state) {
  AcousticOperator& op = desk_operator();
  ScalarField x = random_field(op.geometry(), 5);
  SensorData y = op.forward(x);
  for (auto _ : state) {
    ScalarField g = op.data_fit_gradient(x, y);
    benchmark::DoNotOptimize(g.data.data());
  }
}
BENCHMARK(BM_DataFitGradient);
