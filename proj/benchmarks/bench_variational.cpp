#include <benchmark/benchmark.h>

#include "patrec/phantom.hpp"
#include "patrec/variational.hpp"

using namespace patrec;

namespace {

struct Setup {
  AcousticOperator op;
  SensorData y;
  ScalarField x0;
  double gamma;

  Setup()
      : op([] {
          AcousticGeometry g = make_desk_geometry();
          SeededRng rng(1);
          return with_subsampling(std::move(g), 4, rng);
        }()) {
    PhantomSpec spec = default_phantom_spec(PhantomSpec::Kind::Vessels, 3);
    SeededRng noise(2);
    y = add_noise_snr(op.forward(vessel_phantom(spec, op.geometry().dims)), 15.0, noise);
    x0 = op.adjoint(y);
    SeededRng rng(4);
    gamma = 1.0 / estimate_lipschitz(op, 20, rng).value;
  }
};

Setup& setup() {
  static Setup s;
  return s;
}

}  // namespace

static void BM_ProxTv64(benchmark::State& state) {
  Setup& s = setup();
  for (auto _ : state) {
    ScalarField p = prox_tv(s.x0, 1e-4 * s.gamma, 20);
    benchmark::DoNotOptimize(p.data.data());
  }
}
BENCHMARK(BM_ProxTv64);

static void BM_NnlsIteration(benchmark::State& state) {
  Setup& s = setup();
  for (auto _ : state) {
    SolverResult res = proximal_gradient(s.op, s.y, {ProxSpec::Kind::NonNegative, 0}, 0.0,
                                         s.gamma, 1, s.x0);
    benchmark::DoNotOptimize(res.x.data.data());
  }
}
BENCHMARK(BM_NnlsIteration);

static void BM_TvIteration(benchmark::State& state) {
  Setup& s = setup();
  for (auto _ : state) {
    SolverResult res = proximal_gradient(s.op, s.y, {ProxSpec::Kind::IsotropicTv, 20},
                                         1e-4, s.gamma, 1, s.x0);
    benchmark::DoNotOptimize(res.x.data.data());
  }
}
BENCHMARK(BM_TvIteration);

BENCHMARK_MAIN();
