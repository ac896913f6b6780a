#include <benchmark/benchmark.h>

#include "patrec/neural.hpp"
#include "patrec/unet.hpp"

using namespace patrec;

namespace {

ScalarField random_field(std::size_t n, std::uint64_t seed) {
  ScalarField f({n, n}, 84.75e-6);
  SeededRng rng(seed);
  f.data = rng.gaussians(f.size());
  return f;
}

}  // namespace

static void BM_BlockForward64(benchmark::State& state) {
  SeededRng rng(1);
  StageWeights w = init_stage_weights(rng);
  ScalarField x = random_field(64, 2);
  ScalarField g = random_field(64, 3);
  for (auto _ : state) {
    ScalarField out = dgd_block_forward(x, g, w);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_BlockForward64);

static void BM_BlockForwardBackward64(benchmark::State& state) {
  SeededRng rng(4);
  StageWeights w = init_stage_weights(rng);
  ScalarField x = random_field(64, 5);
  ScalarField g = random_field(64, 6);
  ScalarField t = random_field(64, 7);
  for (auto _ : state) {
    DgdBlockCache cache;
    ScalarField out = dgd_block_forward(x, g, w, &cache);
    LossResult loss = loss_and_grad(out, t, {});
    DgdBlockGrads grads = dgd_block_backward(x, g, w, cache, loss.grad);
    benchmark::DoNotOptimize(grads.theta.lambda_net);
  }
}
BENCHMARK(BM_BlockForwardBackward64);

static void BM_UnetForward64(benchmark::State& state) {
  SeededRng rng(8);
  UnetWeights w = init_unet_weights(rng);
  ScalarField x = random_field(64, 9);
  for (auto _ : state) {
    ScalarField out = unet_forward(x, w);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_UnetForward64);

static void BM_Conv16to32(benchmark::State& state) {
  SeededRng rng(10);
  ConvLayer layer = make_conv_layer(16, 32, 5, 2);
  he_init(layer, rng);
  Tensor in(16, {64, 64});
  for (auto& v : in.data) v = rng.gaussian();
  for (auto _ : state) {
    Tensor out = conv_forward(in, layer);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(BM_Conv16to32);
