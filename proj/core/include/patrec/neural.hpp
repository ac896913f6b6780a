#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patrec/field.hpp"
#include "patrec/rng.hpp"
#include "patrec/tensor.hpp"

namespace patrec {

/// Parameters of one learned update block: two convolutional pipelines
/// (iterate and gradient, each 1->16->32 channels), a merge head
/// (32->16 with ReLU, 16->1 linear) and a learned output scale.
struct StageWeights {
  ConvLayer x1, x2;  // iterate pipeline
  ConvLayer g1, g2;  // gradient pipeline
  ConvLayer m1, m2;  // merge head
  double lambda_net = 0.0;
};

/// He-initialized kernels, zero biases, lambda_net = 0.01 so a fresh block
/// starts close to the identity map.
StageWeights init_stage_weights(SeededRng& rng, std::size_t rank = 2,
                                std::size_t kernel_size = 5);

/// Zero-valued gradient container shaped like w.
StageWeights zero_like(const StageWeights& w);

void he_init(ConvLayer& layer, SeededRng& rng);

struct DgdBlockCache {
  bool valid = false;
  Tensor a1, a2, b1, b2;  // pre-activation conv outputs
  Tensor r1, s1;          // post-ReLU pipeline intermediates (conv inputs)
  Tensor u;               // merged 32-channel tensor
  Tensor c1, t1, c2;      // merge head intermediates
  std::vector<double> pre_residual;  // x + lambda * c2, before the final ReLU
};

/// x_next = ReLU(x + lambda * m2(ReLU(m1(relu-pipe(x) + relu-pipe(g))))).
/// Output is nonnegative; with all-zero weights it is the identity on
/// nonnegative iterates.
ScalarField dgd_block_forward(const ScalarField& x, const ScalarField& g,
                              const StageWeights& w, DgdBlockCache* cache = nullptr);

struct DgdBlockGrads {
  StageWeights theta;  // parameter gradients, lambda_net holds d/d lambda
  ScalarField x;
  ScalarField g;
};

/// Exact gradients under the cached forward pass; ReLU subgradient at 0 is 0.
DgdBlockGrads dgd_block_backward(const ScalarField& x, const ScalarField& g,
                                 const StageWeights& w, const DgdBlockCache& cache,
                                 const ScalarField& upstream);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// Mutable view into one parameter tensor used to run a model's parameters
/// through the optimizer in a fixed order.
struct ParamView {
  double* data = nullptr;
  std::size_t size = 0;
};

std::vector<ParamView> param_views(StageWeights& w);
std::size_t total_size(const std::vector<ParamView>& views);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<double> m, v;
};

AdamState make_adam_state(std::size_t param_count, double lr);

/// Standard bias-corrected Adam update. Throws on non-finite gradients.
void adam_step(const std::vector<ParamView>& params, const std::vector<ParamView>& grads,
               AdamState& state);

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

struct LossSpec {
  bool small_norm_penalty = false;  // guards stage-0 training against the zero map
  double alpha = 0.01;
  double beta = 0.0;
};

struct LossResult {
  double value = 0.0;
  ScalarField grad;
};

/// Squared l2 distance ||x - x_true||^2; with the penalty enabled adds
/// -alpha * min(||x|| - beta, 0). Subgradients at the kinks are 0.
LossResult loss_and_grad(const ScalarField& x_out, const ScalarField& x_true,
                         const LossSpec& spec);

// ---------------------------------------------------------------------------
// Weights container (shared by the staged model and the post-processing net)
// ---------------------------------------------------------------------------

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;  // empty = scalar
  std::vector<float> values;
};

/// Little-endian layout: magic (4 bytes), u32 version = 1, u32 stage_count,
/// then per stage, per tensor: u32 name length, name bytes, u32 rank,
/// u32 dims[rank], f32 payload.
void write_weights_container(const std::string& path, const char magic[4],
                             const std::vector<std::vector<NamedTensor>>& stages);

/// Reads a container written with the layout above; the caller states how
/// many tensors each stage holds. Validation failures throw with the
/// offending detail (magic, version, truncation) and leave no partial state.
std::vector<std::vector<NamedTensor>> read_weights_container(const std::string& path,
                                                             const char expected_magic[4],
                                                             std::size_t tensors_per_stage);

std::vector<NamedTensor> stage_to_named_tensors(const StageWeights& w);
StageWeights stage_from_named_tensors(const std::vector<NamedTensor>& tensors);

/// Tensor count per stage in the weights file.
inline constexpr std::size_t kStageTensorCount = 13;

}  // namespace patrec
