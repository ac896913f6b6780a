#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "patrec/field.hpp"
#include "patrec/neural.hpp"
#include "patrec/rng.hpp"
#include "patrec/tensor.hpp"

namespace patrec {

/// Small residual encoder-decoder (three resolution levels, 8/16/32
/// channels, 3x3 kernels) applied to the adjoint initialization. 2D only.
struct UnetWeights {
  ConvLayer enc1;  // 1 -> 8,  full resolution
  ConvLayer enc2;  // 8 -> 16, half resolution
  ConvLayer enc3;  // 16 -> 32, quarter resolution
  ConvLayer up2;   // 32 -> 16 after upsampling
  ConvLayer dec2;  // 32 -> 16 after the skip concat
  ConvLayer up1;   // 16 -> 8 after upsampling
  ConvLayer dec1;  // 16 -> 8 after the skip concat
  ConvLayer out;   // 8 -> 1, linear
  double out_scale = 0.01;
};

UnetWeights init_unet_weights(SeededRng& rng);

struct UnetCache;  // opaque; defined in the implementation

/// x_post = ReLU(x0 + out_scale * net(x0)). Both spatial extents must be
/// divisible by 4 (two 2x downsamplings).
ScalarField unet_forward(const ScalarField& x0, const UnetWeights& w);

struct UnetGrads {
  UnetWeights theta;  // parameter gradients; out_scale holds d/d out_scale
  ScalarField x0;
};

/// Forward pass that also returns everything the backward pass needs.
struct UnetForwardResult {
  ScalarField x_post;
  std::shared_ptr<UnetCache> cache;
};
UnetForwardResult unet_forward_cached(const ScalarField& x0, const UnetWeights& w);

UnetGrads unet_backward(const ScalarField& x0, const UnetWeights& w, const UnetCache& cache,
                        const ScalarField& upstream);

std::vector<ParamView> param_views(UnetWeights& w);

struct UnetHyper {
  int epochs = 30;
  int batch = 2;
  double lr = 1e-4;
  double loss_add_alpha = 0.01;
  double loss_add_beta_scale = 0.1;
  std::uint64_t seed = 5151;
};

/// Non-owning (x0, x_true) pairs.
struct UnetPair {
  const ScalarField* x0;
  const ScalarField* x_true;
};

struct UnetTrainResult {
  UnetWeights weights;
  std::vector<double> loss_curve;
};

/// Adam on the l2 loss plus the small-norm penalty.
UnetTrainResult train_unet(const std::vector<UnetPair>& pairs, const UnetHyper& hyper);

/// Fine-tune on a new domain at a reduced learning rate (plain l2 loss).
void transfer_update_unet(UnetWeights& w, const std::vector<UnetPair>& pairs,
                          double lr = 1e-5, int epochs = 10, std::uint64_t seed = 8888,
                          int batch = 2);

/// Same container format as the staged model, magic "UNTW".
void save_unet_weights(const std::string& path, const UnetWeights& w);
UnetWeights load_unet_weights(const std::string& path);

}  // namespace patrec
