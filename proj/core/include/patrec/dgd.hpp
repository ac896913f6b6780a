#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "patrec/acoustic.hpp"
#include "patrec/neural.hpp"
#include "patrec/phantom.hpp"

namespace patrec {

struct DgdHyper {
  int steps_per_stage = 2000;
  int batch = 2;
  double lr = 5e-5;
  bool small_norm_penalty_stage0 = true;
  double loss_add_alpha = 0.01;
  double loss_add_beta_scale = 0.1;  // beta = scale * sqrt(voxel count)
  std::uint64_t seed = 4242;
  std::size_t kernel_size = 5;
};

/// One training triple for a single stage; non-owning.
struct StageSample {
  const ScalarField* x;       // current iterate
  const ScalarField* g;       // data-fit gradient at the iterate
  const ScalarField* x_true;  // clean target
};

struct StageTrainResult {
  StageWeights weights;
  std::vector<double> loss_curve;  // mean batch loss per optimizer step
};

/// Adam minimization of the l2 training loss (plus the small-norm penalty on
/// stage 0 when enabled). Deterministic per hyper.seed. Pass warm_start to
/// fine-tune existing weights instead of training from a fresh init.
StageTrainResult train_stage(int stage_index, const std::vector<StageSample>& samples,
                             const DgdHyper& hyper,
                             const StageWeights* warm_start = nullptr);

/// Greedily trained iterative model plus the per-stage training statistics
/// recorded while it was built.
struct DgdModel {
  std::vector<StageWeights> stages;
  std::vector<std::vector<double>> loss_curves;
  std::vector<double> identity_loss;  // mean ||x_k - x_true||^2 entering each stage
  std::vector<double> trained_loss;   // mean ||x_{k+1} - x_true||^2 after training the stage
  std::vector<double> staged_err;     // mean unbiased relative error after each stage

  std::size_t k_max() const { return stages.size(); }
};

/// Stage-by-stage training: for k = 0..k_max-1 precompute the data-fit
/// gradients of every sample (reusing cache_dir when the cached inputs match),
/// train stage k on the (x_k, g_k, x_true) triples, then roll all samples
/// forward through the trained block. Training itself never touches the
/// acoustic operator. cache_dir may be empty to disable the disk cache.
DgdModel run_training_cycle(const std::vector<DatasetSample>& dataset,
                            const AcousticOperator& op, int k_max, const DgdHyper& hyper,
                            const std::string& cache_dir = "");

/// Training all stages end-to-end through the operator is out of reach here
/// (each optimizer step would pay 2*k_max operator applications); this always
/// throws and exists to make that contract explicit.
DgdModel run_joint_training(const std::vector<DatasetSample>& dataset,
                            const AcousticOperator& op, int k_max, const DgdHyper& hyper);

struct DgdReconstruction {
  ScalarField x;                     // final iterate
  std::vector<ScalarField> iterates; // x_0 .. x_{k_max}
};

/// x_0 = A*y, then k_max learned updates, each consuming one data-fit
/// gradient: exactly 2*k_max + 1 operator applications.
DgdReconstruction reconstruct_dgd(const SensorData& y, const AcousticOperator& op,
                                  const DgdModel& model);

/// Measurement/reference pairs for transfer training, non-owning.
struct TransferPair {
  const SensorData* y;
  const ScalarField* x_ref;
};

/// Brief fine-tune of each stage in order on a new domain; stage-k inputs are
/// re-rolled through the already updated earlier stages. epochs full passes
/// at the reduced learning rate.
void transfer_update(DgdModel& model, const std::vector<TransferPair>& pairs,
                     const AcousticOperator& op, double lr = 1e-5, int epochs = 10,
                     std::uint64_t seed = 9999, int batch = 2);

/// Model directory layout: weights.dgdw + metadata.txt + loss_curves.csv.
void save_dgd_model(const std::string& dir, const DgdModel& model,
                    const std::vector<std::pair<std::string, std::string>>& metadata = {});
DgdModel load_dgd_model(const std::string& dir);

}  // namespace patrec
