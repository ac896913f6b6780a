#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patrec/acoustic.hpp"
#include "patrec/config.hpp"
#include "patrec/dgd.hpp"
#include "patrec/metrics.hpp"
#include "patrec/phantom.hpp"
#include "patrec/unet.hpp"
#include "patrec/variational.hpp"

namespace patrec {

/// Shared knobs for the variational baselines inside experiments.
struct VariationalSettings {
  double gamma = 0.0;      // step size, typically 1/L
  double tv_lambda = 1e-4; // regularization weight for TV runs
  int tv_inner_iters = 20;
};

// ---------------------------------------------------------------------------
// Convergence: mean err vs iteration count per method
// ---------------------------------------------------------------------------

struct ConvergenceRow {
  std::string method;
  int iterations;
  double mean_err;
};

inline const std::vector<int>& variational_iteration_points() {
  static const std::vector<int> points{1, 2, 5, 10, 20, 50};
  return points;
}

/// Evaluates bp (the initialization), the staged model at 1..k_max updates,
/// the post-processing net, and TV/NNLS at {1,2,5,10,20,50} iterations.
std::vector<ConvergenceRow> convergence_experiment(const AcousticOperator& op,
                                                   const std::vector<DatasetSample>& test_set,
                                                   const DgdModel& dgd,
                                                   const UnetWeights& unet,
                                                   const VariationalSettings& vs);

/// Schema: method,iterations,mean_err.
void write_convergence_csv(const std::string& path, const std::vector<ConvergenceRow>& rows,
                           std::uint64_t config_hash);

// ---------------------------------------------------------------------------
// Timing: wall seconds and operator applications per reconstruction
// ---------------------------------------------------------------------------

struct TimingRow {
  std::string method;
  int iterations;
  std::uint64_t operator_applications;  // per reconstruction
  double mean_seconds;
};

/// Reconstruction cost over the first n test samples, all methods at
/// `iterations` iterative steps; runs single-threaded for clean numbers.
std::vector<TimingRow> timing_experiment(const AcousticOperator& op,
                                         const std::vector<DatasetSample>& test_set,
                                         const DgdModel& dgd, const UnetWeights& unet,
                                         const VariationalSettings& vs, int iterations = 5,
                                         std::size_t n = 5);

/// Schema: method,iterations,operator_applications,mean_seconds.
void write_timing_csv(const std::string& path, const std::vector<TimingRow>& rows,
                      std::uint64_t config_hash);

// ---------------------------------------------------------------------------
// Robustness: err deterioration under acquisition perturbations
// ---------------------------------------------------------------------------

struct RobustnessRow {
  std::string method;        // dgd | unet | bp
  std::string perturbation;  // none | mask_reseed | sound_speed_up | ... | tumor_ood
  double baseline_err;
  double perturbed_err;
  double deterioration_percent;  // 100 * (perturbed - baseline) / baseline
};

inline const std::vector<std::string>& robustness_perturbations() {
  static const std::vector<std::string> kinds{
      "none", "mask_reseed", "sound_speed_up", "sound_speed_down",
      "noise_up", "noise_down", "tumor_ood"};
  return kinds;
}

/// Regenerates the test measurements under each perturbation and re-runs the
/// reconstructions. Perturbations of the acquisition physics (sound speed)
/// leave the reconstruction operator untouched; sampling perturbations carry
/// through to reconstruction, mirroring a changed acquisition protocol.
std::vector<RobustnessRow> robustness_experiment(const ExperimentConfig& config,
                                                 const DgdModel& dgd,
                                                 const UnetWeights& unet,
                                                 const VariationalSettings& vs,
                                                 const std::vector<std::string>& perturbations);

/// Schema: method,perturbation,baseline_err,perturbed_err,deterioration_percent.
void write_robustness_csv(const std::string& path, const std::vector<RobustnessRow>& rows,
                          std::uint64_t config_hash);

// ---------------------------------------------------------------------------
// Transfer training on a background-shifted domain
// ---------------------------------------------------------------------------

/// One sample of the shifted domain: sub-sampled measurement of a
/// background-augmented image, with a TV reconstruction from the fully
/// sampled data as the reference target.
struct TransferSample {
  SensorData y_sub;
  ScalarField x_tv_ref;
  ScalarField x_true;
};

std::vector<TransferSample> build_transfer_set(const ExperimentConfig& config,
                                               const AcousticOperator& op_sub,
                                               const AcousticOperator& op_full,
                                               const VariationalSettings& vs,
                                               std::size_t n, std::uint64_t base_seed);

struct TransferRow {
  std::string method;
  double err_before;
  double err_after;
};

/// Fine-tunes both models on a transfer set and reports mean err against the
/// TV references of a held-out shifted set, before and after the update.
std::vector<TransferRow> transfer_experiment(const ExperimentConfig& config, DgdModel& dgd,
                                             UnetWeights& unet, const AcousticOperator& op_sub,
                                             const AcousticOperator& op_full,
                                             const VariationalSettings& vs);

/// Schema: method,err_before,err_after.
void write_transfer_csv(const std::string& path, const std::vector<TransferRow>& rows,
                        std::uint64_t config_hash);

// ---------------------------------------------------------------------------
// Per-sample evaluation table
// ---------------------------------------------------------------------------

EvalReport evaluate_methods(const AcousticOperator& op,
                            const std::vector<DatasetSample>& test_set, const DgdModel* dgd,
                            const UnetWeights* unet, const VariationalSettings& vs,
                            int variational_iterations);

}  // namespace patrec
