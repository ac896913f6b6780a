#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patrec/field.hpp"

namespace patrec {

/// Result of fitting x_true ~ a*x - b over scalar a, b.
struct AffineFit {
  double err = 0.0;  // min_{a,b} ||a*x - x_true - b|| / ||x_true||
  double a = 0.0;
  double b = 0.0;
};

/// Scaled and unbiased relative error: the relative l2 error after the best
/// affine intensity transform of the reconstruction. Invariant under
/// x -> s*x + c for s != 0. x_true must not be identically constant.
AffineFit unbiased_rel_error(const std::vector<double>& x, const std::vector<double>& x_true);
AffineFit unbiased_rel_error(const ScalarField& x, const ScalarField& x_true);

/// Plain relative l2 error ||x - x_true|| / ||x_true||.
double rel_l2_error(const ScalarField& x, const ScalarField& x_true);

/// 10*log10(peak^2 / MSE), capped at 300 dB.
double psnr(const ScalarField& x, const ScalarField& x_true, double peak = 1.0);

/// Mean local structural similarity over an 11-wide Gaussian window
/// (sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1). 2D fields only;
/// both dims must be at least the window width.
double ssim(const ScalarField& x, const ScalarField& x_true);

struct EvalRow {
  std::string method;
  std::size_t sample = 0;
  double err = 0.0;
  double rel_l2 = 0.0;
  double psnr_db = 0.0;
  double ssim_val = 0.0;
  int iters = 0;
  double seconds = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  /// Mean err over all rows with the given method label.
  double mean_err(const std::string& method) const;
};

/// Schema: method,sample,err,rel_l2,psnr,ssim,iters,seconds with a leading
/// config-hash comment line.
void write_eval_csv(const std::string& path, const EvalReport& report,
                    std::uint64_t config_hash);

}  // namespace patrec
