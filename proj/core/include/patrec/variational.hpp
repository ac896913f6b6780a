#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "patrec/acoustic.hpp"
#include "patrec/field.hpp"

namespace patrec {

/// Elementwise max(v, 0): the proximal map of the nonnegativity indicator.
ScalarField prox_nonneg(ScalarField v);

/// Isotropic total variation with forward differences and replicate-edge
/// (Neumann) boundaries, in voxel units.
double total_variation(const ScalarField& x);

/// Approximate minimizer of ||grad x||_1 + (1/(2*alpha)) ||x - v||^2 via
/// projected gradient on the dual (Chambolle-type), inner_iters steps.
/// alpha = 0 returns v unchanged.
ScalarField prox_tv(const ScalarField& v, double alpha, int inner_iters);

struct ProxSpec {
  enum class Kind { NonNegative, IsotropicTv };
  Kind kind = Kind::NonNegative;
  int tv_inner_iters = 20;
};

/// One entry per iteration: objective, error and wall time of the iterate
/// produced by that step (x_1 .. x_K).
struct SolverTrace {
  std::vector<double> objective;
  std::vector<double> err;      // filled only when x_true is given
  std::vector<double> seconds;  // wall time per iteration
};

struct SolverResult {
  ScalarField x;
  SolverTrace trace;
};

/// Proximal gradient descent x_{k+1} = prox_{lambda*gamma}(x_k - gamma * A*(A x_k - y))
/// with a constant step. The recorded objective is 0.5||Ax-y||^2 for the
/// nonnegativity prior (iterates are feasible) plus lambda*TV(x) for TV.
/// The residual is carried between iterations, so a K-step solve costs
/// 2K + 1 operator applications with the trace enabled and exactly 2K
/// without (record_objective = false skips the final residual evaluation).
SolverResult proximal_gradient(const AcousticOperator& op, const SensorData& y,
                               const ProxSpec& prox, double lambda, double gamma,
                               int iterations, const ScalarField& x_init,
                               const ScalarField* x_true = nullptr,
                               bool record_objective = true);

/// Logarithmic lambda grid [lo, hi] with `count` points.
std::vector<double> log_lambda_grid(double lo, double hi, int count);

/// Picks the grid lambda whose TV reconstruction of the validation sample
/// reaches the smallest unbiased relative error.
double select_tv_lambda(const AcousticOperator& op, const SensorData& y,
                        const ScalarField& x_true, const ScalarField& x_init,
                        double gamma, int iterations, const std::vector<double>& grid,
                        int tv_inner_iters);

/// Schema: iteration,objective,err,seconds (err empty when unknown).
void write_trace_csv(const std::string& path, const SolverTrace& trace,
                     std::uint64_t config_hash);

}  // namespace patrec
