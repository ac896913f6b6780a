#include "patrec/variational.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "patrec/io.hpp"
#include "patrec/metrics.hpp"

namespace patrec {

ScalarField prox_nonneg(ScalarField v) {
  for (double& x : v.data) x = std::max(x, 0.0);
  return v;
}

namespace {

// Strides of a row-major layout.
std::vector<std::size_t> strides_of(const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> s(dims.size(), 1);
  for (std::size_t d = dims.size() - 1; d-- > 0;) s[d] = s[d + 1] * dims[d + 1];
  return s;
}

// Forward differences with Neumann boundary: (grad x)_d[i] = x[i+1_d] - x[i],
// zero on the last slice of each axis. grad is per-axis, size rank*N.
void gradient(const ScalarField& x, std::vector<std::vector<double>>& grad) {
  const std::size_t rank = x.ndim();
  const std::size_t n = x.size();
  const auto strides = strides_of(x.dims);
  grad.assign(rank, std::vector<double>(n, 0.0));
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < rank; ++d)
      if (idx[d] + 1 < x.dims[d]) grad[d][i] = x.data[i + strides[d]] - x.data[i];
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < x.dims[d]) break;
      idx[d] = 0;
    }
  }
}

// Negative adjoint of `gradient`: div(p)[j] = sum_d p_d[j] - p_d[j - 1_d]
// with the one-sided boundary terms that make <grad x, p> = -<x, div p>.
void divergence(const std::vector<std::vector<double>>& p,
                const std::vector<std::size_t>& dims, std::vector<double>& div) {
  const std::size_t rank = dims.size();
  const std::size_t n = element_count(dims);
  const auto strides = strides_of(dims);
  div.assign(n, 0.0);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < rank; ++d) {
      double val = 0.0;
      if (idx[d] + 1 < dims[d]) val += p[d][i];
      if (idx[d] > 0) val -= p[d][i - strides[d]];
      div[i] += val;
    }
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < dims[d]) break;
      idx[d] = 0;
    }
  }
}

}  // namespace

double total_variation(const ScalarField& x) {
  std::vector<std::vector<double>> grad;
  gradient(x, grad);
  double tv = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double sq = 0.0;
    for (std::size_t d = 0; d < grad.size(); ++d) sq += grad[d][i] * grad[d][i];
    tv += std::sqrt(sq);
  }
  return tv;
}

ScalarField prox_tv(const ScalarField& v, double alpha, int inner_iters) {
  validate(v, "prox_tv input");
  if (alpha < 0.0) throw std::invalid_argument("prox_tv: negative alpha");
  if (alpha == 0.0) return v;
  if (inner_iters < 1) throw std::invalid_argument("prox_tv: need at least one inner iteration");

  const std::size_t rank = v.ndim();
  const std::size_t n = v.size();
  const double tau = 1.0 / (4.0 * double(rank));

  std::vector<std::vector<double>> p(rank, std::vector<double>(n, 0.0));
  std::vector<double> div(n, 0.0);
  std::vector<std::vector<double>> g;
  ScalarField work = v;

  for (int it = 0; it < inner_iters; ++it) {
    // work = div(p) - v/alpha
    divergence(p, v.dims, div);
    for (std::size_t i = 0; i < n; ++i) work.data[i] = div[i] - v.data[i] / alpha;
    gradient(work, g);
    for (std::size_t i = 0; i < n; ++i) {
      double mag_sq = 0.0;
      for (std::size_t d = 0; d < rank; ++d) mag_sq += g[d][i] * g[d][i];
      double denom = 1.0 + tau * std::sqrt(mag_sq);
      for (std::size_t d = 0; d < rank; ++d) p[d][i] = (p[d][i] + tau * g[d][i]) / denom;
    }
  }

  divergence(p, v.dims, div);
  ScalarField out = v;
  for (std::size_t i = 0; i < n; ++i) out.data[i] = v.data[i] - alpha * div[i];
  return out;
}

SolverResult proximal_gradient(const AcousticOperator& op, const SensorData& y,
                               const ProxSpec& prox, double lambda, double gamma,
                               int iterations, const ScalarField& x_init,
                               const ScalarField* x_true, bool record_objective) {
  if (!(gamma > 0.0)) throw std::invalid_argument("proximal_gradient: gamma must be positive");
  if (iterations < 0) throw std::invalid_argument("proximal_gradient: negative iteration count");
  if (lambda < 0.0) throw std::invalid_argument("proximal_gradient: negative lambda");

  SolverResult res;
  res.x = x_init;
  if (iterations == 0) return res;

  auto eval_residual = [&](const ScalarField& x) {
    SensorData residual = op.forward(x);
    if (residual.data.size() != y.data.size())
      throw std::invalid_argument("proximal_gradient: measurement shape mismatch");
    for (std::size_t i = 0; i < residual.data.size(); ++i) residual.data[i] -= y.data[i];
    return residual;
  };

  SensorData residual = eval_residual(res.x);
  for (int k = 0; k < iterations; ++k) {
    auto t0 = std::chrono::steady_clock::now();

    ScalarField grad = op.adjoint(residual);
    for (std::size_t i = 0; i < res.x.size(); ++i) res.x.data[i] -= gamma * grad.data[i];
    switch (prox.kind) {
      case ProxSpec::Kind::NonNegative:
        res.x = prox_nonneg(std::move(res.x));
        break;
      case ProxSpec::Kind::IsotropicTv:
        res.x = prox_tv(res.x, lambda * gamma, prox.tv_inner_iters);
        break;
    }

    // The updated residual feeds both the trace and the next gradient; the
    // last one is skipped when nothing consumes it.
    const bool last = k + 1 == iterations;
    if (!last || record_objective) {
      residual = eval_residual(res.x);
      if (record_objective) {
        double objective = 0.5 * dot(residual.data, residual.data);
        if (prox.kind == ProxSpec::Kind::IsotropicTv)
          objective += lambda * total_variation(res.x);
        res.trace.objective.push_back(objective);
      }
    }

    auto t1 = std::chrono::steady_clock::now();
    if (x_true) res.trace.err.push_back(unbiased_rel_error(res.x, *x_true).err);
    res.trace.seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return res;
}

std::vector<double> log_lambda_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1)
    throw std::invalid_argument("log_lambda_grid: bad range");
  std::vector<double> grid(count);
  if (count == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = (std::log10(hi) - std::log10(lo)) / double(count - 1);
  for (int i = 0; i < count; ++i) grid[i] = std::pow(10.0, std::log10(lo) + step * i);
  return grid;
}

double select_tv_lambda(const AcousticOperator& op, const SensorData& y,
                        const ScalarField& x_true, const ScalarField& x_init,
                        double gamma, int iterations, const std::vector<double>& grid,
                        int tv_inner_iters) {
  if (grid.empty()) throw std::invalid_argument("select_tv_lambda: empty grid");
  double best_lambda = grid.front();
  double best_err = std::numeric_limits<double>::infinity();
  ProxSpec prox{ProxSpec::Kind::IsotropicTv, tv_inner_iters};
  for (double lambda : grid) {
    SolverResult res = proximal_gradient(op, y, prox, lambda, gamma, iterations, x_init);
    double e = unbiased_rel_error(res.x, x_true).err;
    if (e < best_err) {
      best_err = e;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

void write_trace_csv(const std::string& path, const SolverTrace& trace,
                     std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# config_hash=" << to_hex(config_hash) << "\n";
  out << "iteration,objective,err,seconds\n";
  for (std::size_t k = 0; k < trace.objective.size(); ++k) {
    out << k << ',' << format_double(trace.objective[k]) << ',';
    if (k < trace.err.size()) out << format_double(trace.err[k]);
    out << ',' << format_double(k < trace.seconds.size() ? trace.seconds[k] : 0.0) << "\n";
  }
}

}  // namespace patrec
