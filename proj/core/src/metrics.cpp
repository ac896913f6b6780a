#include "patrec/metrics.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "patrec/io.hpp"

namespace patrec {

AffineFit unbiased_rel_error(const std::vector<double>& x, const std::vector<double>& t) {
  if (x.size() != t.size() || x.empty())
    throw std::invalid_argument("unbiased_rel_error: size mismatch");
  const double n = double(x.size());
  const double norm_t = l2_norm(t);
  if (norm_t == 0.0) throw std::invalid_argument("unbiased_rel_error: zero reference");

  double sx = 0.0, st = 0.0, sxx = 0.0, sxt = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    st += t[i];
    sxx += x[i] * x[i];
    sxt += x[i] * t[i];
  }
  // Normal equations of min_{a,b} ||a*x - t - b||^2:
  //   a*sxx - b*sx = sxt
  //   a*sx  - b*n  = st
  const double det = sxx * n - sx * sx;  // n^2 * variance(x)
  AffineFit fit;
  // degenerate once the relative variance of x drops to roundoff level
  if (det <= 1e-14 * n * sxx || sxx == 0.0) {
    // x is (numerically) constant: best constant approximation of t.
    fit.a = 0.0;
    fit.b = -st / n;
  } else {
    fit.a = (sxt * n - sx * st) / det;
    fit.b = (fit.a * sx - st) / n;
  }
  double resid_sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = fit.a * x[i] - t[i] - fit.b;
    resid_sq += r * r;
  }
  fit.err = std::sqrt(std::max(resid_sq, 0.0)) / norm_t;
  return fit;
}

AffineFit unbiased_rel_error(const ScalarField& x, const ScalarField& x_true) {
  if (!x.same_shape(x_true)) throw std::invalid_argument("unbiased_rel_error: shape mismatch");
  return unbiased_rel_error(x.data, x_true.data);
}

double rel_l2_error(const ScalarField& x, const ScalarField& x_true) {
  if (!x.same_shape(x_true)) throw std::invalid_argument("rel_l2_error: shape mismatch");
  double num = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x.data[i] - x_true.data[i];
    num += d * d;
  }
  double den = l2_norm(x_true);
  if (den == 0.0) throw std::invalid_argument("rel_l2_error: zero reference");
  return std::sqrt(num) / den;
}

double psnr(const ScalarField& x, const ScalarField& x_true, double peak) {
  if (!x.same_shape(x_true)) throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x.data[i] - x_true.data[i];
    mse += d * d;
  }
  mse /= double(x.size());
  if (mse == 0.0) return 300.0;
  return std::min(300.0, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const ScalarField& x, const ScalarField& y) {
  if (!x.same_shape(y)) throw std::invalid_argument("ssim: shape mismatch");
  if (x.ndim() != 2) throw std::invalid_argument("ssim: expects a 2D field");
  constexpr int kWindow = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
  constexpr double kC2 = 0.03 * 0.03;
  const std::size_t rows = x.dims[0], cols = x.dims[1];
  if (rows < kWindow || cols < kWindow)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");

  // Normalized Gaussian window.
  double w[kWindow][kWindow], wsum = 0.0;
  for (int i = 0; i < kWindow; ++i)
    for (int j = 0; j < kWindow; ++j) {
      double di = i - (kWindow - 1) / 2.0, dj = j - (kWindow - 1) / 2.0;
      w[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
      wsum += w[i][j];
    }
  for (auto& row : w)
    for (double& v : row) v /= wsum;

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + kWindow <= rows; ++r) {
    for (std::size_t c = 0; c + kWindow <= cols; ++c) {
      double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
      for (int i = 0; i < kWindow; ++i) {
        const double* px = x.data.data() + (r + i) * cols + c;
        const double* py = y.data.data() + (r + i) * cols + c;
        for (int j = 0; j < kWindow; ++j) {
          double wij = w[i][j];
          mx += wij * px[j];
          my += wij * py[j];
          mxx += wij * px[j] * px[j];
          myy += wij * py[j] * py[j];
          mxy += wij * px[j] * py[j];
        }
      }
      double vx = mxx - mx * mx, vy = myy - my * my, cov = mxy - mx * my;
      double val = ((2 * mx * my + kC1) * (2 * cov + kC2)) /
                   ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      total += val;
      ++count;
    }
  }
  return total / double(count);
}

double EvalReport::mean_err(const std::string& method) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& row : rows)
    if (row.method == method) { sum += row.err; ++n; }
  if (n == 0) throw std::invalid_argument("mean_err: no rows for method " + method);
  return sum / double(n);
}

void write_eval_csv(const std::string& path, const EvalReport& report,
                    std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# config_hash=" << to_hex(config_hash) << "\n";
  out << "method,sample,err,rel_l2,psnr,ssim,iters,seconds\n";
  for (const auto& r : report.rows) {
    out << r.method << ',' << r.sample << ',' << format_double(r.err) << ','
        << format_double(r.rel_l2) << ',' << format_double(r.psnr_db) << ','
        << format_double(r.ssim_val) << ',' << r.iters << ','
        << format_double(r.seconds) << "\n";
  }
}

}  // namespace patrec
