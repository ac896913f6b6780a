#include "patrec/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace patrec {

std::vector<double> wavenumber_magnitudes(const std::vector<std::size_t>& dims,
                                          const std::vector<double>& spacing) {
  if (dims.empty() || dims.size() != spacing.size())
    throw std::invalid_argument("wavenumber_magnitudes: bad dims/spacing");
  const std::size_t n = element_count(dims);
  const std::size_t rank = dims.size();

  // Per-axis wavenumber tables.
  std::vector<std::vector<double>> axis_k(rank);
  for (std::size_t d = 0; d < rank; ++d) {
    const std::size_t nd = dims[d];
    axis_k[d].resize(nd);
    for (std::size_t m = 0; m < nd; ++m) {
      // wrap to (-N/2, N/2]
      double freq = (m <= nd / 2) ? double(m) : double(m) - double(nd);
      axis_k[d][m] = 2.0 * std::numbers::pi * freq / (double(nd) * spacing[d]);
    }
  }

  std::vector<double> out(n);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t d = 0; d < rank; ++d) {
      double k = axis_k[d][idx[d]];
      sq += k * k;
    }
    out[i] = std::sqrt(sq);
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < dims[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

namespace detail {

namespace {

struct PlanKey {
  std::vector<std::size_t> dims;
  int sign;
  bool operator<(const PlanKey& o) const {
    if (sign != o.sign) return sign < o.sign;
    return dims < o.dims;
  }
};

// FFTW's planner is not thread-safe; executing a plan on fresh arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_plan get_plan(const std::vector<std::size_t>& dims, int sign) {
  static std::map<PlanKey, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(planner_mutex());
  PlanKey key{dims, sign};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  std::vector<int> n(dims.begin(), dims.end());
  const std::size_t total = element_count(dims);
  fftw_complex* buf = fftw_alloc_complex(total);
  // FFTW_UNALIGNED lets the plan run on any caller buffer.
  fftw_plan plan = fftw_plan_dft(int(n.size()), n.data(), buf, buf, sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  if (!plan) throw std::runtime_error("fft: planning failed");
  cache.emplace(key, plan);
  return plan;
}

}  // namespace

void fft_c2c(const std::vector<std::size_t>& dims, const std::complex<double>* in,
             std::complex<double>* out, bool inverse) {
  fftw_plan plan = get_plan(dims, inverse ? FFTW_BACKWARD : FFTW_FORWARD);
  fftw_execute_dft(plan,
                   reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
  if (inverse) {
    const double inv_n = 1.0 / double(element_count(dims));
    const std::size_t total = element_count(dims);
    for (std::size_t i = 0; i < total; ++i) out[i] *= inv_n;
  }
}

}  // namespace detail

Spectrum fft_forward(const ScalarField& f) {
  validate(f, "fft_forward input");
  Spectrum s;
  s.dims = f.dims;
  s.spacing = f.spacing;
  s.coeff.assign(f.data.begin(), f.data.end());
  std::vector<std::complex<double>> out(s.coeff.size());
  detail::fft_c2c(s.dims, s.coeff.data(), out.data(), false);
  s.coeff = std::move(out);
  s.k_mag = wavenumber_magnitudes(s.dims, s.spacing);
  return s;
}

ScalarField fft_inverse(const Spectrum& s) {
  if (s.dims.empty()) throw std::invalid_argument("fft_inverse: empty dims");
  if (s.coeff.size() != element_count(s.dims))
    throw std::invalid_argument("fft_inverse: coefficient count does not match dims");
  for (const auto& c : s.coeff)
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
      throw std::invalid_argument("fft_inverse: non-finite coefficient");
  std::vector<std::complex<double>> out(s.coeff.size());
  detail::fft_c2c(s.dims, s.coeff.data(), out.data(), true);
  ScalarField f(s.dims, s.spacing);
  for (std::size_t i = 0; i < out.size(); ++i) f.data[i] = out[i].real();
  return f;
}

}  // namespace patrec
