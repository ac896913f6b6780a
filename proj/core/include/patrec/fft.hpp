#pragma once

#include <complex>
#include <vector>

#include "patrec/field.hpp"

namespace patrec {

/// Discrete Fourier coefficients of a real grid, with the wavenumber
/// magnitude of each coefficient precomputed from the grid spacing.
struct Spectrum {
  std::vector<std::size_t> dims;
  std::vector<double> spacing;
  std::vector<std::complex<double>> coeff;  // row-major, same layout as the field
  std::vector<double> k_mag;                // |k| in rad/m per coefficient
};

/// |k| per coefficient under the standard FFT frequency convention:
/// k_d(m) = 2*pi*m / (N_d * dx_d) with m wrapped to (-N/2, N/2].
std::vector<double> wavenumber_magnitudes(const std::vector<std::size_t>& dims,
                                          const std::vector<double>& spacing);

/// Unnormalized forward DFT. Throws on non-finite input.
Spectrum fft_forward(const ScalarField& f);

/// Inverse DFT with 1/N normalization, so fft_inverse(fft_forward(f)) == f
/// up to roundoff. Input is expected to be Hermitian-consistent (sourced
/// from a real field); the real part of the transform is returned.
ScalarField fft_inverse(const Spectrum& s);

namespace detail {

/// In-place style c2c transform used by the hot paths; no validation.
/// inverse == true applies the 1/N factor.
void fft_c2c(const std::vector<std::size_t>& dims, const std::complex<double>* in,
             std::complex<double>* out, bool inverse);

}  // namespace detail

}  // namespace patrec
