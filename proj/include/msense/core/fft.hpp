// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

namespace msense::fft {

using cvec = std::vector<std::complex<double>>;

/// Unnormalized forward DFT: X[k] = sum_n x[n] exp(-j 2 pi k n / N).
cvec forward(const cvec& x);

/// Unnormalized inverse DFT: x[n] = sum_k X[k] exp(+j 2 pi k n / N).
/// Callers apply their own 1/N or 1/sqrt(N) convention.
cvec inverse(const cvec& x);

/// Rotate a natural-order spectrum so that DC sits at index floor(N/2).
cvec fftshift(const cvec& x);

/// Inverse of fftshift (identical for even N).
cvec ifftshift(const cvec& x);

/// Bin frequencies for a DC-centered spectrum of length n at sample rate fs:
/// f[i] = (i - floor(n/2)) * fs / n.
std::vector<double> centered_bin_frequencies(std::size_t n, double sample_rate);

} // namespace msense::fft
