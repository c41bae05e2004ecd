#pragma once

#include <complex>
#include <vector>

namespace iled::fft {

using cvec = std::vector<std::complex<double>>;

// Unitary transform pair: both directions carry 1/sqrt(N), so
// idft(dft(x)) == x and Parseval holds with equal norms on both sides.
// Length must be a power of two.
cvec dft(const cvec& x);
cvec idft(const cvec& x);
cvec dft_real(const std::vector<double>& x);

// Unnormalized transforms for lengths of the form 2^a * 3^b (the 3/2-rule
// dealiasing grid is 3N/2). forward: X_k = sum_j x_j e^{-2*pi*i*jk/N};
// inverse: x_j = sum_k X_k e^{+2*pi*i*jk/N} (no 1/N).
cvec fft_unnormalized(const cvec& x, bool inverse);

bool is_pow2(std::size_t n);

}  // namespace iled::fft
