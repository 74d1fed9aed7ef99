#pragma once

#include <complex>
#include <vector>

namespace fishrec {

int next_pow2(int n);

// In-place radix-2 FFT; size must be a power of two. Inverse includes the
// 1/n factor.
void fft(std::vector<std::complex<double>>& a, bool inverse);

// Row-column 2-D FFT on a w x h row-major buffer; w and h powers of two.
void fft2d(std::vector<std::complex<double>>& a, int w, int h, bool inverse);

}  // namespace fishrec
