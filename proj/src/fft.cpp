#include "fishrec/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace fishrec {

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }

    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= inv_n;
    }
}

void fft2d(std::vector<std::complex<double>>& a, int w, int h, bool inverse) {
    std::vector<std::complex<double>> line(std::max(w, h));
    for (int y = 0; y < h; ++y) {
        line.assign(a.begin() + static_cast<std::size_t>(y) * w,
                    a.begin() + static_cast<std::size_t>(y + 1) * w);
        fft(line, inverse);
        std::copy(line.begin(), line.end(), a.begin() + static_cast<std::size_t>(y) * w);
    }
    for (int x = 0; x < w; ++x) {
        line.resize(h);
        for (int y = 0; y < h; ++y) line[y] = a[static_cast<std::size_t>(y) * w + x];
        fft(line, inverse);
        for (int y = 0; y < h; ++y) a[static_cast<std::size_t>(y) * w + x] = line[y];
    }
}

}  // namespace fishrec
