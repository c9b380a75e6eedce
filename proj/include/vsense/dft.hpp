#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "vsense/common.hpp"

namespace vsense {

// Unitary DFT pair (1/sqrt(N) both directions). Power-of-two lengths run
// radix-2 Cooley-Tukey; everything else goes through Bluestein's chirp
// transform so arbitrary lengths stay exact to near machine precision.

namespace detail {

inline bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place radix-2, no scaling.
inline void fft_pow2(std::vector<Complex>& x, bool inverse) {
    const std::size_t n = x.size();
    if (n <= 1) return;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        Complex wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            Complex w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                Complex u = x[i + j];
                Complex v = x[i + j + len / 2] * w;
                x[i + j] = u + v;
                x[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// Chirp angles use k^2 mod 2n so large k never feeds a huge argument to sin/cos.
inline Complex chirp(std::size_t k, std::size_t n, double sign) {
    std::uint64_t kk = (static_cast<std::uint64_t>(k) * k) % (2 * static_cast<std::uint64_t>(n));
    double ang = sign * kPi * static_cast<double>(kk) / static_cast<double>(n);
    return {std::cos(ang), std::sin(ang)};
}

inline void fft_bluestein(std::vector<Complex>& x, bool inverse) {
    const std::size_t n = x.size();
    const double sign = inverse ? 1.0 : -1.0;
    const std::size_t m = next_pow2(2 * n - 1);
    std::vector<Complex> a(m, Complex(0, 0)), b(m, Complex(0, 0));
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp(k, n, sign);
    for (std::size_t k = 0; k < n; ++k) {
        Complex c = chirp(k, n, -sign);
        b[k] = c;
        if (k > 0) b[m - k] = c;
    }
    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
    fft_pow2(a, true);
    for (std::size_t k = 0; k < n; ++k)
        x[k] = a[k] / static_cast<double>(m) * chirp(k, n, sign);
}

inline void fft_raw(std::vector<Complex>& x, bool inverse) {
    if (x.size() <= 1) return;
    if (is_pow2(x.size()))
        fft_pow2(x, inverse);
    else
        fft_bluestein(x, inverse);
}

}  // namespace detail

inline std::vector<Complex> dft(std::vector<Complex> x) {
    if (x.empty()) throw std::invalid_argument("dft: length must be >= 1");
    detail::fft_raw(x, false);
    double s = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (auto& v : x) v *= s;
    return x;
}

inline std::vector<Complex> idft(std::vector<Complex> x) {
    if (x.empty()) throw std::invalid_argument("idft: length must be >= 1");
    detail::fft_raw(x, true);
    double s = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (auto& v : x) v *= s;
    return x;
}

// Bin k of an N-point DFT at sample rate fs, mapped to (-fs/2, fs/2].
inline double dft_bin_frequency(std::size_t k, std::size_t n, double fs) {
    double f = static_cast<double>(k) / static_cast<double>(n) * fs;
    if (k >= (n + 1) / 2 && n > 1) f -= fs;
    return f;
}

inline std::vector<Complex> fftshift(const std::vector<Complex>& x) {
    std::vector<Complex> out(x.size());
    std::size_t h = (x.size() + 1) / 2;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[(i + h) % x.size()];
    return out;
}

}  // namespace vsense
