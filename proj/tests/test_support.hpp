#pragma once

// Independent oracles used across the test suites. Everything here is written
// from first principles (direct sums, brute-force enumeration) so it exercises
// none of the library implementation paths it checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "vsense/common.hpp"
#include "vsense/envsynth.hpp"
#include "vsense/otfs.hpp"

namespace oracle {

using vsense::Complex;
using vsense::kPi;

// O(N^2) unitary DFT.
inline std::vector<Complex> naive_dft(const std::vector<Complex>& x, bool inverse = false) {
    const std::size_t n = x.size();
    std::vector<Complex> out(n, Complex(0, 0));
    double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
        Complex acc(0, 0);
        for (std::size_t q = 0; q < n; ++q) {
            double ang = sign * 2.0 * kPi * static_cast<double>((k * q) % n) / static_cast<double>(n);
            acc += x[q] * Complex(std::cos(ang), std::sin(ang));
        }
        out[k] = acc / std::sqrt(static_cast<double>(n));
    }
    return out;
}

inline double max_abs_diff(const std::vector<Complex>& a, const std::vector<Complex>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(const std::vector<Complex>& a) {
    double m = 0.0;
    for (const auto& v : a) m = std::max(m, std::abs(v));
    return m;
}

// Brute-force image tree with same-segment pruning and positional dedup,
// mirroring the documented anchor enumeration rule but written independently.
inline std::size_t count_image_tree(const vsense::Map2D& map, vsense::Vec2 sensor, int max_order) {
    struct Node {
        vsense::Vec2 p;
        int last = -1;
    };
    std::vector<vsense::Vec2> all = {sensor};
    std::vector<Node> frontier = {{sensor, -1}};
    for (int order = 1; order <= max_order; ++order) {
        std::vector<Node> next;
        for (const auto& node : frontier) {
            for (int s = 0; s < static_cast<int>(map.segments.size()); ++s) {
                if (s == node.last) continue;
                const auto& seg = map.segments[s];
                vsense::Vec2 d = seg.b - seg.a;
                double len = d.norm();
                vsense::Vec2 nrm{-d.y / len, d.x / len};
                double h = (node.p - seg.a).dot(nrm);
                vsense::Vec2 img = node.p - nrm * (2.0 * h);
                bool dup = false;
                for (const auto& q : all)
                    if ((q - img).norm() < 1e-9) dup = true;
                if (dup) continue;
                all.push_back(img);
                next.push_back({img, s});
            }
        }
        frontier = std::move(next);
    }
    return all.size();
}

// Full-rate receiver for static integer-bin taps: per-frequency-bin
// zero-forcing against H[p] = sum_t g_t e^{-j2pi p l_t / MN}, then OTFS
// demodulation of the equalized stream via the direct Zak sum.
inline std::vector<Complex> zf_equalize_static(const std::vector<Complex>& y, int m, int n,
                                               const std::vector<std::pair<int, Complex>>& taps) {
    const int mn = m * n;
    auto Y = naive_dft(y);
    for (int p = 0; p < mn; ++p) {
        Complex h(0, 0);
        for (const auto& [l0, g] : taps) {
            double ang = -2.0 * kPi * static_cast<double>(p) * l0 / static_cast<double>(mn);
            h += g * Complex(std::cos(ang), std::sin(ang));
        }
        Y[p] /= h;
    }
    auto x = naive_dft(Y, true);
    // direct Zak transform: X[k,l] = (1/sqrt(N)) sum_p x[p*M+l] e^{-j2pi pk/N}
    std::vector<Complex> grid(static_cast<std::size_t>(m) * n, Complex(0, 0));
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < m; ++l) {
            Complex acc(0, 0);
            for (int p = 0; p < n; ++p) {
                double ang = -2.0 * kPi * static_cast<double>(p * k % n) / static_cast<double>(n);
                acc += x[static_cast<std::size_t>(p) * m + l] * Complex(std::cos(ang), std::sin(ang));
            }
            grid[static_cast<std::size_t>(k) * m + l] = acc / std::sqrt(static_cast<double>(n));
        }
    return grid;
}

}  // namespace oracle
