#pragma once

#include <stdexcept>
#include <vector>

#include "vsense/common.hpp"
#include "vsense/dft.hpp"
#include "vsense/signal.hpp"

namespace vsense {

// ============================================================================
// Delay-Doppler frame and OTFS modem
// ============================================================================
//
// Symbols live on an M (delay) x N (Doppler) grid. Modulation is the inverse
// symplectic finite Fourier transform to the time-frequency grid followed by
// rectangular-pulse Heisenberg synthesis; with rectangular pulses the cascade
// collapses to a per-delay-column IDFT across Doppler, placing time sample
// q = n*M + l. The whole chain is unitary.

enum class Constellation { qpsk };

inline Complex qpsk_point(int symbol) {
    static const double s = 1.0 / std::sqrt(2.0);
    switch (symbol & 3) {
        case 0: return {s, s};
        case 1: return {-s, s};
        case 2: return {-s, -s};
        default: return {s, -s};
    }
}

inline int qpsk_decide(Complex v) {
    if (v.real() >= 0.0) return v.imag() >= 0.0 ? 0 : 3;
    return v.imag() >= 0.0 ? 1 : 2;
}

struct DDFrame {
    int m_delay = 0;    // M
    int n_doppler = 0;  // N
    std::vector<Complex> grid;        // [k * M + l]
    std::vector<std::uint8_t> pilot_mask;
    std::vector<std::uint8_t> guard_mask;
    Constellation constellation = Constellation::qpsk;

    DDFrame() = default;
    DDFrame(int m, int n)
        : m_delay(m),
          n_doppler(n),
          grid(static_cast<std::size_t>(m) * n, Complex(0, 0)),
          pilot_mask(static_cast<std::size_t>(m) * n, 0),
          guard_mask(static_cast<std::size_t>(m) * n, 0) {
        if (m < 1 || n < 1) throw std::invalid_argument("DDFrame: M and N must be >= 1");
    }

    std::size_t idx(int k, int l) const {
        return static_cast<std::size_t>(k) * m_delay + l;
    }
    Complex& at(int k, int l) { return grid[idx(k, l)]; }
    Complex at(int k, int l) const { return grid[idx(k, l)]; }
    bool is_pilot(int k, int l) const { return pilot_mask[idx(k, l)] != 0; }
    bool is_guard(int k, int l) const { return guard_mask[idx(k, l)] != 0; }
    bool is_data(int k, int l) const { return !is_pilot(k, l) && !is_guard(k, l); }

    void validate() const {
        std::size_t total = static_cast<std::size_t>(m_delay) * n_doppler;
        if (grid.size() != total || pilot_mask.size() != total || guard_mask.size() != total)
            throw std::invalid_argument("DDFrame: mask/grid size mismatch");
        for (std::size_t i = 0; i < total; ++i)
            if (pilot_mask[i] && guard_mask[i])
                throw std::invalid_argument("DDFrame: pilot and guard cells must be disjoint");
    }
};

// DD grid -> time samples (length M*N).
inline IQBuffer otfs_modulate(const DDFrame& frame, double sample_rate = 1.0, double carrier = 0.0) {
    frame.validate();
    const int m = frame.m_delay;
    const int n = frame.n_doppler;

    // ISFFT: TF[p][q] = (1/sqrt(NM)) sum_{k,l} X[k,l] e^{j2pi(pk/N - ql/M)}
    std::vector<Complex> tf(static_cast<std::size_t>(m) * n);
    {
        std::vector<Complex> col(n);
        std::vector<Complex> tmp(static_cast<std::size_t>(m) * n);
        for (int l = 0; l < m; ++l) {
            for (int k = 0; k < n; ++k) col[k] = frame.at(k, l);
            auto t = idft(col);
            for (int p = 0; p < n; ++p) tmp[static_cast<std::size_t>(p) * m + l] = t[p];
        }
        std::vector<Complex> row(m);
        for (int p = 0; p < n; ++p) {
            for (int l = 0; l < m; ++l) row[l] = tmp[static_cast<std::size_t>(p) * m + l];
            auto t = dft(row);
            for (int q = 0; q < m; ++q) tf[static_cast<std::size_t>(p) * m + q] = t[q];
        }
    }

    // Heisenberg synthesis with rectangular pulses: per-symbol IDFT across
    // subcarriers, symbols concatenated in time.
    std::vector<Complex> samples(static_cast<std::size_t>(m) * n);
    std::vector<Complex> row(m);
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < m; ++q) row[q] = tf[static_cast<std::size_t>(p) * m + q];
        auto t = idft(row);
        for (int l = 0; l < m; ++l) samples[static_cast<std::size_t>(p) * m + l] = t[l];
    }
    return IQBuffer(std::move(samples), sample_rate, carrier);
}

// Time samples (length M*N) -> DD grid, exact inverse of otfs_modulate over an
// identity channel.
inline std::vector<Complex> otfs_demodulate(const std::vector<Complex>& samples, int m, int n) {
    if (m < 1 || n < 1) throw std::invalid_argument("otfs_demodulate: M and N must be >= 1");
    if (samples.size() != static_cast<std::size_t>(m) * n)
        throw std::invalid_argument("otfs_demodulate: length must equal M*N");

    // Wigner front end (per-symbol DFT), then SFFT back to delay-Doppler.
    std::vector<Complex> tf(samples.size());
    {
        std::vector<Complex> row(m);
        for (int p = 0; p < n; ++p) {
            for (int l = 0; l < m; ++l) row[l] = samples[static_cast<std::size_t>(p) * m + l];
            auto t = dft(row);
            for (int q = 0; q < m; ++q) tf[static_cast<std::size_t>(p) * m + q] = t[q];
        }
    }
    std::vector<Complex> grid(samples.size());
    {
        std::vector<Complex> row(m), col(n);
        std::vector<Complex> tmp(samples.size());
        for (int p = 0; p < n; ++p) {
            for (int q = 0; q < m; ++q) row[q] = tf[static_cast<std::size_t>(p) * m + q];
            auto t = idft(row);
            for (int l = 0; l < m; ++l) tmp[static_cast<std::size_t>(p) * m + l] = t[l];
        }
        for (int l = 0; l < m; ++l) {
            for (int p = 0; p < n; ++p) col[p] = tmp[static_cast<std::size_t>(p) * m + l];
            auto t = dft(col);
            for (int k = 0; k < n; ++k) grid[static_cast<std::size_t>(k) * m + l] = t[k];
        }
    }
    return grid;
}

inline std::vector<Complex> otfs_demodulate(const IQBuffer& input, int m, int n) {
    return otfs_demodulate(input.samples, m, n);
}

// Exact input->output DD coefficient of an integer-bin tap (delay_bin,
// doppler_bin) under the cyclic channel y[q] = g x[(q - l0) mod MN]
// e^{j2pi k0 q/(MN)}: the source cell (k_src, l_src) lands on
// ((k_src + k0) mod N, (l_src + l0) mod M) scaled by this factor times g.
inline Complex dd_tap_coefficient(int m, int n, int k_src, int l_src, int delay_bin, int doppler_bin) {
    int mn = m * n;
    long long labs = (static_cast<long long>(l_src) + delay_bin) % m;
    if (labs < 0) labs += m;
    double ang = 2.0 * kPi * static_cast<double>(doppler_bin) * static_cast<double>(labs) /
                 static_cast<double>(mn);
    Complex f(std::cos(ang), std::sin(ang));
    bool wrapped = l_src + (delay_bin % m + m) % m >= m;
    if (wrapped) {
        double wang = -2.0 * kPi * static_cast<double>(k_src) / static_cast<double>(n);
        f *= Complex(std::cos(wang), std::sin(wang));
    }
    return f;
}

}  // namespace vsense
