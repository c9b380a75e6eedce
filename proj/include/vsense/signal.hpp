#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "vsense/common.hpp"
#include "vsense/dft.hpp"

namespace vsense {

// ============================================================================
// Core signal / scene / channel types
// ============================================================================

// Complex baseband sample stream. The carrier annotation records which RF
// center the baseband refers to; t0 is the absolute time of the first sample.
struct IQBuffer {
    std::vector<Complex> samples;
    double sample_rate = 0.0;  // Hz
    double carrier = 0.0;      // Hz
    double t0 = 0.0;           // s

    IQBuffer() = default;
    IQBuffer(std::vector<Complex> s, double fs, double fc = 0.0, double start = 0.0)
        : samples(std::move(s)), sample_rate(fs), carrier(fc), t0(start) {
        validate();
    }

    void validate() const {
        if (sample_rate <= 0.0) throw std::invalid_argument("IQBuffer: sample_rate must be > 0");
        if (carrier < 0.0) throw std::invalid_argument("IQBuffer: carrier must be >= 0");
    }

    std::size_t size() const { return samples.size(); }

    double mean_power() const {
        if (samples.empty()) return 0.0;
        double acc = 0.0;
        for (const auto& v : samples) acc += std::norm(v);
        return acc / static_cast<double>(samples.size());
    }
};

struct Target {
    Vec2 position;       // m
    Vec2 velocity;       // m/s
    Complex amplitude;   // complex gain
};

struct TargetScene {
    std::vector<Target> targets;
};

// One delay-Doppler channel tap.
struct ChannelTap {
    double delay = 0.0;    // s
    double doppler = 0.0;  // Hz
    Complex gain{1.0, 0.0};
};

struct NoiseSpec {
    double snr_db = std::numeric_limits<double>::infinity();  // +inf => noiseless
    std::uint64_t seed = 0;

    static NoiseSpec noiseless() { return {}; }
    bool is_noiseless() const { return std::isinf(snr_db) && snr_db > 0.0; }
};

// ============================================================================
// Scene -> taps
// ============================================================================

// Bistatic geometry: delay is the two-leg path over c; Doppler is
// (carrier/c) * (v . u_tx + v . u_rx) with u the unit vectors from the target
// toward each terminal, so an approaching target has positive Doppler.
inline std::vector<ChannelTap> scene_to_taps(const TargetScene& scene, Vec2 tx_pos, Vec2 rx_pos,
                                             double carrier, bool apply_path_loss = false) {
    std::vector<ChannelTap> taps;
    taps.reserve(scene.targets.size());
    for (const auto& t : scene.targets) {
        Vec2 to_tx = tx_pos - t.position;
        Vec2 to_rx = rx_pos - t.position;
        double d_tx = to_tx.norm();
        double d_rx = to_rx.norm();
        if (d_tx == 0.0 || d_rx == 0.0)
            throw std::invalid_argument("scene_to_taps: target coincides with tx or rx");
        ChannelTap tap;
        tap.delay = (d_tx + d_rx) / kSpeedOfLight;
        tap.doppler = carrier / kSpeedOfLight *
                      (t.velocity.dot(to_tx / d_tx) + t.velocity.dot(to_rx / d_rx));
        tap.gain = t.amplitude;
        if (apply_path_loss) tap.gain /= (d_tx * d_rx);
        taps.push_back(tap);
    }
    return taps;
}

// ============================================================================
// Channel application
// ============================================================================

namespace detail {

// Exact (band-limited) delay: multiply the padded spectrum by e^{-j2 pi f tau}.
// The ring size depends only on the input and this tap's delay, so the same
// tap produces identical samples no matter which tap set it belongs to.
inline std::vector<Complex> fractional_delay(const std::vector<Complex>& x, double delay_samples,
                                             std::size_t out_len) {
    std::size_t support = x.size() + static_cast<std::size_t>(std::ceil(delay_samples));
    std::size_t npad = next_pow2(std::max<std::size_t>(support + x.size() + 64, 2));
    npad = std::max(npad, next_pow2(out_len));
    std::vector<Complex> buf(x.begin(), x.end());
    buf.resize(npad, Complex(0, 0));
    fft_raw(buf, false);
    for (std::size_t k = 0; k < npad; ++k) {
        // normalized frequency in cycles/sample, wrapped to (-1/2, 1/2]
        double f = static_cast<double>(k) / static_cast<double>(npad);
        if (k >= (npad + 1) / 2) f -= 1.0;
        double ang = -2.0 * kPi * f * delay_samples;
        buf[k] *= Complex(std::cos(ang), std::sin(ang));
    }
    fft_raw(buf, true);
    std::vector<Complex> out(out_len, Complex(0, 0));
    for (std::size_t i = 0; i < out_len && i < npad; ++i)
        out[i] = buf[i] / static_cast<double>(npad);
    return out;
}

}  // namespace detail

// Linear time-varying channel: y(t) = sum_k gain_k x(t - tau_k) e^{j2 pi nu_k t}.
// Delays are applied in the frequency domain (exact, not rounded to samples);
// Doppler is a pure phase ramp over the buffer. Output is extended by the
// maximum delay so no energy is dropped.
inline IQBuffer apply_channel(const IQBuffer& input, const std::vector<ChannelTap>& taps) {
    input.validate();
    double max_delay = 0.0;
    for (const auto& t : taps) {
        if (t.delay < 0.0) throw std::invalid_argument("apply_channel: negative tap delay");
        max_delay = std::max(max_delay, t.delay);
    }
    std::size_t pad = static_cast<std::size_t>(std::ceil(max_delay * input.sample_rate - 1e-9));
    std::size_t out_len = input.size() + pad;

    IQBuffer out;
    out.sample_rate = input.sample_rate;
    out.carrier = input.carrier;
    out.t0 = input.t0;
    out.samples.assign(out_len, Complex(0, 0));
    for (const auto& tap : taps) {
        double d = tap.delay * input.sample_rate;
        std::vector<Complex> delayed;
        double rounded = std::round(d);
        if (std::abs(d - rounded) < 1e-9) {
            // integer-sample delay: exact shift
            std::size_t k = static_cast<std::size_t>(rounded);
            delayed.assign(out_len, Complex(0, 0));
            for (std::size_t i = 0; i + k < out_len && i < input.size(); ++i)
                delayed[i + k] = input.samples[i];
        } else {
            delayed = detail::fractional_delay(input.samples, d, out_len);
        }
        for (std::size_t n = 0; n < out_len; ++n) {
            double t = input.t0 + static_cast<double>(n) / input.sample_rate;
            double ang = 2.0 * kPi * tap.doppler * t;
            out.samples[n] += tap.gain * delayed[n] * Complex(std::cos(ang), std::sin(ang));
        }
    }
    return out;
}

// Cyclic variant: delays wrap modulo the buffer length (cyclic-prefix
// abstraction used by the OTFS frame paths). Output length equals input
// length. Doppler uses time measured from t0 over the frame.
inline IQBuffer apply_channel_cyclic(const IQBuffer& input, const std::vector<ChannelTap>& taps) {
    input.validate();
    if (input.samples.empty()) throw std::invalid_argument("apply_channel_cyclic: empty input");
    const std::size_t n = input.size();

    IQBuffer out;
    out.sample_rate = input.sample_rate;
    out.carrier = input.carrier;
    out.t0 = input.t0;
    out.samples.assign(n, Complex(0, 0));

    for (const auto& tap : taps) {
        double d = tap.delay * input.sample_rate;
        double rounded = std::round(d);
        std::vector<Complex> delayed(n);
        if (std::abs(d - rounded) < 1e-9) {
            std::size_t k = static_cast<std::size_t>(rounded) % n;
            for (std::size_t i = 0; i < n; ++i) delayed[(i + k) % n] = input.samples[i];
        } else {
            // circular fractional delay via the frame-length DFT
            std::vector<Complex> buf = input.samples;
            detail::fft_raw(buf, false);
            for (std::size_t k = 0; k < n; ++k) {
                double f = static_cast<double>(k) / static_cast<double>(n);
                if (k >= (n + 1) / 2) f -= 1.0;
                double ang = -2.0 * kPi * f * d;
                buf[k] *= Complex(std::cos(ang), std::sin(ang));
            }
            detail::fft_raw(buf, true);
            for (auto& v : buf) v /= static_cast<double>(n);
            delayed = std::move(buf);
        }
        for (std::size_t q = 0; q < n; ++q) {
            double t = static_cast<double>(q) / input.sample_rate;
            double ang = 2.0 * kPi * tap.doppler * t;
            out.samples[q] += tap.gain * delayed[q] * Complex(std::cos(ang), std::sin(ang));
        }
    }
    return out;
}

// ============================================================================
// Noise
// ============================================================================

inline void add_noise_inplace(std::vector<Complex>& samples, const NoiseSpec& spec) {
    if (spec.is_noiseless()) return;
    if (samples.empty()) throw std::invalid_argument("add_noise: empty input");
    double power = 0.0;
    for (const auto& v : samples) power += std::norm(v);
    power /= static_cast<double>(samples.size());
    if (power == 0.0)
        throw std::invalid_argument("add_noise: zero-power input with finite SNR is undefined");
    double sigma = std::sqrt(power * db_to_power(-spec.snr_db));
    Rng rng(spec.seed);
    for (auto& v : samples) v += sigma * rng.complex_gaussian();
}

// Complex circular Gaussian noise at the power implied by snr_db against the
// mean per-sample signal power. Fixed seed => identical realization.
inline IQBuffer add_noise(const IQBuffer& input, const NoiseSpec& spec) {
    IQBuffer out = input;
    add_noise_inplace(out.samples, spec);
    return out;
}

}  // namespace vsense
