#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsense/common.hpp"
#include "vsense/dft.hpp"
#include "vsense/otfs.hpp"
#include "vsense/signal.hpp"

namespace vsense {

// ============================================================================
// Decimation and spectrum folding
// ============================================================================

struct SamplerSpec {
    double nyquist_rate = 0.0;  // Hz, rate of the full-rate signal
    int decimation = 1;         // L
    int phase = 0;              // kept sample offset in [0, L)

    double effective_rate() const { return nyquist_rate / decimation; }

    void validate() const {
        if (nyquist_rate <= 0.0) throw std::invalid_argument("SamplerSpec: nyquist_rate must be > 0");
        if (decimation < 1) throw std::invalid_argument("SamplerSpec: decimation must be >= 1");
        if (phase < 0 || phase >= decimation)
            throw std::invalid_argument("SamplerSpec: phase must lie in [0, L)");
    }
};

struct FrameMeta {
    int m_delay = 0;
    int n_doppler = 0;
    double carrier = 0.0;
};

// Complex samples at the decimated rate. frame_meta is filled when the capture
// carries an OTFS frame (length must then equal M*N/L).
struct FoldedCapture {
    std::vector<Complex> samples;
    SamplerSpec sampler;
    FrameMeta frame_meta;

    void validate_frame() const {
        sampler.validate();
        if (frame_meta.m_delay < 1 || frame_meta.n_doppler < 1)
            throw std::invalid_argument("FoldedCapture: frame_meta not set");
        std::size_t expect = static_cast<std::size_t>(frame_meta.m_delay) * frame_meta.n_doppler /
                             sampler.decimation;
        if (samples.size() != expect)
            throw std::invalid_argument("FoldedCapture: length must equal M*N/L");
    }
};

// Keeps samples at indices phase, phase+L, ... Input length must divide by L
// (error, never a silent pad).
inline FoldedCapture decimate(const IQBuffer& input, const SamplerSpec& sampler) {
    input.validate();
    sampler.validate();
    if (input.size() % static_cast<std::size_t>(sampler.decimation) != 0)
        throw std::invalid_argument("decimate: input length must be divisible by L");
    FoldedCapture cap;
    cap.sampler = sampler;
    cap.frame_meta.carrier = input.carrier;
    cap.samples.reserve(input.size() / sampler.decimation);
    for (std::size_t i = static_cast<std::size_t>(sampler.phase); i < input.size();
         i += static_cast<std::size_t>(sampler.decimation))
        cap.samples.push_back(input.samples[i]);
    return cap;
}

// Aliasing operator on a unitary spectrum: out[k] = (1/sqrt(L)) sum_l
// full[k + l*P/L] (with a per-alias phase twist when the kept-sample phase is
// nonzero). With this normalization dft(decimate(x)) == fold_spectrum(dft(x))
// exactly.
inline std::vector<Complex> fold_spectrum(const std::vector<Complex>& full_spectrum, int L,
                                          int phase = 0) {
    if (L < 1) throw std::invalid_argument("fold_spectrum: L must be >= 1");
    const std::size_t p = full_spectrum.size();
    if (p == 0 || p % static_cast<std::size_t>(L) != 0)
        throw std::invalid_argument("fold_spectrum: length must be divisible by L");
    const std::size_t out_len = p / static_cast<std::size_t>(L);
    std::vector<Complex> out(out_len, Complex(0, 0));
    const double scale = 1.0 / std::sqrt(static_cast<double>(L));
    for (std::size_t k = 0; k < out_len; ++k) {
        Complex acc(0, 0);
        for (int l = 0; l < L; ++l) {
            std::size_t src = k + static_cast<std::size_t>(l) * out_len;
            Complex v = full_spectrum[src];
            if (phase != 0) {
                double ang = 2.0 * kPi * static_cast<double>(src) * static_cast<double>(phase) /
                             static_cast<double>(p);
                v *= Complex(std::cos(ang), std::sin(ang));
            }
            acc += v;
        }
        out[k] = acc * scale;
    }
    return out;
}

// ============================================================================
// Pilot landing-zone design
// ============================================================================

struct GuardRadius {
    int doppler = 1;  // max |Doppler-bin| spread the plan protects
    int delay = 0;    // max delay-bin spread the plan protects
};

struct PilotCell {
    int doppler = 0;
    int delay = 0;
    double amplitude = 1.0;
};

struct FoldedCell {
    int doppler = 0;
    int row = 0;  // folded delay row in [0, M/L)
};

// Controlled-aliasing pilot plan. Keeping every L-th time sample of an OTFS
// frame resamples the delay axis: the capture, demodulated as an (M/L) x N
// frame, exposes exactly the full-grid cells whose delay row satisfies
// row mod L == sampler phase. A pilot at delay l_p therefore lights up for
// channel delays l0 with (l_p + l0) mod L == phase, and the folded row it
// lands on recovers l0 in full. Pilots are placed on pairwise-distinct
// residues so any in-spread tap fires exactly one pilot, and on separated
// Doppler bands so the landing zones stay pairwise disjoint.
struct PilotPlan {
    int m_delay = 0;
    int n_doppler = 0;
    int decimation = 1;
    int phase = 0;
    GuardRadius guard;
    std::vector<PilotCell> pilots;
    std::vector<std::vector<FoldedCell>> landing_zones;  // aligned with pilots

    int folded_rows() const { return m_delay / decimation; }

    // Channel delays this pilot can observe within the guarded spread.
    std::vector<int> covered_delays(std::size_t pilot) const {
        std::vector<int> out;
        const auto& pc = pilots[pilot];
        for (int l0 = 0; l0 <= guard.delay && l0 < m_delay; ++l0)
            if ((pc.delay + l0) % decimation == phase) out.push_back(l0);
        return out;
    }
};

inline PilotPlan design_pilot_plan(int m, int n, int L, int n_pilots, GuardRadius guard,
                                   double pilot_boost_db = 30.0, int phase = 0) {
    if (m < 1 || n < 1 || L < 1) throw std::invalid_argument("design_pilot_plan: bad dimensions");
    if (m % L != 0) throw std::invalid_argument("design_pilot_plan: L must divide M");
    if (phase < 0 || phase >= L) throw std::invalid_argument("design_pilot_plan: bad phase");
    if (n_pilots < 1) throw std::invalid_argument("design_pilot_plan: need >= 1 pilot");
    const int classes = m / L;
    if (n_pilots > classes)
        throw std::invalid_argument(
            "design_pilot_plan: capacity exceeded: " + std::to_string(n_pilots) + " pilots > " +
            std::to_string(classes) + " distinct folded residue classes (M/L) along the delay axis");
    if (n_pilots * (2 * guard.doppler + 1) > n)
        throw std::invalid_argument(
            "design_pilot_plan: capacity exceeded: " + std::to_string(n_pilots) +
            " Doppler bands of width " + std::to_string(2 * guard.doppler + 1) + " > N = " +
            std::to_string(n));
    if (guard.delay >= m) throw std::invalid_argument("design_pilot_plan: delay guard exceeds M");

    PilotPlan plan;
    plan.m_delay = m;
    plan.n_doppler = n;
    plan.decimation = L;
    plan.phase = phase;
    plan.guard = guard;

    // Delay stride L+1 walks one folded residue class per step (and one
    // visibility residue mod L per step); plain spreading when L+1 shares a
    // factor with M or when there is no folding at all.
    long long stride = L + 1;
    if (L == 1 || std::gcd(static_cast<long long>(m), stride) != 1) stride = std::max(1, m / n_pilots);
    const double amp = db_to_amplitude(pilot_boost_db);
    for (int s = 0; s < n_pilots; ++s) {
        PilotCell pc;
        pc.delay = static_cast<int>((stride * s) % m);
        pc.doppler = static_cast<int>((static_cast<long long>(s) * n / n_pilots) % n);
        pc.amplitude = amp;
        plan.pilots.push_back(pc);
    }
    for (int i = 0; i < n_pilots; ++i)
        for (int j = i + 1; j < n_pilots; ++j)
            if (plan.pilots[i].delay % classes == plan.pilots[j].delay % classes)
                throw std::invalid_argument(
                    "design_pilot_plan: pilot delays collide modulo M/L residue classes");

    // Landing zones: for every guarded channel spread, the folded cells this
    // pilot's image can occupy.
    plan.landing_zones.resize(plan.pilots.size());
    for (std::size_t s = 0; s < plan.pilots.size(); ++s) {
        const auto& pc = plan.pilots[s];
        for (int l0 : plan.covered_delays(s)) {
            int row = ((pc.delay + l0 - phase) / L) % plan.folded_rows();
            for (int dk = -guard.doppler; dk <= guard.doppler; ++dk) {
                int k = ((pc.doppler + dk) % n + n) % n;
                plan.landing_zones[s].push_back({k, row});
            }
        }
    }
    // disjointness check over occupied cells
    std::vector<int> owner(static_cast<std::size_t>(n) * plan.folded_rows(), -1);
    for (std::size_t s = 0; s < plan.landing_zones.size(); ++s) {
        for (const auto& c : plan.landing_zones[s]) {
            auto& o = owner[static_cast<std::size_t>(c.doppler) * plan.folded_rows() + c.row];
            if (o >= 0 && o != static_cast<int>(s))
                throw std::invalid_argument(
                    "design_pilot_plan: landing zones overlap; reduce guard radius or pilots");
            o = static_cast<int>(s);
        }
    }
    return plan;
}

// Transmit-side frame layout: boosted impulse pilots with a rectangular guard
// (Doppler both sides, delay ahead, matching how taps move energy) and QPSK
// data everywhere else.
inline DDFrame build_frame(const PilotPlan& plan, Rng& rng) {
    DDFrame frame(plan.m_delay, plan.n_doppler);
    for (const auto& pc : plan.pilots) {
        frame.at(pc.doppler, pc.delay) = Complex(pc.amplitude, 0.0);
        frame.pilot_mask[frame.idx(pc.doppler, pc.delay)] = 1;
    }
    for (const auto& pc : plan.pilots) {
        for (int dk = -plan.guard.doppler; dk <= plan.guard.doppler; ++dk) {
            for (int dl = 0; dl <= plan.guard.delay; ++dl) {
                int k = ((pc.doppler + dk) % plan.n_doppler + plan.n_doppler) % plan.n_doppler;
                int l = (pc.delay + dl) % plan.m_delay;
                if (!frame.is_pilot(k, l)) frame.guard_mask[frame.idx(k, l)] = 1;
            }
        }
    }
    for (int k = 0; k < plan.n_doppler; ++k)
        for (int l = 0; l < plan.m_delay; ++l)
            if (frame.is_data(k, l))
                frame.at(k, l) = qpsk_point(static_cast<int>(rng.integer(4)));
    return frame;
}

inline DDFrame build_frame_pilot_only(const PilotPlan& plan) {
    Rng unused(0);
    DDFrame frame = build_frame(plan, unused);
    for (int k = 0; k < plan.n_doppler; ++k)
        for (int l = 0; l < plan.m_delay; ++l)
            if (frame.is_data(k, l)) frame.at(k, l) = Complex(0, 0);
    return frame;
}

// ============================================================================
// Pilot-based estimation from a folded capture
// ============================================================================

struct TapBinEstimate {
    int delay_bin = 0;
    int doppler_bin = 0;  // signed, in [-N/2, N/2)
    Complex gain{0.0, 0.0};
};

struct PilotEstimate {
    std::vector<TapBinEstimate> bins;
    std::vector<ChannelTap> taps;  // bins converted through the sampler rates
    bool collision = false;        // pilot-scale energy outside every zone
};

namespace detail {

// Demodulate the decimated stream as an (M/L) x N frame; by the Zak-domain
// identity this equals the full DD grid restricted to rows == phase (mod L).
inline std::vector<Complex> folded_dd_grid(const FoldedCapture& cap) {
    cap.validate_frame();
    return otfs_demodulate(cap.samples, cap.frame_meta.m_delay / cap.sampler.decimation,
                           cap.frame_meta.n_doppler);
}

inline int signed_doppler(int k, int kp, int n) {
    int d = ((k - kp) % n + n) % n;
    if (d >= (n + 1) / 2) d -= n;
    return d;
}

}  // namespace detail

// Scans each landing zone for peaks above threshold_db over the zone noise
// floor, maps folded indices back through the plan's residue assignment to
// absolute delay/Doppler bins, and reads gains with the known modulation
// phase factors undone. Pilot-scale energy in the guard ring around the zones
// raises the collision flag (estimates are still returned).
inline PilotEstimate estimate_from_pilots(const FoldedCapture& capture, const PilotPlan& plan,
                                          double threshold_db = 12.0, double rel_gate_db = 20.0) {
    capture.validate_frame();
    if (capture.frame_meta.m_delay != plan.m_delay ||
        capture.frame_meta.n_doppler != plan.n_doppler ||
        capture.sampler.decimation != plan.decimation || capture.sampler.phase != plan.phase)
        throw std::invalid_argument("estimate_from_pilots: capture does not match the plan");

    const int n = plan.n_doppler;
    const int rows = plan.folded_rows();
    const int mn = plan.m_delay * plan.n_doppler;
    auto grid = detail::folded_dd_grid(capture);
    auto mag = [&](int k, int row) { return std::abs(grid[static_cast<std::size_t>(k) * rows + row]); };

    std::vector<int> owner(static_cast<std::size_t>(n) * rows, -1);
    for (std::size_t s = 0; s < plan.landing_zones.size(); ++s)
        for (const auto& c : plan.landing_zones[s])
            owner[static_cast<std::size_t>(c.doppler) * rows + c.row] = static_cast<int>(s);

    PilotEstimate est;
    const double thresh = db_to_amplitude(threshold_db);
    const double rel_gate = db_to_amplitude(rel_gate_db);
    double global_peak = 0.0;
    for (std::size_t s = 0; s < plan.landing_zones.size(); ++s)
        for (const auto& c : plan.landing_zones[s]) global_peak = std::max(global_peak, mag(c.doppler, c.row));

    for (std::size_t s = 0; s < plan.landing_zones.size(); ++s) {
        const auto& zone = plan.landing_zones[s];
        if (zone.empty()) continue;
        std::vector<double> mags;
        mags.reserve(zone.size());
        for (const auto& c : zone) mags.push_back(mag(c.doppler, c.row));
        std::vector<double> sorted = mags;
        std::sort(sorted.begin(), sorted.end());
        double floor = std::max(sorted[sorted.size() / 2], 1e-300);

        const auto& pc = plan.pilots[s];
        for (std::size_t ci = 0; ci < zone.size(); ++ci) {
            double v = mags[ci];
            if (v < floor * thresh) continue;
            if (v * rel_gate < global_peak) continue;
            // local max across the zone's Doppler extent at this row
            bool is_max = true;
            for (std::size_t cj = 0; cj < zone.size(); ++cj)
                if (zone[cj].row == zone[ci].row && mags[cj] > v) is_max = false;
            if (!is_max) continue;

            TapBinEstimate tap;
            tap.doppler_bin = detail::signed_doppler(zone[ci].doppler, pc.doppler, n);
            tap.delay_bin =
                ((zone[ci].row * plan.decimation + plan.phase - pc.delay) % plan.m_delay +
                 plan.m_delay) % plan.m_delay;
            Complex coeff =
                dd_tap_coefficient(plan.m_delay, n, pc.doppler, pc.delay, tap.delay_bin, tap.doppler_bin);
            tap.gain = grid[static_cast<std::size_t>(zone[ci].doppler) * rows + zone[ci].row] /
                       (coeff * pc.amplitude);
            est.bins.push_back(tap);
        }
    }

    // guard ring: cells adjacent to a zone, owned by nobody
    for (std::size_t s = 0; s < plan.landing_zones.size(); ++s) {
        for (const auto& c : plan.landing_zones[s]) {
            for (int dk = -1; dk <= 1; ++dk) {
                for (int dr = -1; dr <= 1; ++dr) {
                    int k = ((c.doppler + dk) % n + n) % n;
                    int r = ((c.row + dr) % rows + rows) % rows;
                    if (owner[static_cast<std::size_t>(k) * rows + r] >= 0) continue;
                    double v = mag(k, r);
                    if (v * rel_gate >= global_peak && global_peak > 0.0) est.collision = true;
                }
            }
        }
    }

    const double fs = capture.sampler.nyquist_rate;
    for (const auto& b : est.bins) {
        ChannelTap t;
        t.delay = static_cast<double>(b.delay_bin) / fs;
        t.doppler = static_cast<double>(b.doppler_bin) * fs / static_cast<double>(mn);
        t.gain = b.gain;
        est.taps.push_back(t);
    }
    return est;
}

// ============================================================================
// Iterative estimate / demodulate / cancel receiver
// ============================================================================

struct ReceiverResult {
    std::vector<TapBinEstimate> taps;
    std::vector<ChannelTap> channel;
    std::vector<Complex> decided;           // [k * M + l], 0 where undecided
    std::vector<std::uint8_t> decided_mask; // [k * M + l]
    std::vector<double> residual_history;   // capture-domain energy per iteration
    int iterations = 0;
    bool collision = false;
    bool converged = false;
};

namespace detail {

// Reconstruct the decided-data-only frame through the estimated channel and
// decimate it into the capture domain.
inline std::vector<Complex> reconstruct_data_capture(const PilotPlan& plan,
                                                     const std::vector<Complex>& decided,
                                                     const std::vector<TapBinEstimate>& taps,
                                                     const SamplerSpec& sampler) {
    DDFrame frame(plan.m_delay, plan.n_doppler);
    frame.grid = decided;
    IQBuffer x = otfs_modulate(frame, sampler.nyquist_rate, 0.0);
    std::vector<ChannelTap> ch;
    const int mn = plan.m_delay * plan.n_doppler;
    for (const auto& t : taps) {
        ChannelTap c;
        c.delay = static_cast<double>(t.delay_bin) / sampler.nyquist_rate;
        c.doppler = static_cast<double>(t.doppler_bin) * sampler.nyquist_rate / mn;
        c.gain = t.gain;
        ch.push_back(c);
    }
    IQBuffer y = apply_channel_cyclic(x, ch);
    auto cap = decimate(y, sampler);
    return cap.samples;
}

inline double energy(const std::vector<Complex>& v) {
    double e = 0.0;
    for (const auto& z : v) e += std::norm(z);
    return e;
}

}  // namespace detail

// Loop: (1) estimate taps from the pilot zones of the running residual,
// (2) equalize and hard-decide the data cells observable through the
// estimated taps (joint nearest-point decision when two undecided symbols
// superpose in one folded cell), (3) re-modulate the decided data through the
// estimated channel, decimate, subtract, (4) repeat until the residual energy
// decrease falls under stop_tol or max_iters. The best-residual state is kept
// when a later iteration regresses.
inline ReceiverResult iterative_receiver(const FoldedCapture& capture, const PilotPlan& plan,
                                         const DDFrame& frame_template, int max_iters = 10,
                                         double stop_tol = 1e-4, double threshold_db = 12.0) {
    capture.validate_frame();
    frame_template.validate();
    if (max_iters < 1) throw std::invalid_argument("iterative_receiver: max_iters must be >= 1");
    const int m = plan.m_delay;
    const int n = plan.n_doppler;
    const int L = plan.decimation;
    const int rows = plan.folded_rows();

    ReceiverResult best;
    double best_resid = std::numeric_limits<double>::infinity();

    std::vector<Complex> decided(static_cast<std::size_t>(m) * n, Complex(0, 0));
    std::vector<std::uint8_t> decided_mask(static_cast<std::size_t>(m) * n, 0);
    std::vector<double> history;
    bool converged = false;
    bool collision = false;
    int iter = 0;

    for (; iter < max_iters; ++iter) {
        // (1) taps from pilot zones, with the latest decided data cancelled
        std::vector<TapBinEstimate> taps;
        {
            FoldedCapture clean = capture;
            if (!history.empty() && !best.taps.empty()) {
                auto recon = detail::reconstruct_data_capture(plan, decided, best.taps, capture.sampler);
                for (std::size_t i = 0; i < clean.samples.size(); ++i) clean.samples[i] -= recon[i];
            }
            auto est = estimate_from_pilots(clean, plan, threshold_db);
            taps = est.bins;
            collision = est.collision;
        }
        if (taps.empty() && best.taps.empty()) {
            history.push_back(detail::energy(capture.samples));
            break;
        }
        if (taps.empty()) taps = best.taps;

        // (2) decode observable data cells against the fresh taps
        auto grid = detail::folded_dd_grid(capture);
        std::vector<Complex> new_decided = decided;
        std::vector<std::uint8_t> new_mask = decided_mask;
        for (int k = 0; k < n; ++k) {
            for (int row = 0; row < rows; ++row) {
                int labs = plan.phase + row * L;  // absolute delay row observed
                Complex obs = grid[static_cast<std::size_t>(k) * rows + row];
                struct Contrib {
                    int k_src, l_src;
                    Complex coeff;
                };
                std::vector<Contrib> unknowns;
                for (const auto& t : taps) {
                    int k_src = ((k - t.doppler_bin) % n + n) % n;
                    int l_src = ((labs - t.delay_bin) % m + m) % m;
                    Complex coeff =
                        t.gain * dd_tap_coefficient(m, n, k_src, l_src, t.delay_bin, t.doppler_bin);
                    if (frame_template.is_pilot(k_src, l_src)) {
                        obs -= coeff * frame_template.at(k_src, l_src);
                    } else if (frame_template.is_guard(k_src, l_src)) {
                        // guard cells are zero by construction
                    } else if (new_mask[frame_template.idx(k_src, l_src)]) {
                        obs -= coeff * new_decided[frame_template.idx(k_src, l_src)];
                    } else {
                        unknowns.push_back({k_src, l_src, coeff});
                    }
                }
                if (unknowns.empty() || unknowns.size() > 2) continue;
                // joint nearest-point QPSK decision over the unknowns
                double best_d = std::numeric_limits<double>::infinity();
                std::vector<int> best_sym(unknowns.size(), 0);
                int combos = unknowns.size() == 1 ? 4 : 16;
                for (int c = 0; c < combos; ++c) {
                    Complex acc = obs;
                    int cc = c;
                    for (std::size_t u = 0; u < unknowns.size(); ++u) {
                        acc -= unknowns[u].coeff * qpsk_point(cc & 3);
                        cc >>= 2;
                    }
                    double d = std::norm(acc);
                    if (d < best_d) {
                        best_d = d;
                        cc = c;
                        for (std::size_t u = 0; u < unknowns.size(); ++u) {
                            best_sym[u] = cc & 3;
                            cc >>= 2;
                        }
                    }
                }
                for (std::size_t u = 0; u < unknowns.size(); ++u) {
                    std::size_t id = frame_template.idx(unknowns[u].k_src, unknowns[u].l_src);
                    new_decided[id] = qpsk_point(best_sym[u]);
                    new_mask[id] = 1;
                }
            }
        }

        // (3) reconstruct and measure the capture-domain residual
        auto recon = detail::reconstruct_data_capture(plan, new_decided, taps, capture.sampler);
        std::vector<Complex> resid = capture.samples;
        // include the pilots (and their channel images) in the reconstruction
        {
            DDFrame pframe(m, n);
            for (const auto& pc : plan.pilots) pframe.at(pc.doppler, pc.delay) = Complex(pc.amplitude, 0);
            std::vector<Complex> pil = detail::reconstruct_data_capture(plan, pframe.grid, taps, capture.sampler);
            for (std::size_t i = 0; i < resid.size(); ++i) resid[i] -= recon[i] + pil[i];
        }
        double r = detail::energy(resid);
        history.push_back(r);

        decided = std::move(new_decided);
        decided_mask = std::move(new_mask);

        if (r < best_resid) {
            best_resid = r;
            best.taps = taps;
            best.decided = decided;
            best.decided_mask = decided_mask;
        }
        if (history.size() >= 2) {
            double prev = history[history.size() - 2];
            if (prev - r < stop_tol * std::max(prev, 1e-300) && !collision) {
                converged = true;
                ++iter;
                break;
            }
        }
    }

    best.residual_history = std::move(history);
    best.iterations = iter;
    best.collision = collision;
    best.converged = converged && !collision;
    if (best.decided.empty()) {
        best.decided = std::move(decided);
        best.decided_mask = std::move(decided_mask);
    }
    const double fs = capture.sampler.nyquist_rate;
    const int mn = m * n;
    for (const auto& b : best.taps) {
        ChannelTap t;
        t.delay = static_cast<double>(b.delay_bin) / fs;
        t.doppler = static_cast<double>(b.doppler_bin) * fs / mn;
        t.gain = b.gain;
        best.channel.push_back(t);
    }
    return best;
}

// ============================================================================
// Range-velocity rendering
// ============================================================================

struct BinGeometry {
    double sample_rate = 0.0;  // Hz (full Nyquist rate)
    double carrier = 0.0;      // Hz
    int m_delay = 0;
    int n_doppler = 0;
};

// Rasterizes tap estimates onto meters x meters-per-second axes:
// range = c tau / 2, velocity = c nu / (2 f_c).
inline Surface2D range_velocity_profile(const std::vector<TapBinEstimate>& taps,
                                        const BinGeometry& geom) {
    if (geom.sample_rate <= 0.0 || geom.carrier <= 0.0 || geom.m_delay < 1 || geom.n_doppler < 1)
        throw std::invalid_argument("range_velocity_profile: bad bin geometry");
    Surface2D s;
    const int mn = geom.m_delay * geom.n_doppler;
    s.x.resize(geom.m_delay);
    for (int l = 0; l < geom.m_delay; ++l)
        s.x[l] = static_cast<double>(l) * kSpeedOfLight / (2.0 * geom.sample_rate);
    s.y.resize(geom.n_doppler);
    for (int i = 0; i < geom.n_doppler; ++i) {
        int k_signed = i - geom.n_doppler / 2;
        double nu = static_cast<double>(k_signed) * geom.sample_rate / mn;
        s.y[i] = kSpeedOfLight * nu / (2.0 * geom.carrier);
    }
    s.z.assign(s.x.size() * s.y.size(), 0.0);
    for (const auto& t : taps) {
        int row = t.doppler_bin + geom.n_doppler / 2;
        if (t.delay_bin < 0 || t.delay_bin >= geom.m_delay || row < 0 || row >= geom.n_doppler)
            continue;
        s.at(static_cast<std::size_t>(t.delay_bin), static_cast<std::size_t>(row)) += std::abs(t.gain);
    }
    return s;
}

inline Surface2D range_velocity_profile(const FoldedCapture& capture, const PilotPlan& plan,
                                        double carrier, double threshold_db = 12.0) {
    auto est = estimate_from_pilots(capture, plan, threshold_db);
    BinGeometry g;
    g.sample_rate = capture.sampler.nyquist_rate;
    g.carrier = carrier;
    g.m_delay = plan.m_delay;
    g.n_doppler = plan.n_doppler;
    return range_velocity_profile(est.bins, g);
}

}  // namespace vsense
