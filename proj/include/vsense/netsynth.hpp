#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsense/common.hpp"
#include "vsense/dft.hpp"
#include "vsense/signal.hpp"

namespace vsense {

// ============================================================================
// Hop schedules
// ============================================================================

struct HopPulse {
    double t = 0.0;  // pulse time, s
    double f = 0.0;  // carrier, Hz
};

// Space-time-frequency plan: which carrier fires when, plus the per-hop
// bandwidth that each narrowband measurement occupies.
struct HopSchedule {
    std::vector<HopPulse> pulses;
    double hop_bandwidth = 0.0;  // per-hop bandwidth B0, Hz
    double pri = 0.0;            // nominal pulse repetition interval, s

    std::size_t size() const { return pulses.size(); }

    void validate() const {
        if (hop_bandwidth <= 0.0) throw std::invalid_argument("HopSchedule: hop_bandwidth must be > 0");
        if (pri <= 0.0) throw std::invalid_argument("HopSchedule: pri must be > 0");
        for (std::size_t i = 0; i < pulses.size(); ++i) {
            if (pulses[i].f <= 0.0) throw std::invalid_argument("HopSchedule: carriers must be positive");
            if (i > 0 && pulses[i].t <= pulses[i - 1].t)
                throw std::invalid_argument("HopSchedule: pulse times must be strictly increasing");
        }
    }

    double span() const {
        if (pulses.empty()) return 0.0;
        auto [lo, hi] = std::minmax_element(pulses.begin(), pulses.end(),
                                            [](const HopPulse& a, const HopPulse& b) { return a.f < b.f; });
        return hi->f - lo->f + hop_bandwidth;
    }

    double cpi() const {
        if (pulses.empty()) return 0.0;
        return pulses.back().t - pulses.front().t + pri;
    }

    double mean_time() const {
        double s = 0.0;
        for (const auto& p : pulses) s += p.t;
        return pulses.empty() ? 0.0 : s / static_cast<double>(pulses.size());
    }
};

enum class HopKind { linear, balanced, random_permutation };

inline HopKind parse_hop_kind(const std::string& s) {
    if (s == "linear") return HopKind::linear;
    if (s == "balanced") return HopKind::balanced;
    if (s == "random-permutation" || s == "random_permutation") return HopKind::random_permutation;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

// linear: monotone carrier ramp over [f_min, f_max].
// balanced: palindromic up-down ramp; pulse times are uniform so the carrier
//   sequence being a palindrome makes Cov(t_m, f_m) vanish identically.
//   Requires n >= 4 under this family (with n <= 3 the palindrome cannot
//   reach both band edges).
// random-permutation: seed-deterministic shuffle of the linear carrier set.
// hop_bandwidth 0 selects the contiguous default (f_max-f_min)/(n-1).
inline HopSchedule make_schedule(HopKind kind, int n_pulses, double f_min, double f_max, double pri,
                                 std::uint64_t seed = 0, double hop_bandwidth = 0.0) {
    if (n_pulses < 2) throw std::invalid_argument("make_schedule: n_pulses must be >= 2");
    if (f_max <= f_min) throw std::invalid_argument("make_schedule: f_max must exceed f_min");
    if (pri <= 0.0) throw std::invalid_argument("make_schedule: pri must be > 0");

    std::vector<double> carriers(static_cast<std::size_t>(n_pulses));
    switch (kind) {
        case HopKind::linear: {
            double step = (f_max - f_min) / static_cast<double>(n_pulses - 1);
            for (int m = 0; m < n_pulses; ++m) carriers[m] = f_min + step * m;
            break;
        }
        case HopKind::balanced: {
            if (n_pulses < 4)
                throw std::invalid_argument(
                    "make_schedule: balanced pattern needs n_pulses >= 4 to reach both band edges "
                    "with zero time-frequency covariance");
            int half = n_pulses / 2;
            double step = (f_max - f_min) / static_cast<double>(half - 1);
            for (int m = 0; m < half; ++m) carriers[m] = f_min + step * m;
            if (n_pulses % 2 != 0) carriers[half] = 0.5 * (f_min + f_max);
            for (int m = 0; m < half; ++m) carriers[n_pulses - 1 - m] = carriers[m];
            break;
        }
        case HopKind::random_permutation: {
            double step = (f_max - f_min) / static_cast<double>(n_pulses - 1);
            for (int m = 0; m < n_pulses; ++m) carriers[m] = f_min + step * m;
            Rng rng(seed);
            for (std::size_t i = carriers.size() - 1; i > 0; --i)
                std::swap(carriers[i], carriers[rng.integer(i + 1)]);
            break;
        }
    }

    HopSchedule s;
    s.pri = pri;
    s.hop_bandwidth = hop_bandwidth > 0.0
                          ? hop_bandwidth
                          : (f_max - f_min) / static_cast<double>(n_pulses - 1);
    s.pulses.resize(carriers.size());
    for (std::size_t m = 0; m < carriers.size(); ++m)
        s.pulses[m] = {static_cast<double>(m) * pri, carriers[m]};
    s.validate();
    return s;
}

// Pearson correlation of (t_m, f_m); 0 by definition when either variance is 0.
inline double coupling_metric(const HopSchedule& schedule) {
    const auto& p = schedule.pulses;
    if (p.size() < 2) throw std::invalid_argument("coupling_metric: need >= 2 pulses");
    double tbar = 0.0, fbar = 0.0;
    for (const auto& q : p) {
        tbar += q.t;
        fbar += q.f;
    }
    tbar /= static_cast<double>(p.size());
    fbar /= static_cast<double>(p.size());
    double stt = 0.0, sff = 0.0, stf = 0.0;
    for (const auto& q : p) {
        stt += (q.t - tbar) * (q.t - tbar);
        sff += (q.f - fbar) * (q.f - fbar);
        stf += (q.t - tbar) * (q.f - fbar);
    }
    if (stt == 0.0 || sff == 0.0) return 0.0;
    return stf / std::sqrt(stt * sff);
}

// ============================================================================
// Slow-time measurement model
// ============================================================================

// One complex channel gain per pulse (after per-hop matched filtering).
struct HopMeasurement {
    std::vector<Complex> gains;
};

// h_m = sum_targets gain * exp(-j 2 pi f_m tau(t_m)) with tau evaluated at the
// start-of-pulse target position (stop-and-hop). This phase model is the
// measurement model every downstream estimator assumes.
inline HopMeasurement simulate_hops(const TargetScene& scene, const HopSchedule& schedule,
                                    Vec2 tx_pos, Vec2 rx_pos, const NoiseSpec& noise) {
    schedule.validate();
    HopMeasurement meas;
    meas.gains.assign(schedule.size(), Complex(0, 0));
    for (const auto& target : scene.targets) {
        for (std::size_t m = 0; m < schedule.size(); ++m) {
            const auto& pulse = schedule.pulses[m];
            Vec2 pos = target.position + target.velocity * pulse.t;
            double d_tx = (tx_pos - pos).norm();
            double d_rx = (rx_pos - pos).norm();
            if (d_tx == 0.0 || d_rx == 0.0)
                throw std::invalid_argument("simulate_hops: target coincides with tx or rx");
            double tau = (d_tx + d_rx) / kSpeedOfLight;
            double ang = -2.0 * kPi * pulse.f * tau;
            meas.gains[m] += target.amplitude * Complex(std::cos(ang), std::sin(ang));
        }
    }
    if (!noise.is_noiseless()) add_noise_inplace(meas.gains, noise);
    return meas;
}

// ============================================================================
// Synthetic wideband range profile
// ============================================================================

struct RangeProfile {
    std::vector<double> bins;  // magnitudes
    double bin_width = 0.0;    // m, always c / (2 * synthesized span)
    double offset = 0.0;       // m, range of bin 0

    double range_of(std::size_t i) const { return offset + bin_width * static_cast<double>(i); }
};

namespace detail {

inline std::vector<double> unique_sorted_carriers(const HopSchedule& s) {
    std::vector<double> f;
    f.reserve(s.size());
    for (const auto& p : s.pulses) f.push_back(p.f);
    std::sort(f.begin(), f.end());
    std::vector<double> uniq;
    for (double v : f)
        if (uniq.empty() || v - uniq.back() > 1e-3) uniq.push_back(v);
    return uniq;
}

}  // namespace detail

// Coherently stitches the per-hop gains into a range profile with resolution
// c/(2*span). Carriers on a uniform B0 grid go through a zero-filled IDFT;
// anything else falls back to a direct matched filter on the same range grid
// (identical result up to the common carrier phase, which magnitude discards).
// The profile is periodic with ambiguity c/(2*min carrier spacing).
inline RangeProfile synthesize_range_profile(const HopMeasurement& meas, const HopSchedule& schedule) {
    schedule.validate();
    if (meas.gains.size() != schedule.size())
        throw std::invalid_argument("synthesize_range_profile: measurement/schedule size mismatch");
    if (meas.gains.empty()) throw std::invalid_argument("synthesize_range_profile: empty measurement");

    auto uniq = detail::unique_sorted_carriers(schedule);
    if (uniq.size() < 2)
        throw std::invalid_argument("synthesize_range_profile: need >= 2 distinct carriers");

    double df_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < uniq.size(); ++i) df_min = std::min(df_min, uniq[i] - uniq[i - 1]);

    RangeProfile out;
    out.bin_width = kSpeedOfLight / (2.0 * schedule.span());
    out.offset = 0.0;
    const double r_max = kSpeedOfLight / (2.0 * df_min);
    const std::size_t n_bins = static_cast<std::size_t>(std::round(r_max / out.bin_width));
    const double norm = 1.0 / std::sqrt(static_cast<double>(meas.gains.size()));

    // uniform-grid test against spacing B0
    const double base = uniq.front();
    bool uniform = std::abs(df_min - schedule.hop_bandwidth) < 1e-3;
    std::vector<std::ptrdiff_t> grid_index(schedule.size());
    std::size_t grid_len = 0;
    if (uniform) {
        for (std::size_t m = 0; m < schedule.size(); ++m) {
            double k = (schedule.pulses[m].f - base) / schedule.hop_bandwidth;
            double r = std::round(k);
            if (std::abs(k - r) > 1e-6) {
                uniform = false;
                break;
            }
            grid_index[m] = static_cast<std::ptrdiff_t>(r);
            grid_len = std::max(grid_len, static_cast<std::size_t>(r) + 1);
        }
    }

    if (uniform && grid_len == n_bins) {
        std::vector<Complex> z(grid_len, Complex(0, 0));
        for (std::size_t m = 0; m < schedule.size(); ++m) z[grid_index[m]] += meas.gains[m];
        auto prof = idft(z);
        out.bins.resize(grid_len);
        double rescale = std::sqrt(static_cast<double>(grid_len)) * norm;
        for (std::size_t i = 0; i < grid_len; ++i) out.bins[i] = std::abs(prof[i]) * rescale;
        return out;
    }

    out.bins.assign(n_bins, 0.0);
    for (std::size_t i = 0; i < n_bins; ++i) {
        double tau = 2.0 * out.range_of(i) / kSpeedOfLight;
        Complex acc(0, 0);
        for (std::size_t m = 0; m < schedule.size(); ++m) {
            double ang = 2.0 * kPi * schedule.pulses[m].f * tau;
            acc += meas.gains[m] * Complex(std::cos(ang), std::sin(ang));
        }
        out.bins[i] = std::abs(acc) * norm;
    }
    return out;
}

// ============================================================================
// Slow-time Doppler
// ============================================================================

struct DopplerSpectrum {
    std::vector<double> freq;  // Hz, ascending
    std::vector<double> bins;  // magnitudes, aligned with freq
    double bin_hz = 0.0;       // 1/CPI
};

// Constant-carrier coherent integration across pulses; resolution 1/CPI.
inline DopplerSpectrum slow_time_doppler(const HopMeasurement& meas, const HopSchedule& schedule) {
    schedule.validate();
    const std::size_t n = schedule.size();
    if (n < 2) throw std::invalid_argument("slow_time_doppler: need >= 2 pulses");
    if (meas.gains.size() != n)
        throw std::invalid_argument("slow_time_doppler: measurement/schedule size mismatch");
    double f0 = schedule.pulses.front().f;
    for (const auto& p : schedule.pulses)
        if (std::abs(p.f - f0) > 1e-6 * f0)
            throw std::invalid_argument("slow_time_doppler: carrier must be constant");
    double dt = schedule.pulses[1].t - schedule.pulses[0].t;
    for (std::size_t m = 1; m < n; ++m) {
        double d = schedule.pulses[m].t - schedule.pulses[m - 1].t;
        if (std::abs(d - dt) > 1e-9 * dt)
            throw std::invalid_argument("slow_time_doppler: pulse interval must be uniform");
    }

    auto spec = fftshift(dft(meas.gains));
    DopplerSpectrum out;
    double prf = 1.0 / dt;
    out.bin_hz = prf / static_cast<double>(n);
    out.freq.resize(n);
    out.bins.resize(n);
    std::size_t h = (n + 1) / 2;
    for (std::size_t i = 0; i < n; ++i) {
        out.freq[i] = dft_bin_frequency((i + h) % n, n, prf);
        out.bins[i] = std::abs(spec[i]);
    }
    return out;
}

// ============================================================================
// Peak finding (shared by profiles and spectra)
// ============================================================================

struct Peak {
    std::size_t index = 0;
    double value = 0.0;
};

// Local maxima above rel_height * global max; neighbouring maxima are merged
// unless separated by a valley below valley_ratio * the smaller peak.
inline std::vector<Peak> find_peaks(const std::vector<double>& v, double rel_height = 0.5,
                                    double valley_ratio = 0.7, bool circular = false) {
    std::vector<Peak> peaks;
    const std::size_t n = v.size();
    if (n == 0) return peaks;
    double vmax = *std::max_element(v.begin(), v.end());
    auto at = [&](std::ptrdiff_t i) {
        if (circular) return v[static_cast<std::size_t>((i % static_cast<std::ptrdiff_t>(n) + n) % n)];
        if (i < 0 || i >= static_cast<std::ptrdiff_t>(n)) return -std::numeric_limits<double>::infinity();
        return v[static_cast<std::size_t>(i)];
    };
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < n; ++i) {
        auto si = static_cast<std::ptrdiff_t>(i);
        if (v[i] >= at(si - 1) && v[i] >= at(si + 1) && v[i] > rel_height * vmax) cand.push_back(i);
    }
    auto valley_between = [&](std::size_t a, std::size_t b) {
        double lo = std::numeric_limits<double>::infinity();
        if (!circular || b >= a) {
            for (std::size_t i = a; i <= b; ++i) lo = std::min(lo, v[i]);
        } else {
            for (std::size_t i = a; i < n; ++i) lo = std::min(lo, v[i]);
            for (std::size_t i = 0; i <= b; ++i) lo = std::min(lo, v[i]);
        }
        return lo;
    };
    for (std::size_t idx : cand) {
        if (!peaks.empty()) {
            std::size_t prev = peaks.back().index;
            double lo = valley_between(prev, idx);
            if (lo > valley_ratio * std::min(v[prev], v[idx])) {
                if (v[idx] > peaks.back().value) peaks.back() = {idx, v[idx]};
                continue;
            }
        }
        peaks.push_back({idx, v[idx]});
    }
    // circular wrap: first and last candidate may straddle index 0
    if (circular && peaks.size() > 1) {
        double lo = valley_between(peaks.back().index, peaks.front().index);
        if (lo > valley_ratio * std::min(peaks.back().value, peaks.front().value)) {
            if (peaks.back().value > peaks.front().value) peaks.front() = peaks.back();
            peaks.pop_back();
        }
    }
    return peaks;
}

// ============================================================================
// Joint delay-velocity surface
// ============================================================================

// Generic sampled surface: z is row-major over x (z[ix * y.size() + iy]).
struct Surface2D {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> z;

    double& at(std::size_t ix, std::size_t iy) { return z[ix * y.size() + iy]; }
    double at(std::size_t ix, std::size_t iy) const { return z[ix * y.size() + iy]; }
};

// Matched-filter correlation of the measurement against the slow-time phase
// model over a (round-trip delay, radial velocity) grid. Positive velocity
// means approaching (delay shrinking).
inline Surface2D joint_delay_velocity_map(const HopMeasurement& meas, const HopSchedule& schedule,
                                          const std::vector<double>& delay_grid,
                                          const std::vector<double>& velocity_grid) {
    schedule.validate();
    if (delay_grid.empty() || velocity_grid.empty())
        throw std::invalid_argument("joint_delay_velocity_map: empty grid");
    if (meas.gains.size() != schedule.size())
        throw std::invalid_argument("joint_delay_velocity_map: measurement/schedule size mismatch");
    Surface2D s;
    s.x = delay_grid;
    s.y = velocity_grid;
    s.z.assign(delay_grid.size() * velocity_grid.size(), 0.0);
    const double norm = 1.0 / std::sqrt(static_cast<double>(meas.gains.size()));
    for (std::size_t i = 0; i < delay_grid.size(); ++i) {
        for (std::size_t j = 0; j < velocity_grid.size(); ++j) {
            Complex acc(0, 0);
            for (std::size_t m = 0; m < schedule.size(); ++m) {
                const auto& p = schedule.pulses[m];
                double tau_m = delay_grid[i] - 2.0 * velocity_grid[j] * p.t / kSpeedOfLight;
                double ang = 2.0 * kPi * p.f * tau_m;
                acc += meas.gains[m] * Complex(std::cos(ang), std::sin(ang));
            }
            s.at(i, j) = std::abs(acc) * norm;
        }
    }
    return s;
}

// ============================================================================
// Fisher information / CRLB for (delay, velocity)
// ============================================================================

struct FimResult {
    Mat2 fim;               // over (round-trip delay at CPI center, radial velocity)
    bool singular = true;   // true => crlb not populated
    Mat2 crlb;
    double coupling = 0.0;  // normalized off-diagonal, in [-1, 1]
};

using Mat3 = std::array<std::array<double, 3>, 3>;

// Additive per-pulse information over (delay, velocity, common phase) at a
// caller-fixed time reference. Summing over any pulse partition is exact.
inline Mat3 fim_extended(const HopSchedule& schedule, double snr_db, double t_ref) {
    schedule.validate();
    const double sigma2 = db_to_power(-snr_db);
    Mat3 g{};
    for (const auto& p : schedule.pulses) {
        double tc = p.t - t_ref;
        std::array<double, 3> d = {-2.0 * kPi * p.f, 4.0 * kPi * p.f * tc / kSpeedOfLight, 1.0};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) g[i][j] += 2.0 / sigma2 * d[i] * d[j];
    }
    return g;
}

// Effective 2x2 FIM for (delay, velocity) under the simulate_hops phase model
// with a unit-amplitude target whose complex gain is an unknown nuisance; the
// common-phase column is removed by Schur complement, which is why the
// information depends on carrier spread rather than absolute carrier. Delay is
// referenced at the mean pulse time, so a balanced schedule decouples exactly.
inline FimResult fim_delay_velocity(const HopSchedule& schedule, double snr_db) {
    schedule.validate();
    if (schedule.size() < 1) throw std::invalid_argument("fim_delay_velocity: empty schedule");
    const double sigma2 = db_to_power(-snr_db);
    const double tbar = schedule.mean_time();
    const auto n = static_cast<double>(schedule.size());

    double m_tau = 0.0, m_v = 0.0;
    std::vector<std::array<double, 2>> d(schedule.size());
    for (std::size_t m = 0; m < schedule.size(); ++m) {
        const auto& p = schedule.pulses[m];
        d[m][0] = -2.0 * kPi * p.f;
        d[m][1] = 4.0 * kPi * p.f * (p.t - tbar) / kSpeedOfLight;
        m_tau += d[m][0];
        m_v += d[m][1];
    }
    m_tau /= n;
    m_v /= n;

    FimResult r;
    for (const auto& dm : d) {
        r.fim.a11 += 2.0 / sigma2 * (dm[0] - m_tau) * (dm[0] - m_tau);
        r.fim.a12 += 2.0 / sigma2 * (dm[0] - m_tau) * (dm[1] - m_v);
        r.fim.a22 += 2.0 / sigma2 * (dm[1] - m_v) * (dm[1] - m_v);
    }
    r.fim.a21 = r.fim.a12;
    double denom = std::sqrt(r.fim.a11 * r.fim.a22);
    r.coupling = denom > 0.0 ? r.fim.a12 / denom : 0.0;
    Mat2 inv;
    if (r.fim.invert(inv)) {
        r.singular = false;
        r.crlb = inv;
    }
    return r;
}

// ============================================================================
// Noncoherent multistatic fusion
// ============================================================================

// Per-node measurement likelihood over a range axis (optionally range x
// radial-velocity). Ranges use the bistatic convention r = c*tau/2, matching
// the range-profile axis; for a monostatic node this is plain distance.
struct NodeLikelihood {
    Vec2 tx;
    Vec2 rx;
    std::vector<double> range_axis;     // m, ascending
    std::vector<double> loglik;         // aligned with range_axis
    std::vector<double> velocity_axis;  // optional, m/s ascending
    std::vector<double> loglik_rv;      // row-major [ir * nv + iv]; empty if range-only
};

struct PositionGrid {
    double x0 = 0.0, y0 = 0.0;
    double dx = 1.0, dy = 1.0;
    std::size_t nx = 0, ny = 0;
};

struct VelocityGrid {
    double vx0 = 0.0, vy0 = 0.0;
    double dvx = 1.0, dvy = 1.0;
    std::size_t nvx = 0, nvy = 0;
};

struct FusionResult {
    Vec2 position;
    bool has_velocity = false;
    Vec2 velocity;
    Surface2D surface;       // fused log-likelihood over the position grid
    bool degenerate = false;
};

namespace detail {

inline double interp1(const std::vector<double>& axis, const std::vector<double>& val, double q) {
    if (q < axis.front() || q > axis.back()) return -std::numeric_limits<double>::infinity();
    auto it = std::upper_bound(axis.begin(), axis.end(), q);
    if (it == axis.begin()) return val.front();
    if (it == axis.end()) return val.back();
    std::size_t hi = static_cast<std::size_t>(it - axis.begin());
    std::size_t lo = hi - 1;
    double w = (q - axis[lo]) / (axis[hi] - axis[lo]);
    return val[lo] * (1.0 - w) + val[hi] * w;
}

inline double node_range(const NodeLikelihood& node, Vec2 p) {
    return 0.5 * ((node.tx - p).norm() + (p - node.rx).norm());
}

inline double node_radial_velocity(const NodeLikelihood& node, Vec2 p, Vec2 w) {
    Vec2 u1 = (node.tx - p);
    Vec2 u2 = (node.rx - p);
    double d1 = u1.norm(), d2 = u2.norm();
    if (d1 == 0.0 || d2 == 0.0) return 0.0;
    return 0.5 * (w.dot(u1 / d1) + w.dot(u2 / d2));
}

}  // namespace detail

// Sums per-node log-likelihoods over a shared position grid (noncoherent
// fusion: measurements are combined, never raw phases). Estimate is the grid
// argmax; the degeneracy flag marks geometries that cannot fix a 2D position
// (fewer than three nodes, or all nodes collinear).
inline FusionResult multistatic_fuse(const std::vector<NodeLikelihood>& nodes,
                                     const PositionGrid& grid,
                                     const std::optional<VelocityGrid>& vel_grid = std::nullopt) {
    if (nodes.empty()) throw std::invalid_argument("multistatic_fuse: need >= 1 node");
    if (grid.nx == 0 || grid.ny == 0) throw std::invalid_argument("multistatic_fuse: empty grid");
    for (const auto& node : nodes) {
        if (node.range_axis.size() < 2 || node.range_axis.size() != node.loglik.size())
            throw std::invalid_argument("multistatic_fuse: inconsistent grids on a node likelihood");
        if (!std::is_sorted(node.range_axis.begin(), node.range_axis.end()))
            throw std::invalid_argument("multistatic_fuse: range axis must be ascending");
        if (!node.loglik_rv.empty() &&
            node.loglik_rv.size() != node.range_axis.size() * node.velocity_axis.size())
            throw std::invalid_argument("multistatic_fuse: inconsistent range-velocity grid");
    }

    FusionResult res;
    res.surface.x.resize(grid.nx);
    res.surface.y.resize(grid.ny);
    for (std::size_t i = 0; i < grid.nx; ++i) res.surface.x[i] = grid.x0 + grid.dx * static_cast<double>(i);
    for (std::size_t j = 0; j < grid.ny; ++j) res.surface.y[j] = grid.y0 + grid.dy * static_cast<double>(j);
    res.surface.z.assign(grid.nx * grid.ny, 0.0);

    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 0, best_j = 0;
    for (std::size_t i = 0; i < grid.nx; ++i) {
        for (std::size_t j = 0; j < grid.ny; ++j) {
            Vec2 p{res.surface.x[i], res.surface.y[j]};
            double ll = 0.0;
            for (const auto& node : nodes)
                ll += detail::interp1(node.range_axis, node.loglik, detail::node_range(node, p));
            res.surface.at(i, j) = ll;
            if (ll > best) {
                best = ll;
                best_i = i;
                best_j = j;
            }
        }
    }
    res.position = {res.surface.x[best_i], res.surface.y[best_j]};

    res.degenerate = nodes.size() < 3;
    if (!res.degenerate) {
        Vec2 a = (nodes[0].tx + nodes[0].rx) * 0.5;
        double scale = 0.0, max_cross = 0.0;
        for (std::size_t i = 1; i < nodes.size(); ++i) {
            Vec2 mi = (nodes[i].tx + nodes[i].rx) * 0.5 - a;
            scale = std::max(scale, mi.norm());
            for (std::size_t j = i + 1; j < nodes.size(); ++j) {
                Vec2 mj = (nodes[j].tx + nodes[j].rx) * 0.5 - a;
                max_cross = std::max(max_cross, std::abs(mi.cross(mj)));
            }
        }
        if (max_cross <= 1e-9 * std::max(1.0, scale * scale)) res.degenerate = true;
    }

    bool all_rv = std::all_of(nodes.begin(), nodes.end(),
                              [](const NodeLikelihood& n) { return !n.loglik_rv.empty(); });
    if (vel_grid && all_rv) {
        double vbest = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < vel_grid->nvx; ++a) {
            for (std::size_t b = 0; b < vel_grid->nvy; ++b) {
                Vec2 w{vel_grid->vx0 + vel_grid->dvx * static_cast<double>(a),
                       vel_grid->vy0 + vel_grid->dvy * static_cast<double>(b)};
                double ll = 0.0;
                for (const auto& node : nodes) {
                    double r = detail::node_range(node, res.position);
                    double v = detail::node_radial_velocity(node, res.position, w);
                    // bilinear lookup on the (range, velocity) log-likelihood
                    if (r < node.range_axis.front() || r > node.range_axis.back() ||
                        v < node.velocity_axis.front() || v > node.velocity_axis.back()) {
                        ll = -std::numeric_limits<double>::infinity();
                        break;
                    }
                    std::size_t nv = node.velocity_axis.size();
                    auto row = [&](std::size_t ir) {
                        std::vector<double> r_row(node.velocity_axis.size());
                        for (std::size_t k = 0; k < nv; ++k) r_row[k] = node.loglik_rv[ir * nv + k];
                        return detail::interp1(node.velocity_axis, r_row, v);
                    };
                    auto it = std::upper_bound(node.range_axis.begin(), node.range_axis.end(), r);
                    std::size_t hi = std::min<std::size_t>(
                        static_cast<std::size_t>(it - node.range_axis.begin()), node.range_axis.size() - 1);
                    std::size_t lo = hi == 0 ? 0 : hi - 1;
                    double w01 = node.range_axis[hi] == node.range_axis[lo]
                                     ? 0.0
                                     : (r - node.range_axis[lo]) / (node.range_axis[hi] - node.range_axis[lo]);
                    ll += row(lo) * (1.0 - w01) + row(hi) * w01;
                }
                if (ll > vbest) {
                    vbest = ll;
                    res.velocity = w;
                    res.has_velocity = true;
                }
            }
        }
    }
    return res;
}

}  // namespace vsense
