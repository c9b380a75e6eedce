#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "vsense/envsynth.hpp"
#include "vsense/netsynth.hpp"

using namespace vsense;

namespace {

constexpr double kFmin = 3.0e9;
constexpr double kFmax = 3.1875e9;  // 16 carriers, 12.5 MHz apart
constexpr double kB0 = 12.5e6;
constexpr double kPri = 5e-4;

HopSchedule a1_schedule(HopKind kind = HopKind::linear, int n = 16) {
    return make_schedule(kind, n, kFmin, kFmax, kPri, 0, kB0);
}

}  // namespace

TEST_CASE("make_schedule: balanced/linear coupling and deterministic shuffles") {
    auto bal = a1_schedule(HopKind::balanced);
    REQUIRE(std::abs(coupling_metric(bal)) < 1e-12);
    auto lin = a1_schedule(HopKind::linear);
    REQUIRE(coupling_metric(lin) == Catch::Approx(1.0).epsilon(1e-12));

    auto p1 = make_schedule(HopKind::random_permutation, 16, kFmin, kFmax, kPri, 77, kB0);
    auto p2 = make_schedule(HopKind::random_permutation, 16, kFmin, kFmax, kPri, 77, kB0);
    for (std::size_t m = 0; m < p1.size(); ++m) REQUIRE(p1.pulses[m].f == p2.pulses[m].f);
    auto p3 = make_schedule(HopKind::random_permutation, 16, kFmin, kFmax, kPri, 78, kB0);
    bool same = true;
    for (std::size_t m = 0; m < p1.size(); ++m) same = same && p1.pulses[m].f == p3.pulses[m].f;
    REQUIRE_FALSE(same);

    REQUIRE_THROWS_AS(make_schedule(HopKind::balanced, 2, kFmin, kFmax, kPri), std::invalid_argument);
    REQUIRE_THROWS_AS(make_schedule(HopKind::balanced, 3, kFmin, kFmax, kPri), std::invalid_argument);
    REQUIRE(a1_schedule().span() == Catch::Approx(200e6).epsilon(1e-12));
}

TEST_CASE("coupling_metric matches a direct covariance computation") {
    HopSchedule s;
    s.pri = 1e-3;
    s.hop_bandwidth = 1e6;
    s.pulses = {{0.0, 2.0e9}, {1e-3, 2.3e9}, {2e-3, 2.1e9},
                {3e-3, 2.7e9}, {4e-3, 2.2e9}, {5e-3, 2.5e9}};
    // oracle: direct covariance formula
    double tb = 0, fb = 0;
    for (auto& p : s.pulses) {
        tb += p.t;
        fb += p.f;
    }
    tb /= 6;
    fb /= 6;
    double ctf = 0, ctt = 0, cff = 0;
    for (auto& p : s.pulses) {
        ctf += (p.t - tb) * (p.f - fb);
        ctt += (p.t - tb) * (p.t - tb);
        cff += (p.f - fb) * (p.f - fb);
    }
    REQUIRE(coupling_metric(s) == Catch::Approx(ctf / std::sqrt(ctt * cff)).epsilon(1e-12));

    // affine invariance
    HopSchedule s2 = s;
    for (auto& p : s2.pulses) {
        p.t = 2.5 * p.t + 1.0;
        p.f = 0.5 * p.f + 1e8;
    }
    REQUIRE(coupling_metric(s2) == Catch::Approx(coupling_metric(s)).epsilon(1e-9));
}

TEST_CASE("simulate_hops: magnitude, carrier dependence, and the phase model") {
    TargetScene scene;
    scene.targets.push_back({{12.0, 3.0}, {0.0, 0.0}, {1.0, 0.0}});
    auto sched = a1_schedule();
    auto meas = simulate_hops(scene, sched, {0, 0}, {0, 0}, NoiseSpec::noiseless());
    for (const auto& h : meas.gains) REQUIRE(std::abs(h) == Catch::Approx(1.0).epsilon(1e-12));

    // static target: measurements depend on carriers only, not pulse times
    auto sched2 = a1_schedule();
    for (auto& p : sched2.pulses) p.t *= 3.7;
    auto meas2 = simulate_hops(scene, sched2, {0, 0}, {0, 0}, NoiseSpec::noiseless());
    REQUIRE(oracle::max_abs_diff(meas.gains, meas2.gains) < 1e-12);

    // moving target: phase matches the explicit exp(-j2pi f tau(t)) evaluation
    scene.targets[0].velocity = {-25.0, 4.0};
    auto meas3 = simulate_hops(scene, sched, {0, 0}, {1.0, 0.0}, NoiseSpec::noiseless());
    for (std::size_t m = 0; m < sched.size(); ++m) {
        Vec2 p = scene.targets[0].position + scene.targets[0].velocity * sched.pulses[m].t;
        double tau = ((p - Vec2{0, 0}).norm() + (p - Vec2{1.0, 0}).norm()) / kSpeedOfLight;
        double ang = -2.0 * kPi * sched.pulses[m].f * tau;
        REQUIRE(std::abs(meas3.gains[m] - Complex(std::cos(ang), std::sin(ang))) < 1e-9);
    }
}

TEST_CASE("synthesize_range_profile: noiseless single target peaks at bin 13") {
    TargetScene scene;
    scene.targets.push_back({{10.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}});
    auto sched = a1_schedule();
    auto meas = simulate_hops(scene, sched, {0, 0}, {0, 0}, NoiseSpec::noiseless());
    auto prof = synthesize_range_profile(meas, sched);
    REQUIRE(prof.bins.size() == 16);
    REQUIRE(prof.bin_width == Catch::Approx(kSpeedOfLight / (2.0 * 200e6)).epsilon(1e-12));
    std::size_t arg = std::max_element(prof.bins.begin(), prof.bins.end()) - prof.bins.begin();
    REQUIRE(arg == 13);  // round(10.0 / 0.75)

    // oracle: dense matched filter over a 1 mm range grid agrees on the peak
    double best_r = 0.0, best_v = -1.0;
    for (double r = 0.0; r < 12.0; r += 0.001) {
        Complex acc(0, 0);
        for (std::size_t m = 0; m < sched.size(); ++m) {
            double ang = 2.0 * kPi * sched.pulses[m].f * (2.0 * r / kSpeedOfLight);
            acc += meas.gains[m] * Complex(std::cos(ang), std::sin(ang));
        }
        if (std::abs(acc) > best_v) {
            best_v = std::abs(acc);
            best_r = r;
        }
    }
    REQUIRE(std::abs(best_r - 10.0) < 0.002);
    REQUIRE(std::abs(prof.range_of(arg) - best_r) <= prof.bin_width);
}

TEST_CASE("synthesize_range_profile: A1 geometry resolves, single measurement errors") {
    TargetScene scene;
    scene.targets.push_back({{10.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}});
    scene.targets.push_back({{10.8, 0.0}, {0.0, 0.0}, {1.0, 0.0}});
    auto sched = a1_schedule();
    int ok = 0;
    const int seeds = 25;
    for (int s = 0; s < seeds; ++s) {
        auto meas = simulate_hops(scene, sched, {0, 0}, {0, 0}, {20.0, derive_seed(5, s)});
        auto prof = synthesize_range_profile(meas, sched);
        auto peaks = find_peaks(prof.bins, 0.5, 0.7, true);
        int found = 0;
        for (double r_true : {10.0, 10.8})
            for (const auto& pk : peaks)
                if (std::abs(prof.range_of(pk.index) - r_true) <= prof.bin_width) {
                    ++found;
                    break;
                }
        if (peaks.size() >= 2 && found == 2) ++ok;
    }
    REQUIRE(ok >= 24);

    HopSchedule single;
    single.pri = kPri;
    single.hop_bandwidth = kB0;
    single.pulses = {{0.0, kFmin}};
    HopMeasurement m1{{Complex(1, 0)}};
    REQUIRE_THROWS_AS(synthesize_range_profile(m1, single), std::invalid_argument);
    REQUIRE_THROWS_AS(synthesize_range_profile(HopMeasurement{}, sched), std::invalid_argument);
}

TEST_CASE("slow_time_doppler: static and moving targets land on the right bins") {
    auto sched = make_schedule(HopKind::linear, 200, 3e9, 3.0000001e9, 5e-4, 0, 1e6);
    for (auto& p : sched.pulses) p.f = 3e9;  // constant carrier
    TargetScene still;
    still.targets.push_back({{40.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}});
    auto meas = simulate_hops(still, sched, {0, 0}, {0, 0}, NoiseSpec::noiseless());
    auto spec = slow_time_doppler(meas, sched);
    REQUIRE(spec.bin_hz == Catch::Approx(10.0).epsilon(1e-9));  // CPI = 0.1 s
    std::size_t arg = std::max_element(spec.bins.begin(), spec.bins.end()) - spec.bins.begin();
    REQUIRE(std::abs(spec.freq[arg]) < spec.bin_hz / 2 + 1e-9);

    TargetScene moving;
    moving.targets.push_back({{40.0, 0.0}, {-30.0, 0.0}, {1.0, 0.0}});
    meas = simulate_hops(moving, sched, {0, 0}, {0, 0}, NoiseSpec::noiseless());
    spec = slow_time_doppler(meas, sched);
    arg = std::max_element(spec.bins.begin(), spec.bins.end()) - spec.bins.begin();
    double expected = 2.0 * 30.0 * 3e9 / kSpeedOfLight;  // 600.4 Hz
    REQUIRE(std::abs(spec.freq[arg] - expected) <= spec.bin_hz);

    HopSchedule bad = sched;
    bad.pulses[3].f = 3.1e9;
    REQUIRE_THROWS_AS(slow_time_doppler(meas, bad), std::invalid_argument);
}

TEST_CASE("slow_time_doppler: 1.5/CPI separation resolves, 0.5/CPI does not (majority)") {
    auto base = make_schedule(HopKind::linear, 200, 3e9, 3.0000001e9, 5e-4, 0, 1e6);
    for (auto& p : base.pulses) p.f = 3e9;
    const double cpi = base.cpi();
    auto run = [&](double sep_hz, std::uint64_t seed) {
        double f_c = 3e9;
        double v1 = 20.0;
        double v2 = v1 + sep_hz * kSpeedOfLight / (2.0 * f_c);
        TargetScene scene;
        scene.targets.push_back({{50.0, 0.0}, {-v1, 0.0}, {1.0, 0.0}});
        scene.targets.push_back({{58.0, 0.0}, {-v2, 0.0}, {1.0, 0.0}});
        auto meas = simulate_hops(scene, base, {0, 0}, {0, 0}, {20.0, seed});
        auto spec = slow_time_doppler(meas, base);
        auto peaks = find_peaks(spec.bins, 0.5, 0.7, true);
        return peaks.size() >= 2;
    };
    int resolved_wide = 0, resolved_narrow = 0;
    for (int s = 0; s < 100; ++s) {
        if (run(1.5 / cpi, derive_seed(31, s))) ++resolved_wide;
        if (run(0.5 / cpi, derive_seed(77, s))) ++resolved_narrow;
    }
    REQUIRE(resolved_wide > 50);
    REQUIRE(resolved_narrow < 50);
}

namespace {

// Weighted second moments of the surface in a window around its peak; returns
// the |correlation| between the two grid axes.
double ridge_correlation(const Surface2D& s, int halfwin) {
    std::size_t nx = s.x.size(), ny = s.y.size();
    std::size_t bi = 0, bj = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t j = 0; j < ny; ++j)
            if (s.at(i, j) > best) {
                best = s.at(i, j);
                bi = i;
                bj = j;
            }
    double sw = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int di = -halfwin; di <= halfwin; ++di) {
        for (int dj = -halfwin; dj <= halfwin; ++dj) {
            long long i = static_cast<long long>(bi) + di, j = static_cast<long long>(bj) + dj;
            if (i < 0 || j < 0 || i >= static_cast<long long>(nx) || j >= static_cast<long long>(ny))
                continue;
            double w = s.at(i, j) * s.at(i, j);
            double u = static_cast<double>(di), v = static_cast<double>(dj);
            sw += w;
            sx += w * u;
            sy += w * v;
            sxx += w * u * u;
            syy += w * v * v;
            sxy += w * u * v;
        }
    }
    double mx = sx / sw, my = sy / sw;
    double vxx = sxx / sw - mx * mx, vyy = syy / sw - my * my, vxy = sxy / sw - mx * my;
    return std::abs(vxy) / std::sqrt(vxx * vyy);
}

}  // namespace

TEST_CASE("joint_delay_velocity_map: peak at truth; balanced ridge is axis-aligned") {
    TargetScene scene;
    scene.targets.push_back({{10.0, 0.0}, {-3.0, 0.0}, {1.0, 0.0}});
    double tau0 = 2.0 * 10.0 / kSpeedOfLight;

    std::vector<double> delays, vels;
    for (int i = -12; i <= 12; ++i) delays.push_back(tau0 + i * 2.5e-10);
    for (int j = -12; j <= 12; ++j) vels.push_back(3.0 + j * 0.05);

    auto run = [&](HopKind kind) {
        auto sched = make_schedule(kind, 16, kFmin, kFmax, 5e-3, 0, kB0);
        auto meas = simulate_hops(scene, sched, {0, 0}, {0, 0}, NoiseSpec::noiseless());
        return joint_delay_velocity_map(meas, sched, delays, vels);
    };

    auto bal = run(HopKind::balanced);
    std::size_t bi = 0, bj = 0;
    double best = -1;
    for (std::size_t i = 0; i < delays.size(); ++i)
        for (std::size_t j = 0; j < vels.size(); ++j)
            if (bal.at(i, j) > best) {
                best = bal.at(i, j);
                bi = i;
                bj = j;
            }
    REQUIRE(bi == 12);  // noiseless on-grid truth cell
    REQUIRE(bj == 12);

    double corr_bal = ridge_correlation(bal, 3);
    double corr_lin = ridge_correlation(run(HopKind::linear), 3);
    REQUIRE(corr_bal < 0.2);
    REQUIRE(corr_lin > corr_bal);

    REQUIRE_THROWS_AS(joint_delay_velocity_map(HopMeasurement{}, a1_schedule(), {}, vels),
                      std::invalid_argument);
}

TEST_CASE("fim_delay_velocity: singularities, decoupling, and the FD oracle") {
    HopSchedule single;
    single.pri = kPri;
    single.hop_bandwidth = kB0;
    single.pulses = {{0.0, 3e9}};
    auto f1 = fim_delay_velocity(single, 20.0);
    REQUIRE(f1.singular);

    auto bal = a1_schedule(HopKind::balanced);
    auto fb = fim_delay_velocity(bal, 20.0);
    REQUIRE_FALSE(fb.singular);
    REQUIRE(std::abs(fb.coupling) < 1e-9);

    // finite-difference oracle over (tau, v, phi, a) with Schur reduction
    auto fd_fim = [&](const HopSchedule& sched) {
        const double sigma2 = db_to_power(-20.0);
        const double tbar = sched.mean_time();
        auto model = [&](std::array<double, 4> th) {
            std::vector<Complex> s(sched.size());
            for (std::size_t m = 0; m < sched.size(); ++m) {
                const auto& p = sched.pulses[m];
                double ang =
                    th[2] - 2.0 * kPi * p.f * (th[0] - 2.0 * th[1] * (p.t - tbar) / kSpeedOfLight);
                s[m] = th[3] * Complex(std::cos(ang), std::sin(ang));
            }
            return s;
        };
        std::array<double, 4> th0 = {6.7e-8, 1.0, 0.2, 1.0};
        std::array<double, 4> scale = {1e-7, 1.0, 1.0, 1.0};
        double h = 1e-7;
        std::array<std::vector<Complex>, 4> d;
        for (int i = 0; i < 4; ++i) {
            auto hi = th0, lo = th0;
            hi[i] += h * scale[i];
            lo[i] -= h * scale[i];
            auto sh = model(hi), sl = model(lo);
            d[i].resize(sh.size());
            for (std::size_t m = 0; m < sh.size(); ++m)
                d[i][m] = (sh[m] - sl[m]) / (2.0 * h * scale[i]);
        }
        std::array<std::array<double, 4>, 4> g{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double acc = 0;
                for (std::size_t m = 0; m < d[i].size(); ++m)
                    acc += (d[i][m] * std::conj(d[j][m])).real();
                g[i][j] = 2.0 / sigma2 * acc;
            }
        double c11 = g[2][2], c12 = g[2][3], c22 = g[3][3];
        double det = c11 * c22 - c12 * c12;
        auto red = [&](int i, int j) {
            double i0 = g[i][2], i1 = g[i][3], j0 = g[j][2], j1 = g[j][3];
            return g[i][j] - (i0 * (c22 * j0 - c12 * j1) + i1 * (-c12 * j0 + c11 * j1)) / det;
        };
        return Mat2{red(0, 0), red(0, 1), red(1, 0), red(1, 1)};
    };

    for (HopKind kind : {HopKind::balanced, HopKind::linear}) {
        auto sched = a1_schedule(kind);
        auto an = fim_delay_velocity(sched, 20.0).fim;
        auto fd = fd_fim(sched);
        double scale = std::max({std::abs(an.a11), std::abs(an.a12), std::abs(an.a22)});
        REQUIRE(std::abs(fd.a11 - an.a11) / scale < 1e-3);
        REQUIRE(std::abs(fd.a12 - an.a12) / scale < 1e-3);
        REQUIRE(std::abs(fd.a22 - an.a22) / scale < 1e-3);
    }
}

TEST_CASE("fim_delay_velocity: span doubling shrinks delay CRLB by >= 3.9x") {
    auto base = a1_schedule(HopKind::balanced);
    auto wide = make_schedule(HopKind::balanced, 16, kFmin - 93.75e6, kFmax + 93.75e6, kPri, 0,
                              2.0 * kB0);
    auto fb = fim_delay_velocity(base, 20.0);
    auto fw = fim_delay_velocity(wide, 20.0);
    REQUIRE(fb.crlb.a11 / fw.crlb.a11 >= 3.9);
}

TEST_CASE("fim_extended is additive over disjoint pulse subsets") {
    auto sched = a1_schedule(HopKind::random_permutation);
    double t_ref = sched.mean_time();
    HopSchedule a = sched, b = sched;
    a.pulses.assign(sched.pulses.begin(), sched.pulses.begin() + 7);
    b.pulses.assign(sched.pulses.begin() + 7, sched.pulses.end());
    auto ga = fim_extended(a, 20.0, t_ref);
    auto gb = fim_extended(b, 20.0, t_ref);
    auto g = fim_extended(sched, 20.0, t_ref);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double sum = ga[i][j] + gb[i][j];
            REQUIRE(std::abs(g[i][j] - sum) <= 1e-9 * std::max(1.0, std::abs(g[i][j])));
        }
}

namespace {

NodeLikelihood gaussian_range_node(Vec2 pos, double r_meas, double sigma, double r_max) {
    NodeLikelihood node;
    node.tx = node.rx = pos;
    for (double r = 0.0; r <= r_max; r += 0.02) {
        node.range_axis.push_back(r);
        node.loglik.push_back(-0.5 * (r - r_meas) * (r - r_meas) / (sigma * sigma));
    }
    return node;
}

}  // namespace

TEST_CASE("multistatic_fuse: exact ranges hit the true cell; one node is degenerate") {
    Vec2 target{6.0, 4.0};
    std::vector<Vec2> sites = {{0, 0}, {12, 0}, {0, 10}};
    std::vector<NodeLikelihood> nodes;
    for (auto& s : sites) nodes.push_back(gaussian_range_node(s, (target - s).norm(), 0.05, 25.0));
    PositionGrid grid{0.0, 0.0, 0.1, 0.1, 121, 101};
    auto fused = multistatic_fuse(nodes, grid);
    REQUIRE_FALSE(fused.degenerate);
    REQUIRE(std::abs(fused.position.x - target.x) < 0.051);
    REQUIRE(std::abs(fused.position.y - target.y) < 0.051);

    auto single = multistatic_fuse({nodes[0]}, grid);
    REQUIRE(single.degenerate);

    // permutation invariance of the fused log-likelihood sum
    std::vector<NodeLikelihood> perm = {nodes[2], nodes[0], nodes[1]};
    auto fused2 = multistatic_fuse(perm, grid);
    for (std::size_t i = 0; i < fused.surface.z.size(); ++i) {
        if (std::isinf(fused.surface.z[i])) {
            REQUIRE(std::isinf(fused2.surface.z[i]));
            continue;
        }
        REQUIRE(fused2.surface.z[i] ==
                Catch::Approx(fused.surface.z[i]).margin(1e-9 * std::abs(fused.surface.z[i]) + 1e-12));
    }

    NodeLikelihood bad = nodes[0];
    bad.loglik.pop_back();
    REQUIRE_THROWS_AS(multistatic_fuse({bad}, grid), std::invalid_argument);
}

TEST_CASE("multistatic_fuse: Monte-Carlo RMSE sits in the CRLB band") {
    Vec2 target{6.0, 4.0};
    std::vector<Vec2> sites = {{0, 0}, {12, 0}, {0, 10}};
    const double sigma = 0.1;
    const int trials = 200;
    PositionGrid grid{4.0, 2.0, 0.025, 0.025, 161, 161};
    double se = 0.0;
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(100, t));
        std::vector<NodeLikelihood> nodes;
        for (auto& s : sites) {
            double r = (target - s).norm() + sigma * rng.gaussian();
            nodes.push_back(gaussian_range_node(s, r, sigma, 25.0));
        }
        auto fused = multistatic_fuse(nodes, grid);
        se += (fused.position - target).norm_sq();
    }
    double rmse = std::sqrt(se / trials);
    auto crlb = localization_crlb(sites, target, sigma);
    double bound = std::sqrt(crlb.bound.trace());
    REQUIRE(rmse >= 0.8 * bound);
    REQUIRE(rmse <= 2.0 * bound);
}
