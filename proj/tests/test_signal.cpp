#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "vsense/signal.hpp"

using namespace vsense;

TEST_CASE("scene_to_taps: monostatic round trip and Doppler arithmetic") {
    TargetScene scene;
    scene.targets.push_back({{15.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}});
    auto taps = scene_to_taps(scene, {0, 0}, {0, 0}, 3e9);
    REQUIRE(taps.size() == 1);
    REQUIRE(taps[0].delay == Catch::Approx(2.0 * 15.0 / kSpeedOfLight).epsilon(1e-12));
    REQUIRE(taps[0].doppler == Catch::Approx(0.0).margin(1e-12));

    scene.targets[0].velocity = {-30.0, 0.0};
    taps = scene_to_taps(scene, {0, 0}, {0, 0}, 3e9);
    REQUIRE(taps[0].doppler == Catch::Approx(2.0 * 30.0 * 3e9 / kSpeedOfLight).epsilon(1e-12));
}

TEST_CASE("scene_to_taps: bistatic delay equals the sum of the two legs") {
    TargetScene scene;
    scene.targets.push_back({{5.0, 5.0}, {0.0, 0.0}, {1.0, 0.0}});
    Vec2 tx{0, 0}, rx{10, 0};
    auto taps = scene_to_taps(scene, tx, rx, 3e9);
    // oracle: explicit distance formula for each leg
    double leg1 = std::sqrt(5.0 * 5.0 + 5.0 * 5.0);
    double leg2 = std::sqrt(5.0 * 5.0 + 5.0 * 5.0);
    REQUIRE(taps[0].delay == Catch::Approx((leg1 + leg2) / kSpeedOfLight).epsilon(1e-12));
    REQUIRE(taps[0].delay == Catch::Approx(2.0 * std::sqrt(50.0) / kSpeedOfLight).epsilon(1e-12));
}

TEST_CASE("scene_to_taps: Doppler sign matches the range-rate finite difference") {
    Rng rng(11);
    for (int c = 0; c < 20; ++c) {
        TargetScene scene;
        Vec2 pos{rng.uniform(-20, 20), rng.uniform(-20, 20)};
        Vec2 vel{rng.uniform(-40, 40), rng.uniform(-40, 40)};
        scene.targets.push_back({pos, vel, {1.0, 0.0}});
        Vec2 tx{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        Vec2 rx{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        if ((pos - tx).norm() < 1.0 || (pos - rx).norm() < 1.0) continue;
        double carrier = 3e9;
        auto taps = scene_to_taps(scene, tx, rx, carrier);
        double h = 1e-6;
        auto range = [&](double t) {
            Vec2 p = pos + vel * t;
            return (tx - p).norm() + (p - rx).norm();
        };
        double rdot = (range(h) - range(-h)) / (2.0 * h);
        double expected = -carrier / kSpeedOfLight * rdot;
        REQUIRE(taps[0].doppler == Catch::Approx(expected).margin(1e-3 * std::abs(expected) + 1e-4));
        if (rdot < 0.0) REQUIRE(taps[0].doppler > 0.0);  // approaching => positive Doppler
    }
}

TEST_CASE("scene_to_taps: coincident target is an error") {
    TargetScene scene;
    scene.targets.push_back({{0.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}});
    REQUIRE_THROWS_AS(scene_to_taps(scene, {0, 0}, {5, 0}, 3e9), std::invalid_argument);
}

namespace {

IQBuffer random_buffer(std::size_t n, double fs, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Complex> x(n);
    for (auto& v : x) v = rng.complex_gaussian();
    return IQBuffer(std::move(x), fs);
}

}  // namespace

TEST_CASE("apply_channel: identity, integer delay, linearity") {
    auto x = random_buffer(128, 1e6, 5);

    auto y = apply_channel(x, {{0.0, 0.0, Complex(1, 0)}});
    REQUIRE(y.size() == x.size());
    REQUIRE(oracle::max_abs_diff(y.samples, x.samples) < 1e-15);

    IQBuffer imp(std::vector<Complex>(32, Complex(0, 0)), 1e6);
    imp.samples[0] = Complex(1, 0);
    auto shifted = apply_channel(imp, {{7.0 / 1e6, 0.0, Complex(1, 0)}});
    REQUIRE(shifted.size() == 39);
    for (std::size_t i = 0; i < shifted.size(); ++i) {
        if (i == 7)
            REQUIRE(std::abs(shifted.samples[i] - Complex(1, 0)) < 1e-12);
        else
            REQUIRE(std::abs(shifted.samples[i]) < 1e-12);
    }

    // literal elementwise superposition with integer-bin delays
    {
        std::vector<ChannelTap> t1 = {{3.0 / 1e6, 120.0, Complex(0.8, 0.1)}};
        std::vector<ChannelTap> t2 = {{9.0 / 1e6, -50.0, Complex(-0.2, 0.6)}};
        auto ya = apply_channel(x, t1);
        auto yb = apply_channel(x, t2);
        auto yab = apply_channel(x, {t1[0], t2[0]});
        REQUIRE(yab.size() == yb.size());  // padding follows the max delay
        double worst = 0.0;
        for (std::size_t i = 0; i < yab.size(); ++i) {
            Complex sum = (i < ya.size() ? ya.samples[i] : Complex(0, 0)) + yb.samples[i];
            worst = std::max(worst, std::abs(yab.samples[i] - sum));
        }
        REQUIRE(worst < 1e-12);
    }
    // fractional delays superpose exactly over the common support
    {
        std::vector<ChannelTap> t1 = {{3.25 / 1e6, 120.0, Complex(0.8, 0.1)}};
        std::vector<ChannelTap> t2 = {{9.5 / 1e6, -50.0, Complex(-0.2, 0.6)}};
        auto ya = apply_channel(x, t1);
        auto yb = apply_channel(x, t2);
        auto yab = apply_channel(x, {t1[0], t2[0]});
        double worst = 0.0;
        for (std::size_t i = 0; i < ya.size(); ++i)
            worst = std::max(worst, std::abs(yab.samples[i] - (ya.samples[i] + yb.samples[i])));
        REQUIRE(worst < 1e-12);
    }
}

TEST_CASE("apply_channel: static taps commute with integer time shifts") {
    auto x = random_buffer(64, 1e6, 9);
    std::vector<ChannelTap> taps = {{5.0 / 1e6, 0.0, Complex(0.7, -0.2)}};
    auto y = apply_channel(x, taps);

    const std::size_t shift = 4;
    IQBuffer xs(std::vector<Complex>(x.size() + shift, Complex(0, 0)), 1e6);
    for (std::size_t i = 0; i < x.size(); ++i) xs.samples[i + shift] = x.samples[i];
    auto ys = apply_channel(xs, taps);
    for (std::size_t i = 0; i < y.size(); ++i)
        REQUIRE(std::abs(ys.samples[i + shift] - y.samples[i]) < 1e-12);
}

TEST_CASE("apply_channel: empty tap list yields zeros; cyclic variant wraps") {
    auto x = random_buffer(16, 1.0, 3);
    auto y = apply_channel(x, {});
    REQUIRE(y.size() == x.size());
    REQUIRE(oracle::max_abs(y.samples) == 0.0);

    auto yc = apply_channel_cyclic(x, {{3.0, 0.0, Complex(1, 0)}});
    REQUIRE(yc.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        REQUIRE(std::abs(yc.samples[(i + 3) % x.size()] - x.samples[i]) < 1e-12);
}

TEST_CASE("add_noise: noiseless flag, determinism, calibrated power") {
    auto x = random_buffer(64, 1.0, 21);
    auto clean = add_noise(x, NoiseSpec::noiseless());
    REQUIRE(oracle::max_abs_diff(clean.samples, x.samples) == 0.0);

    NoiseSpec spec{10.0, 1234};
    auto n1 = add_noise(x, spec);
    auto n2 = add_noise(x, spec);
    REQUIRE(oracle::max_abs_diff(n1.samples, n2.samples) == 0.0);

    // unit-power input at 0 dB: measured noise power within 5% over >= 1e5 samples
    std::size_t big = 200000;
    std::vector<Complex> ones(big, Complex(1, 0));
    IQBuffer unit(std::move(ones), 1.0);
    auto noisy = add_noise(unit, {0.0, 99});
    double p = 0.0;
    for (std::size_t i = 0; i < big; ++i) p += std::norm(noisy.samples[i] - Complex(1, 0));
    p /= static_cast<double>(big);
    REQUIRE(p == Catch::Approx(1.0).epsilon(0.05));
}

TEST_CASE("add_noise: zero-power input with finite SNR is an error") {
    IQBuffer zeros(std::vector<Complex>(8, Complex(0, 0)), 1.0);
    REQUIRE_THROWS_AS(add_noise(zeros, NoiseSpec{20.0, 1}), std::invalid_argument);
    REQUIRE_NOTHROW(add_noise(zeros, NoiseSpec::noiseless()));
}
