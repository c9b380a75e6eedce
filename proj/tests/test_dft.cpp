#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "vsense/dft.hpp"

using namespace vsense;

TEST_CASE("dft matches the direct O(N^2) oracle on awkward lengths") {
    for (std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{16}, std::size_t{257},
                          std::size_t{1000}}) {
        Rng rng(42 + n);
        std::vector<Complex> x(n);
        for (auto& v : x) v = rng.complex_gaussian();
        auto fast = dft(x);
        auto slow = oracle::naive_dft(x);
        REQUIRE(oracle::max_abs_diff(fast, slow) < 1e-10 * std::max(1.0, oracle::max_abs(slow)));
    }
}

TEST_CASE("round trip and Parseval to 1e-12 relative up to length 4096") {
    for (std::size_t n : {std::size_t{64}, std::size_t{257}, std::size_t{1024}, std::size_t{4096}}) {
        Rng rng(7 * n);
        std::vector<Complex> x(n);
        double ex = 0.0;
        for (auto& v : x) {
            v = rng.complex_gaussian();
            ex += std::norm(v);
        }
        auto spec = dft(x);
        double es = 0.0;
        for (const auto& v : spec) es += std::norm(v);
        REQUIRE(std::abs(es - ex) < 1e-12 * ex);

        auto back = idft(spec);
        REQUIRE(oracle::max_abs_diff(back, x) < 1e-12 * oracle::max_abs(x));
    }
}

TEST_CASE("impulse gives a flat spectrum; a tone gives an impulse") {
    std::vector<Complex> imp(32, Complex(0, 0));
    imp[0] = Complex(1, 0);
    auto spec = dft(imp);
    for (const auto& v : spec) REQUIRE(std::abs(v - spec[0]) < 1e-14);

    const std::size_t n = 64, k = 9;
    std::vector<Complex> tone(n);
    for (std::size_t q = 0; q < n; ++q) {
        double ang = 2.0 * kPi * static_cast<double>(k * q) / n;
        tone[q] = Complex(std::cos(ang), std::sin(ang));
    }
    auto ts = dft(tone);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == k)
            REQUIRE(std::abs(ts[i]) == Catch::Approx(std::sqrt(double(n))).margin(1e-10));
        else
            REQUIRE(std::abs(ts[i]) < 1e-10);
    }
}

TEST_CASE("dft errors on empty input") {
    REQUIRE_THROWS_AS(dft({}), std::invalid_argument);
    REQUIRE_THROWS_AS(idft({}), std::invalid_argument);
}
