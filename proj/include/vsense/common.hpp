#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsense {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr const char* kVersion = "vsense 0.1.0";

inline double db_to_power(double db) { return std::pow(10.0, db / 10.0); }
inline double power_to_db(double p) { return 10.0 * std::log10(p); }
inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

// ============================================================================
// 2D geometry
// ============================================================================

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    double norm_sq() const { return x * x + y * y; }

    Vec2 unit() const {
        double n = norm();
        if (n == 0.0)
            throw std::invalid_argument("Vec2::unit: zero vector has no direction");
        return {x / n, y / n};
    }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Symmetric 2x2 matrix, enough linear algebra for normal equations and CRLBs.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

    Mat2 operator+(const Mat2& o) const {
        return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22};
    }
    Mat2 operator*(double s) const { return {a11 * s, a12 * s, a21 * s, a22 * s}; }

    Vec2 operator*(const Vec2& v) const {
        return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y};
    }

    double det() const { return a11 * a22 - a12 * a21; }
    double trace() const { return a11 + a22; }

    bool invert(Mat2& out) const {
        double d = det();
        double scale = std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
        if (scale == 0.0 || std::abs(d) < 1e-14 * scale * scale) return false;
        out = {a22 / d, -a12 / d, -a21 / d, a11 / d};
        return true;
    }

    // Condition number in the 2-norm for a symmetric matrix.
    double cond() const {
        double tr = trace();
        double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det()));
        double l1 = std::abs(tr / 2.0 + disc);
        double l2 = std::abs(tr / 2.0 - disc);
        double lo = std::min(l1, l2);
        double hi = std::max(l1, l2);
        if (lo == 0.0) return std::numeric_limits<double>::infinity();
        return hi / lo;
    }
};

// ============================================================================
// Deterministic random numbers
// ============================================================================

// Seed derivation for independent Monte-Carlo streams (splitmix64 step).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// mt19937_64 has a standard-specified sequence; the mappings below avoid the
// implementation-defined std::*_distribution so runs are portable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t integer(std::uint64_t n) {  // [0, n)
        return gen_() % n;
    }

    double gaussian() {  // Box-Muller, standard normal
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

    Complex complex_gaussian() {  // unit-variance circular: E|z|^2 = 1
        return Complex(gaussian(), gaussian()) * std::sqrt(0.5);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace vsense
