#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace storyline {

struct Lab {
    double l = 0.0;
    double a = 0.0;
    double b = 0.0;
};

namespace detail {

inline double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline const std::array<double, 256>& srgb_linear_table() {
    static const std::array<double, 256> table = [] {
        std::array<double, 256> t{};
        for (int i = 0; i < 256; ++i) {
            t[static_cast<std::size_t>(i)] = srgb_to_linear(i / 255.0);
        }
        return t;
    }();
    return table;
}

inline double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    if (t > delta * delta * delta) {
        return std::cbrt(t);
    }
    return t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// sRGB primaries, D65 white.
constexpr double kM[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

}  // namespace detail

/// sRGB (8-bit per channel) to CIELAB under D65. The reference white is the
/// image of RGB white under the matrix, so (255,255,255) lands on (100,0,0).
inline Lab rgb_to_cielab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    using namespace detail;
    const auto& lin = srgb_linear_table();
    const double rl = lin[r], gl = lin[g], bl = lin[b];
    const double x = kM[0][0] * rl + kM[0][1] * gl + kM[0][2] * bl;
    const double y = kM[1][0] * rl + kM[1][1] * gl + kM[1][2] * bl;
    const double z = kM[2][0] * rl + kM[2][1] * gl + kM[2][2] * bl;
    const double xn = kM[0][0] + kM[0][1] + kM[0][2];
    const double yn = kM[1][0] + kM[1][1] + kM[1][2];
    const double zn = kM[2][0] + kM[2][1] + kM[2][2];
    const double fx = lab_f(x / xn), fy = lab_f(y / yn), fz = lab_f(z / zn);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

}  // namespace storyline
