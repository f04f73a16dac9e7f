#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "kyleq/errors.hpp"

namespace kyleq {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
// every 128-bit block is a pure function of (counter, key), which is what
// makes draws addressable by (seed, path, slot) and embarrassingly parallel.
struct philox4x32 {
    using ctr_t = std::array<std::uint32_t, 4>;
    using key_t = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t mul_a = 0xD2511F53u;
    static constexpr std::uint32_t mul_b = 0xCD9E8D57u;
    static constexpr std::uint32_t weyl_a = 0x9E3779B9u;
    static constexpr std::uint32_t weyl_b = 0xBB67AE85u;

    static ctr_t block(ctr_t c, key_t k) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k[0] += weyl_a;
                k[1] += weyl_b;
            }
            const std::uint64_t p0 = static_cast<std::uint64_t>(mul_a) * c[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(mul_b) * c[2];
            c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
                 static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
                 static_cast<std::uint32_t>(p0)};
        }
        return c;
    }
};

// One uniform in the open interval (0,1) for a given (seed, path, slot).
// The 0.5 offset keeps the result away from both endpoints so the normal
// quantile below is always finite.
inline double uniform01(std::uint64_t seed, std::uint64_t path, std::uint64_t slot) {
    const philox4x32::ctr_t ctr = {
        static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32),
        static_cast<std::uint32_t>(slot), static_cast<std::uint32_t>(slot >> 32)};
    const philox4x32::key_t key = {static_cast<std::uint32_t>(seed),
                                   static_cast<std::uint32_t>(seed >> 32)};
    const auto w = philox4x32::block(ctr, key);
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(w[1]) << 32) | static_cast<std::uint64_t>(w[0]);
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1p-53;
}

// Standard normal quantile, Wichura's algorithm AS 241 (PPND16 variant),
// accurate to about 1e-16 in the argument over the full open interval.
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw domain_error("inverse_normal_cdf needs 0 < p < 1");

    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                  3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }

    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        val = num / den;
    }
    return (q < 0.0) ? -val : val;
}

// Addressable standard normal draw.
inline double standard_normal(std::uint64_t seed, std::uint64_t path,
                              std::uint64_t slot) {
    return inverse_normal_cdf(uniform01(seed, path, slot));
}

}  // namespace kyleq
