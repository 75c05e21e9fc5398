#pragma once

// Counter-based deterministic random stream. The k-th raw output is a pure
// function of (seed, k), so sequences are reproducible across platforms and
// substreams can be split without coordination.
//
// Uniform output is splitmix64 applied to an incrementing counter; normals
// come from the Marsaglia-Tsang ziggurat (128 layers) with an exact tail.

#include <cmath>
#include <cstdint>
#include <cstdlib>

#include "visa/linalg.hpp"

namespace visa {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct ZigguratTables {
    std::uint32_t kn[128];
    double wn[128];
    double fn[128];

    ZigguratTables() {
        const double m1 = 2147483648.0;
        double dn = 3.442619855899, tn = dn;
        const double vn = 9.91256303526217e-3;
        double q = vn / std::exp(-0.5 * dn * dn);
        kn[0] = static_cast<std::uint32_t>((dn / q) * m1);
        kn[1] = 0;
        wn[0] = q / m1;
        wn[127] = dn / m1;
        fn[0] = 1.0;
        fn[127] = std::exp(-0.5 * dn * dn);
        for (int i = 126; i >= 1; i--) {
            dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
            kn[i + 1] = static_cast<std::uint32_t>((dn / tn) * m1);
            tn = dn;
            fn[i] = std::exp(-0.5 * dn * dn);
            wn[i] = dn / m1;
        }
    }
};

inline const ZigguratTables& ziggurat() {
    static const ZigguratTables tables;
    return tables;
}

}  // namespace detail

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        return detail::splitmix64(seed_ + (++counter_) * 0x9e3779b97f4a7c15ull);
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Standard normal draw (ziggurat, exact distribution).
    double normal() {
        const auto& z = detail::ziggurat();
        for (;;) {
            auto hz = static_cast<std::int32_t>(next_u64() >> 32);
            std::uint32_t iz = static_cast<std::uint32_t>(hz) & 127u;
            if (static_cast<std::uint32_t>(std::llabs(static_cast<std::int64_t>(hz))) < z.kn[iz])
                return hz * z.wn[iz];
            const double r = 3.442619855899;
            double x = hz * z.wn[iz];
            if (iz == 0) {
                double y;
                do {
                    x = -std::log(uniform_nonzero()) / r;
                    y = -std::log(uniform_nonzero());
                } while (y + y < x * x);
                return hz > 0 ? r + x : -(r + x);
            }
            if (z.fn[iz] + uniform() * (z.fn[iz - 1] - z.fn[iz]) < std::exp(-0.5 * x * x))
                return x;
        }
    }

    // Independent child stream; deterministic in (seed, index).
    RngStream substream(std::uint64_t index) const {
        return RngStream(detail::splitmix64(seed_ ^ detail::splitmix64(index + 0x632be59bd9b4e019ull)));
    }

private:
    double uniform_nonzero() {
        double u;
        do { u = uniform(); } while (u == 0.0);
        return u;
    }

    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

// sample = mean + sqrt(cov_diag) .* N(0, I)
inline Vec gaussian_sample(RngStream& rng, const Vec& mean, const Vec& cov_diag) {
    require_same_width(mean, cov_diag, "gaussian_sample");
    require_finite(mean, "gaussian_sample");
    Vec out(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
        double v = cov_diag[i];
        if (!(v >= 0.0))
            throw std::invalid_argument("gaussian_sample: negative variance");
        out[i] = v == 0.0 ? mean[i] : mean[i] + std::sqrt(v) * rng.normal();
    }
    return out;
}

}  // namespace visa
