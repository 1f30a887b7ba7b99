#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace cgdyn {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Output is a pure function of (key, counter).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr Counter apply(Counter c, Key k) noexcept {
        constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{m0} * c[0];
            const std::uint64_t p1 = std::uint64_t{m1} * c[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
            k[0] += w0;
            k[1] += w1;
        }
        return c;
    }
};

namespace detail {

/// Layer boundaries of a 128-layer ziggurat for the standard normal density
/// f(x) = exp(-x^2/2): x[1] = R is the tail start, x[0] = V / f(R) folds the tail
/// area into the base strip, x[128] = 0.
struct ZigguratTables {
    static constexpr int kLayers = 128;
    static constexpr double kTail = 3.442619855899;
    static constexpr double kArea = 9.91256303526217e-3;
    std::array<double, kLayers + 1> x{};
    std::array<double, kLayers + 1> f{};

    ZigguratTables() {
        auto dens = [](double v) { return std::exp(-0.5 * v * v); };
        x[0] = kArea / dens(kTail);
        x[1] = kTail;
        for (int i = 1; i < kLayers - 1; ++i) x[i + 1] = std::sqrt(-2.0 * std::log(kArea / x[i] + dens(x[i])));
        x[kLayers] = 0.0;
        for (int i = 0; i <= kLayers; ++i) f[i] = dens(x[i]);
    }

    static const ZigguratTables& get() {
        static const ZigguratTables t;
        return t;
    }
};

}  // namespace detail

/// Reproducible stream of standard normals indexed by (seed, stream_id, counter).
/// Each Philox block yields two 64-bit words; normals come from a ziggurat sampler
/// that consumes one word on its fast path.
class NoiseStream {
public:
    NoiseStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t counter = 0) noexcept
        : seed_(seed), stream_id_(stream_id), counter_(counter), zig_(&detail::ZigguratTables::get()) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    /// Number of Philox blocks consumed so far.
    std::uint64_t counter() const noexcept { return counter_; }

    double normal() noexcept {
        const auto& z = *zig_;
        while (true) {
            const std::uint64_t bits = next_word();
            const int layer = static_cast<int>(bits & 0x7f);
            const double sign = (bits & 0x80) ? -1.0 : 1.0;
            const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
            const double v = u * z.x[layer];
            if (v < z.x[layer + 1]) return sign * v;
            if (layer == 0) {
                // Tail beyond R (Marsaglia 1964).
                double a, b;
                do {
                    a = -std::log(uniform()) / detail::ZigguratTables::kTail;
                    b = -std::log(uniform());
                } while (b + b < a * a);
                return sign * (detail::ZigguratTables::kTail + a);
            }
            const double y = z.f[layer] + uniform() * (z.f[layer + 1] - z.f[layer]);
            if (y < std::exp(-0.5 * v * v)) return sign * v;
        }
    }

    /// Uniform in (0, 1), never 0.
    double uniform() noexcept { return (static_cast<double>(next_word() >> 11) + 0.5) * 0x1.0p-53; }

private:
    std::uint64_t next_word() noexcept {
        if (have_word_) {
            have_word_ = false;
            return word_;
        }
        const auto out = Philox4x32::apply(
            {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
             static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)},
            {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
        ++counter_;
        word_ = (std::uint64_t{out[2]} << 32) | out[3];
        have_word_ = true;
        return (std::uint64_t{out[0]} << 32) | out[1];
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t counter_;
    const detail::ZigguratTables* zig_;
    std::uint64_t word_ = 0;
    bool have_word_ = false;
};

/// Stream-id namespaces so independent uses of one seed never share a stream.
namespace streams {
inline constexpr std::uint64_t kSampling = 1ull << 40;
inline constexpr std::uint64_t kFull = 2ull << 40;
inline constexpr std::uint64_t kReduced = 3ull << 40;
inline constexpr std::uint64_t kConstrained = 4ull << 40;
inline constexpr std::uint64_t kCoupled = 5ull << 40;
}  // namespace streams

}  // namespace cgdyn
