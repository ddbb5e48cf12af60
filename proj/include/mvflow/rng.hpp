#pragma once

#include <array>
#include <cstdint>

namespace mvflow {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// Every draw is a pure function of (key, counter), so a path's noise never
/// depends on which thread produced it or in which order paths were visited.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            ctr = single_round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static Counter single_round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
        const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Purpose tag folded into the counter so that initial draws and Brownian
/// increments of the same path never share random numbers.
enum class DrawPurpose : std::uint32_t {
    initial = 1,
    increment = 2,
    probe = 3,
};

/// Identifies one independent stream of draws: (seed, stream, path, purpose).
///
/// `stream` separates statistically independent solver calls that share a
/// seed (e.g. the fresh final run of the McKean-Vlasov solver); passing the
/// same (seed, stream) reproduces common random numbers.
class Substream {
public:
    Substream(std::uint64_t seed, std::uint32_t stream, std::uint32_t path,
              DrawPurpose purpose) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_(path),
          tag_((stream << 8) ^ static_cast<std::uint32_t>(purpose)) {}

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform(std::uint64_t index) const noexcept {
        const auto out = Philox4x32::generate(counter(index), key_);
        const std::uint64_t bits = (std::uint64_t{out[0]} << 32) | out[1];
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by inversion of `uniform(index)`.
    double normal(std::uint64_t index) const noexcept;

    /// Packed identifier recorded in ensembles: stream in the high word, path in the low.
    std::uint64_t id() const noexcept { return (std::uint64_t{tag_ >> 8} << 32) | path_; }

private:
    Philox4x32::Counter counter(std::uint64_t index) const noexcept {
        return {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                path_, tag_};
    }

    Philox4x32::Key key_;
    std::uint32_t path_;
    std::uint32_t tag_;
};

/// Inverse of the standard normal CDF (Wichura's AS 241, ~1e-16 relative).
double normal_quantile(double p) noexcept;

}  // namespace mvflow
