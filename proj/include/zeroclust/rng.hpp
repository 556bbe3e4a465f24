#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>
#include <type_traits>

namespace zeroclust {

/// splitmix64 finalizer; also used to expand seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// 64-bit FNV-1a.
constexpr std::uint64_t hash_string(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL));
}

/// Derive an independent stream seed from a root seed and any number of
/// integer or string tags. Order of tags matters; execution order does not.
template <typename... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t root, const Tags&... tags) noexcept {
    std::uint64_t s = splitmix64(root);
    auto absorb = [&s](const auto& tag) {
        if constexpr (std::is_convertible_v<decltype(tag), std::string_view>) {
            s = mix_seed(s, hash_string(std::string_view(tag)));
        } else {
            s = mix_seed(s, static_cast<std::uint64_t>(tag));
        }
    };
    (absorb(tags), ...);
    return s;
}

/// xoshiro256** generator. Every derived quantity (bounded integers, uniform
/// doubles) is computed here with integer arithmetic so sequences are
/// identical across standard libraries. Normal deviates depend on libm.
class Rng {
  public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept {
        std::uint64_t x = seed;
        for (auto& s : state_) {
            s = splitmix64(x);
            x += 0x9E3779B97F4A7C15ULL;
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next(); }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Unbiased integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept {
        // Lemire's nearly-divisionless method.
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Integer uniform on the closed interval [lo, hi].
    std::int64_t between(std::int64_t lo, std::int64_t hi) noexcept {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    /// Standard normal deviate (Marsaglia polar method).
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace zeroclust
