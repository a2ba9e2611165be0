#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace anyplan {

using StateId = std::int32_t;
using ActionId = std::int32_t;
using Ticks = std::int64_t;

constexpr StateId kNoState = -1;

// Deterministic 64-bit generator (splitmix64). Kept self-contained so that
// streams are identical across platforms and standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n) by rejection; unbiased.
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: n must be > 0");
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return static_cast<std::size_t>(v % n);
    }

    // Uniform in [0, 1).
    double uniform_real() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Derive an independent stream, e.g. one per task index.
    Rng fork(std::uint64_t salt) const {
        std::uint64_t s = state_;
        s ^= salt * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL;
        return Rng(s);
    }

private:
    std::uint64_t state_;
};

struct AnyplanError : std::runtime_error {
    explicit AnyplanError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace anyplan
