#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <span>

namespace mergemeter {

// ---------------------------------------------------------------------------
// IEEE 754 half precision <-> single precision
// ---------------------------------------------------------------------------

// Every f16 value is exactly representable as f32, so this is lossless.
float f16_to_f32(uint16_t h);

// Round-to-nearest-even; overflow saturates to infinity.
uint16_t f32_to_f16(float f);

// ---------------------------------------------------------------------------
// Hashing and deterministic randomness
// ---------------------------------------------------------------------------

inline constexpr uint64_t kFnv64Offset = 0xcbf29ce484222325ULL;

inline uint64_t fnv1a64(const void * data, size_t len, uint64_t h = kFnv64Offset) {
    const auto * p = static_cast<const unsigned char *>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stateless splitmix64 finalizer (advance-then-mix of the reference stream).
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Order-independent uniform draw in [0,1) keyed by (seed, stream, index).
inline double keyed_unit(uint64_t seed, uint64_t stream, uint64_t index) {
    const uint64_t z = splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

// Sequential splitmix64 stream with Box-Muller gaussians. Bit-reproducible
// for a given seed regardless of platform.
struct SplitMix64 {
    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in (0, 1]; never returns 0 so log() is safe.
    double next_unit() { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * 3.14159265358979323846 * u2;
        spare_ = mag * std::sin(ang);
        has_spare_ = true;
        return mag * std::cos(ang);
    }

    uint64_t state;

private:
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Pairwise (tree) summation
// ---------------------------------------------------------------------------

namespace detail {

template <class F>
double pairwise_sum_range(size_t lo, size_t hi, F & f) {
    const size_t n = hi - lo;
    if (n <= 32) {
        double s = 0.0;
        for (size_t i = lo; i < hi; ++i) {
            s += f(i);
        }
        return s;
    }
    const size_t mid = lo + n / 2;
    return pairwise_sum_range(lo, mid, f) + pairwise_sum_range(mid, hi, f);
}

} // namespace detail

template <class F>
double pairwise_sum(size_t n, F f) {
    return n == 0 ? 0.0 : detail::pairwise_sum_range(0, n, f);
}

inline double pairwise_sum(std::span<const double> xs) {
    return pairwise_sum(xs.size(), [&](size_t i) { return xs[i]; });
}

inline double pairwise_sum(std::span<const float> xs) {
    return pairwise_sum(xs.size(), [&](size_t i) { return static_cast<double>(xs[i]); });
}

// ---------------------------------------------------------------------------
// Parallel helper
// ---------------------------------------------------------------------------

// Worker-thread count: min(hardware, MERGEMETER_THREADS, jobs), at least 1.
size_t worker_count(size_t jobs);

// Static chunking; fn(i) must only write to slot i so results are
// independent of the schedule.
void parallel_for(size_t n, const std::function<void(size_t)> & fn);

} // namespace mergemeter
