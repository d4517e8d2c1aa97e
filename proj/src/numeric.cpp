#include "mergemeter/numeric.hpp"

#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace mergemeter {

float f16_to_f32(uint16_t h) {
    const uint32_t sign = static_cast<uint32_t>(h & 0x8000u) << 16;
    const uint32_t exp  = (h >> 10) & 0x1fu;
    uint32_t       man  = h & 0x3ffu;
    uint32_t       bits;
    if (exp == 0) {
        if (man == 0) {
            bits = sign; // +-0
        } else {
            // subnormal: shift mantissa up until the implicit bit appears
            int e = 0;
            do {
                man <<= 1;
                ++e;
            } while (!(man & 0x400u));
            bits = sign | (static_cast<uint32_t>(127 - 15 - e + 1) << 23) | ((man & 0x3ffu) << 13);
        }
    } else if (exp == 0x1f) {
        bits = sign | 0x7f800000u | (man << 13); // inf / nan
    } else {
        bits = sign | ((exp - 15 + 127) << 23) | (man << 13);
    }
    float out;
    std::memcpy(&out, &bits, sizeof(out));
    return out;
}

namespace {

uint32_t shift_rne(uint32_t mant, uint32_t s) {
    const uint32_t floor_part = mant >> s;
    const uint32_t rem        = mant & ((1u << s) - 1u);
    const uint32_t half       = 1u << (s - 1);
    if (rem > half || (rem == half && (floor_part & 1u))) {
        return floor_part + 1u;
    }
    return floor_part;
}

} // namespace

uint16_t f32_to_f16(float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    const uint32_t sign = (bits >> 16) & 0x8000u;
    const uint32_t absf = bits & 0x7fffffffu;

    if (absf >= 0x7f800000u) { // inf or nan (keep a quiet payload)
        const uint16_t payload =
            absf > 0x7f800000u ? static_cast<uint16_t>(((absf >> 13) & 0x3ffu) | 0x200u) : uint16_t{0};
        return static_cast<uint16_t>(sign | 0x7c00u | payload);
    }
    if (absf >= 0x477ff000u) { // rounds to >= 2^16: overflow to infinity
        return static_cast<uint16_t>(sign | 0x7c00u);
    }
    if (absf < 0x33000000u) { // below 2^-25: underflows to zero
        return static_cast<uint16_t>(sign);
    }

    const int32_t  e    = static_cast<int32_t>(absf >> 23) - 127;
    const uint32_t mant = (absf & 0x7fffffu) | 0x800000u;
    uint32_t       half;
    if (e >= -14) {
        uint32_t h = shift_rne(mant, 13);         // in [0x400, 0x800]
        uint32_t E = static_cast<uint32_t>(e + 15);
        if (h == 0x800u) {                        // mantissa carry
            h = 0x400u;
            ++E;
        }
        half = (E << 10) | (h & 0x3ffu);
    } else {
        // subnormal target; a round-up to 0x400 lands on the smallest normal,
        // which is exactly the right encoding
        const uint32_t s = static_cast<uint32_t>(13 - (e + 14));
        half = shift_rne(mant, s);
    }
    return static_cast<uint16_t>(sign | half);
}

size_t worker_count(size_t jobs) {
    size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) {
        hw = 1;
    }
    if (const char * env = std::getenv("MERGEMETER_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) {
            hw = std::min(hw, static_cast<size_t>(cap));
        }
    }
    return std::max<size_t>(1, std::min(hw, jobs));
}

void parallel_for(size_t n, const std::function<void(size_t)> & fn) {
    const size_t workers = worker_count(n);
    if (workers <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        const size_t lo = n * w / workers;
        const size_t hi = n * (w + 1) / workers;
        pool.emplace_back([lo, hi, &fn] {
            for (size_t i = lo; i < hi; ++i) {
                fn(i);
            }
        });
    }
    for (auto & t : pool) {
        t.join();
    }
}

} // namespace mergemeter
