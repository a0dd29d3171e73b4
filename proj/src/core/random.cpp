#include "plumeinv/random.hpp"

#include <cmath>
#include <numbers>

namespace plumeinv {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53;
constexpr std::uint32_t kMul1 = 0xCD9E8D57;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// 53 random bits mapped to (0, 1).
inline double open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

PhiloxKey key_from_seed(std::uint64_t seed) {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint32_t stream)
    : seed_(seed), stream_(stream), key_(key_from_seed(seed)) {}

PhiloxCounter CounterRng::block(std::uint32_t sub, std::uint64_t index) const {
    return philox4x32({sub, stream_, static_cast<std::uint32_t>(index),
                       static_cast<std::uint32_t>(index >> 32)},
                      key_);
}

double CounterRng::uniform(std::uint64_t index) const {
    const auto r = block(0, index);
    return open_unit(r[0], r[1]);
}

void CounterRng::normals(std::uint64_t index, std::span<double> out) const {
    // Box-Muller: each Philox block yields two uniforms and hence two normals.
    const std::size_t n = out.size();
    for (std::size_t k = 0; k < n; k += 2) {
        const auto r = block(static_cast<std::uint32_t>(k / 2), index);
        const double u1 = open_unit(r[0], r[1]);
        const double u2 = open_unit(r[2], r[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[k] = radius * std::cos(angle);
        if (k + 1 < n) out[k + 1] = radius * std::sin(angle);
    }
}

PhiloxEngine::PhiloxEngine(std::uint64_t seed, std::uint32_t stream)
    : key_(key_from_seed(seed)), stream_(stream) {}

PhiloxEngine::result_type PhiloxEngine::operator()() {
    if (used_ == 4) {
        buffer_ = philox4x32({static_cast<std::uint32_t>(counter_), stream_,
                              static_cast<std::uint32_t>(counter_ >> 32), 0x5EB1u},
                             key_);
        ++counter_;
        used_ = 0;
    }
    return buffer_[used_++];
}

std::uint64_t PhiloxEngine::below(std::uint64_t bound) {
    // Rejection sampling on 64-bit draws.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
        const std::uint64_t hi = (*this)();
        const std::uint64_t v = (hi << 32) | (*this)();
        if (v < limit) return v % bound;
    }
}

}  // namespace plumeinv
