#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace plumeinv {

// Philox4x32-10 counter-based bijection (Salmon et al., SC'11).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key);

// Random stream addressed by (seed, stream id, draw index). Any draw can be
// regenerated independently of every other, which keeps chains reproducible
// and makes draw k independent of how many draws follow it.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint32_t stream);

    // Uniform on the open interval (0, 1) for draw `index`.
    double uniform(std::uint64_t index) const;

    // Standard normals for draw `index`; out.size() values are produced.
    void normals(std::uint64_t index, std::span<double> out) const;

    std::uint64_t seed() const { return seed_; }
    std::uint32_t stream() const { return stream_; }

private:
    PhiloxCounter block(std::uint32_t sub, std::uint64_t index) const;

    std::uint64_t seed_;
    std::uint32_t stream_;
    PhiloxKey key_;
};

// Sequential UniformRandomBitGenerator view of a CounterRng stream.
class PhiloxEngine {
public:
    using result_type = std::uint32_t;

    PhiloxEngine(std::uint64_t seed, std::uint32_t stream);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

    // Uniform integer in [0, bound) without modulo bias.
    std::uint64_t below(std::uint64_t bound);

private:
    PhiloxKey key_;
    std::uint32_t stream_;
    std::uint64_t counter_ = 0;
    PhiloxCounter buffer_{};
    int used_ = 4;
};

}  // namespace plumeinv
