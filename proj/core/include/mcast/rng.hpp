#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "mcast/types.hpp"

namespace mcast {

// Deterministic xoshiro256++ stream. The engine is fully specified here so
// draw sequences are identical across platforms and standard-library
// versions (std:: distributions make no such guarantee).
class RngStream {
public:
    RngStream() : RngStream(0) {}
    explicit RngStream(uint64_t seed);

    uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01();

    // Uniform in [lo, hi).
    double uniform(double lo, double hi);

    bool bernoulli(double p);

    // Uniform integer in [0, n), n > 0.
    uint64_t below(uint64_t n);

private:
    std::array<uint64_t, 4> state_;
};

// Independent stream derived from (seed, node, purpose). Same inputs give
// the same stream; any change to any input gives an unrelated stream.
RngStream derive_rng(uint64_t seed, NodeId node, std::string_view purpose);

}  // namespace mcast
