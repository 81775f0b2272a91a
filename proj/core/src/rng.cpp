#include "mcast/rng.hpp"

#include <cmath>

#include "mcast/util.hpp"

namespace mcast {

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(uint64_t seed) {
    uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

uint64_t RngStream::next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RngStream::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

bool RngStream::bernoulli(double p) { return uniform01() < p; }

uint64_t RngStream::below(uint64_t n) {
    // Modulo bias is irrelevant at the n values used here (node counts).
    return next_u64() % n;
}

RngStream derive_rng(uint64_t seed, NodeId node, std::string_view purpose) {
    uint64_t h = util::fnv1a64_u64(seed, 0xcbf29ce484222325ull);
    h = util::fnv1a64_u64(static_cast<uint64_t>(node.role), h);
    h = util::fnv1a64_u64(node.id, h);
    h = util::fnv1a64(purpose, h);
    return RngStream{h};
}

}  // namespace mcast
