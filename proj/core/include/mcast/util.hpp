#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mcast::util {

inline uint64_t fnv1a64(std::string_view data, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64_u64(uint64_t v, uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (i * 8)) & 0xff;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);
std::string to_hex16(uint64_t v);

// "%.6f" with trailing-zero trimming turned off: fixed layout keeps CSV
// output byte-stable.
std::string format_ms(double v);

}  // namespace mcast::util
