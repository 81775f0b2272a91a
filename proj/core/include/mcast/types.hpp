#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace mcast {

// All timing arithmetic is real-valued milliseconds.
using DurationMs = std::chrono::duration<double, std::milli>;

constexpr DurationMs ms(double v) { return DurationMs{v}; }

enum class Role : uint8_t { OH = 0, EH = 1, MH = 2 };

const char* role_name(Role r);

// Host identity. Ordering by (role, id) is the global tie-break order.
struct NodeId {
    Role role{Role::OH};
    uint32_t id{0};

    auto operator<=>(const NodeId&) const = default;
};

inline NodeId oh(uint32_t id) { return {Role::OH, id}; }
inline NodeId eh(uint32_t id) { return {Role::EH, id}; }
inline NodeId mh(uint32_t id = 0) { return {Role::MH, id}; }

// "oh3", "eh17", "mh0" — used in scenario files, traces and CSV output.
std::string node_name(NodeId n);
std::optional<NodeId> parse_node_name(const std::string& s);

}  // namespace mcast
