#include "mcast/util.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

#include "mcast/types.hpp"

namespace mcast {

const char* role_name(Role r) {
    switch (r) {
        case Role::OH: return "oh";
        case Role::EH: return "eh";
        case Role::MH: return "mh";
    }
    return "??";
}

std::string node_name(NodeId n) {
    return std::string(role_name(n.role)) + std::to_string(n.id);
}

std::optional<NodeId> parse_node_name(const std::string& s) {
    if (s.size() < 3) return std::nullopt;
    Role role;
    if (s.starts_with("oh")) role = Role::OH;
    else if (s.starts_with("eh")) role = Role::EH;
    else if (s.starts_with("mh")) role = Role::MH;
    else return std::nullopt;
    uint32_t id = 0;
    auto [p, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), id);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return NodeId{role, id};
}

}  // namespace mcast

namespace mcast::util {

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_hex16(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string format_ms(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace mcast::util
