#pragma once

#include <cstdint>
#include <string>

namespace mcast::smoke {

struct SmokeOptions {
    std::string binary;     // path to the mcast executable (role subcommands)
    uint16_t base_port{7600};
    bool verbose{false};
    double budget_s{30.0};
};

// Launches 1 monitor + 3 overlay hosts + 5 end-hosts on loopback, then
// checks: complete graph (3 kept pairs), all end-hosts assigned, a broadcast
// reaching every other end-host exactly once, and reassignment after one
// overlay host is killed mid-run. Prints one line per assertion; returns 0
// on pass.
int run_smoke(const SmokeOptions& opt);

}  // namespace mcast::smoke
