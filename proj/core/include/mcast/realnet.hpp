#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcast/scenario.hpp"
#include "mcast/types.hpp"

// Socket mode: the same protocol over real TCP on loopback/LAN. Each role
// runs blocking I/O with one reader thread per connection; shared state sits
// behind a mutex. Decision logic is the same code the simulator uses.

namespace mcast::real {

struct Address {
    std::string host{"127.0.0.1"};
    uint16_t port{0};

    static Address parse(const std::string& text);  // "host:port"
    std::string str() const;
};

// "id@host:port" entries naming remote peers.
struct PeerAddress {
    uint32_t id{0};
    Address addr;

    static PeerAddress parse(const std::string& text);
};

struct MhOptions {
    Address listen;
    double w_load{0.0};
    DurationMs load_interval{ms(1000)};
    int dead_after_missed{3};
    std::string log_path;  // assignment log CSV; empty = stdout only
};

struct OhOptions {
    uint32_t id{0};
    Address listen;
    Address monitor;
    std::vector<PeerAddress> peers;
    double load{0.0};
    DurationMs load_interval{ms(1000)};
    DurationMs dedup_wait{ms(20000)};
};

struct EhOptions {
    uint32_t id{0};
    Address monitor;
    std::vector<PeerAddress> ohs;
    StrategyConfig strategy;
    DurationMs stay{ms(0)};        // exit after this long; 0 = run forever
    DurationMs send_at{ms(0)};     // schedule one broadcast; 0 = never
    uint64_t send_msg_id{0};
    int partition_group{-1};       // probe only this group's hosts (launcher-computed)
    int partition_count{1};
};

// Role entry points; each blocks until shutdown and returns an exit code.
// Progress is reported as "event=..." lines on stdout.
int run_mh(const MhOptions& opt);
int run_oh(const OhOptions& opt);
int run_eh(const EhOptions& opt);

}  // namespace mcast::real
