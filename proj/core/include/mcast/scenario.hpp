#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mcast/types.hpp"

namespace mcast {

// Per-directed-link timing model. Latencies are one-way; connect values
// describe the TCP handshake as seen by the initiator.
struct LinkModel {
    DurationMs base_latency{ms(50)};
    DurationMs jitter{ms(5)};           // one-way delay drawn uniform in base +/- jitter
    DurationMs connect_fast{ms(100)};   // handshake time when nothing goes wrong
    double slow_connect_p{0.0};         // chance the handshake hits the slow tail
    DurationMs slow_connect{ms(45000)}; // extra handshake time in the slow tail
    double syn_loss_p{0.0};             // chance any individual SYN is lost
    double drop_p{0.0};                 // chance a data packet is lost

    bool operator==(const LinkModel&) const = default;
};

struct LoadClass {
    double load_factor{0.0};   // multiplies service delays, >= 0
    double reported_load{0.0}; // what the node tells the monitor, in [0,1]

    bool operator==(const LoadClass&) const = default;
};

struct NodeSpec {
    NodeId node;
    std::string region;
    LoadClass load;

    bool operator==(const NodeSpec&) const = default;
};

// OS-level SYN behaviour: retransmit offsets after the initial SYN, and the
// point where the OS gives up on the connection entirely.
struct TcpParams {
    std::vector<DurationMs> syn_retx{ms(3000), ms(6000), ms(12000),
                                     ms(24000), ms(48000)};
    DurationMs os_cap{ms(75000)};

    bool operator==(const TcpParams&) const = default;
};

// Protocol tunables shared by the simulated and real-socket modes.
struct ProtocolParams {
    DurationMs load_interval{ms(5000)};
    int dead_after_missed{3};
    DurationMs dedup_wait{ms(90000)};   // max wait for the peer's duplicate conn
    DurationMs ping_deadline{ms(60000)};
    DurationMs mh_service{ms(0.5)};     // monitor per-request service time (virtual)
    DurationMs reconnect_backoff{ms(1000)};
    DurationMs reconnect_backoff_cap{ms(30000)};
    int reconnect_max_retries{8};
    int stream_retry_attempts{3};       // same-OH retries before a full rejoin
    int measure_retry_max{3};           // whole-measurement retries when unusable

    bool operator==(const ProtocolParams&) const = default;
};

struct BaselineReconnect {
    int max_attempts{5};
    bool operator==(const BaselineReconnect&) const = default;
};
struct NoReconnect {
    bool operator==(const NoReconnect&) const = default;
};
struct AppTimeout {
    DurationMs timeout{ms(10000)};
    bool operator==(const AppTimeout&) const = default;
};
using BasicStrategy = std::variant<BaselineReconnect, NoReconnect, AppTimeout>;
struct Partitioned {
    int group_count{5};
    BasicStrategy inner{AppTimeout{}};
    bool operator==(const Partitioned&) const = default;
};

// Connection strategy used by measuring end-hosts. Text form:
//   baseline[:attempts] | noreconnect | apptimeout:<ms> | partition:<g>+<inner>
struct StrategyConfig {
    std::variant<BaselineReconnect, NoReconnect, AppTimeout, Partitioned> kind =
        BaselineReconnect{};

    static StrategyConfig parse(const std::string& text);
    std::string to_string() const;

    bool is_partitioned() const { return std::holds_alternative<Partitioned>(kind); }
    int group_count() const;
    BasicStrategy basic() const;  // inner strategy if partitioned, self otherwise

    bool operator==(const StrategyConfig&) const = default;
};

enum class FailureKind { NodeDown, NodeUp, LinkDown, LinkUp };

struct FailureEvent {
    DurationMs at{ms(0)};
    FailureKind kind{FailureKind::NodeDown};
    NodeId a;
    std::optional<NodeId> b;  // second endpoint for link events

    bool operator==(const FailureEvent&) const = default;
};

struct ScenarioSpec {
    std::vector<NodeSpec> oh_nodes;
    std::vector<NodeSpec> eh_nodes;
    NodeSpec mh_node{mh(0), "Romania", {}};
    // Fully materialised: covers every (region, region) pair appearing in the
    // node lists, defaults filled from the calibrated region distances.
    std::map<std::pair<std::string, std::string>, LinkModel> region_links;
    StrategyConfig strategy;
    std::vector<FailureEvent> failures;
    uint64_t seed{0};
    double w_load{0.0};  // monitor load-penalty coefficient, ms per unit load
    TcpParams tcp;
    ProtocolParams proto;

    const LinkModel& link(const std::string& from, const std::string& to) const;
    const NodeSpec& spec_of(NodeId n) const;
    std::vector<NodeId> oh_ids() const;
    std::vector<NodeId> eh_ids() const;

    bool operator==(const ScenarioSpec&) const = default;
};

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parses the line-oriented scenario format; see README for the grammar.
// Throws ScenarioError with a line number on malformed input.
ScenarioSpec load_scenario(const std::string& text);

// Canonical text form; load_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const ScenarioSpec& spec);

// FNV-1a over the canonical serialization (includes the seed).
uint64_t scenario_hash(const ScenarioSpec& spec);

// Country -> node-count presets from the measurement campaign this models.
// "table1-<n>oh" with n in {3,10,20,30,40}; "table2-<n>eh" for any n >= 1.
// The published EH table sums to 1010 for the nominal 1000-node setting; the
// preset rescales the unpinned countries so the total is exactly 1000 while
// keeping the US at 240 and Germany at 160.
std::vector<std::pair<std::string, int>> preset_counts(const std::string& preset);

// Calibrated default for a region pair: one-way latencies chosen so that
// end-host RTTs over any pair land inside the 68.59..925.86 ms band.
LinkModel default_link(const std::string& from, const std::string& to);

}  // namespace mcast
