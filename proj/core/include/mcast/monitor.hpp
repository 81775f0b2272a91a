#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

#include "mcast/endhost.hpp"
#include "mcast/types.hpp"

namespace mcast::monitor {

struct MatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Symmetric overlay-host pair latencies, populated from dedup measurements.
// Lookups are counted so tests can bound the per-request work.
class InterOhLatencyMatrix {
public:
    void set(NodeId a, NodeId b, DurationMs rtt);
    std::optional<DurationMs> get(NodeId a, NodeId b) const;
    DurationMs at(NodeId a, NodeId b) const;  // throws MatrixError when absent
    bool covers(NodeId a, NodeId b) const { return get(a, b).has_value(); }
    size_t size() const { return entries_.size(); }
    uint64_t lookups() const { return lookups_; }
    void reset_lookups() { lookups_ = 0; }

private:
    static std::pair<NodeId, NodeId> key(NodeId a, NodeId b);
    std::map<std::pair<NodeId, NodeId>, DurationMs> entries_;
    mutable uint64_t lookups_{0};
};

struct DistributionWeights {
    double w_load{0.0};  // latency penalty per unit of reported load, in ms

    bool operator==(const DistributionWeights&) const = default;
};

struct OhInfo {
    double reported_load{0.0};
    bool alive{true};
    int assigned_count{0};
    DurationMs last_report{ms(0)};
};

struct Assignment {
    NodeId eh;
    NodeId oh;
    DurationMs cost{ms(0)};
};

struct DistributionState {
    std::set<NodeId> chosen;
    std::map<NodeId, OhInfo> oh_table;
    std::map<NodeId, NodeId> assignments;  // end-host -> overlay host
    DistributionWeights weights;

    // Incrementally maintained sum of matrix entries over pairs within
    // `chosen`; keeps each request at O(candidates * |chosen|).
    DurationMs chosen_pair_sum{ms(0)};

    bool alive(NodeId oh) const;
    void register_oh(NodeId oh);
};

// Cost of attaching an end-host with measured edge `l_meas` to `candidate`:
// pairwise latency over chosen ∪ {candidate}, plus the edge, plus the load
// penalty. Reference implementation; recomputes the pair sum from scratch.
DurationMs latency_cost(const std::set<NodeId>& chosen, NodeId candidate,
                        DurationMs l_meas, const InterOhLatencyMatrix& L, double load,
                        const DistributionWeights& w);

struct NoCandidateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Greedy per-request distribution: scans usable candidates in ascending node
// id order and picks the strict cost minimum (first minimum wins). Updates
// chosen / assignments / counts. Throws NoCandidateError when the report has
// no usable sample; the caller replies Reject.
Assignment distribute(const endhost::MeasurementReport& report, DistributionState& state,
                      const InterOhLatencyMatrix& L);

// Removes a dead overlay host from the alive set and from chosen; returns
// the end-hosts that were assigned to it (they must rejoin). Other hosts'
// assignments are untouched.
std::vector<NodeId> handle_oh_failure(NodeId oh, DistributionState& state,
                                      const InterOhLatencyMatrix& L);

// Records a load report; revives a host previously marked dead.
void update_load(NodeId oh, double reported_load, DistributionState& state,
                 DurationMs now);

// Marks hosts that have missed `dead_after_missed` report intervals as dead;
// returns them (failure handling is the caller's next step).
std::vector<NodeId> sweep_liveness(DistributionState& state, DurationMs now,
                                   DurationMs interval, int dead_after_missed);

// Exhaustive small-instance oracle: enumerates every assignment of end-hosts
// to their Ok-measured overlay hosts and returns a total-cost argmin
// (lexicographically smallest on ties). Enforced limits keep the
// |OH|^|EH| enumeration tractable.
struct GlobalOptimum {
    std::map<NodeId, NodeId> assignment;
    DurationMs total_cost{ms(0)};
};
GlobalOptimum global_optimal_assignment(const std::vector<endhost::MeasurementReport>& reports,
                                        const InterOhLatencyMatrix& L,
                                        const std::map<NodeId, double>& loads,
                                        const DistributionWeights& w);

// Total cost of a full assignment under the same objective the oracle uses:
// pairwise latency over the used hosts + per-edge costs.
DurationMs assignment_total_cost(const std::map<NodeId, NodeId>& assignment,
                                 const std::vector<endhost::MeasurementReport>& reports,
                                 const InterOhLatencyMatrix& L,
                                 const std::map<NodeId, double>& loads,
                                 const DistributionWeights& w);

// The edge latency the monitor attributes to a sample: mean probe RTT.
DurationMs edge_ms(const endhost::LatencySample& s);

// Shared monitor-host brain used by both the simulated and socket modes:
// matrix ingestion, load bookkeeping, serialized distribution decisions.
class Service {
public:
    explicit Service(DistributionWeights w) { state_.weights = w; }

    void register_oh(NodeId oh) { state_.register_oh(oh); }
    // Hello from an overlay host: registers it and arms its staleness timer.
    void on_oh_hello(NodeId oh, DurationMs now) {
        state_.register_oh(oh);
        state_.oh_table[oh].last_report = now;
    }
    void on_pair_latency(NodeId a, NodeId b, DurationMs rtt) { matrix_.set(a, b, rtt); }
    void on_oh_report(const endhost::MeasurementReport& r);
    void on_load_report(NodeId oh, double load, DurationMs now);

    // Returns the assignment, or nullopt for Reject.
    std::optional<Assignment> on_eh_report(const endhost::MeasurementReport& r);

    // Liveness sweep; returns (dead host, its orphaned end-hosts) pairs.
    std::vector<std::pair<NodeId, std::vector<NodeId>>> sweep(DurationMs now,
                                                              DurationMs interval,
                                                              int dead_after_missed);
    std::vector<NodeId> mark_dead(NodeId oh);

    const DistributionState& state() const { return state_; }
    const InterOhLatencyMatrix& matrix() const { return matrix_; }
    size_t matrix_size() const { return matrix_.size(); }

    struct LogEntry {
        NodeId eh, oh;
        DurationMs cost;
        double decision_us;  // wall-clock decision time; 0 when timing is off
    };
    const std::vector<LogEntry>& log() const { return log_; }
    void set_timing(bool on) { timing_ = on; }

private:
    DistributionState state_;
    InterOhLatencyMatrix matrix_;
    std::vector<LogEntry> log_;
    bool timing_{false};
};

}  // namespace mcast::monitor
