#pragma once

#include <cstdint>
#include <vector>

#include "mcast/scenario.hpp"
#include "mcast/types.hpp"

namespace mcast::endhost {

enum class SampleStatus : uint8_t { Ok = 0, ConnFailed = 1, TimedOut = 2 };

// One end-host's probe of one overlay host: connect time plus the round-trip
// latency of three consecutive probe packets.
struct LatencySample {
    NodeId oh;
    SampleStatus status{SampleStatus::Ok};
    DurationMs conn{ms(0)};
    DurationMs lat1{ms(0)}, lat2{ms(0)}, lat3{ms(0)};
    DurationMs elapsed{ms(0)};  // time burnt on a ConnFailed / TimedOut probe

    bool ok() const { return status == SampleStatus::Ok; }

    bool operator==(const LatencySample&) const = default;
};

struct MeasurementReport {
    NodeId reporter;
    std::vector<LatencySample> samples;
    DurationMs m_i{ms(0)};

    // True when no overlay host could be measured; the caller must retry.
    bool unusable() const;

    bool operator==(const MeasurementReport&) const = default;
};

// Sum of the three probe round trips. Precondition: sample.ok().
DurationMs cumm_lat(const LatencySample& s);

// Mean probe round trip; the latency value the monitor uses for this edge.
DurationMs mean_rtt(const LatencySample& s);

// Wall-clock cost of one probe: conn + three round trips when it succeeded,
// otherwise the time the failed attempt occupied.
DurationMs sample_total(const LatencySample& s);

// Total measurement time: the maximum probe cost across overlay hosts.
// Probes run concurrently, so this equals the wall clock of the whole phase.
DurationMs compute_mi(const std::vector<LatencySample>& samples);

// Splits both node lists into `group_count` disjoint subsets by round-robin
// over the id-sorted lists; group i's end-hosts measure only group i's
// overlay hosts.
struct PartitionGroup {
    std::vector<NodeId> ehs;
    std::vector<NodeId> ohs;
};
std::vector<PartitionGroup> partition(std::vector<NodeId> ehs, std::vector<NodeId> ohs,
                                      int group_count);

// Group subset of `ohs` that a given end-host probes under `strategy`
// (identity unless the strategy partitions).
std::vector<NodeId> ohs_for(NodeId eh, const std::vector<NodeId>& ehs,
                            const std::vector<NodeId>& ohs, const StrategyConfig& strategy);

}  // namespace mcast::endhost
