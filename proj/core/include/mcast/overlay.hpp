#pragma once

#include <map>
#include <optional>
#include <vector>

#include "mcast/types.hpp"
#include "mcast/wire.hpp"

namespace mcast::overlay {

enum class KeepDirection { Outgoing, Incoming };

// Decides which of the two duplicate connections of a pair survives: the one
// with the lower measured latency; on an exact tie, the one initiated by the
// lower node id. Both endpoints evaluate identical exchanged inputs, so the
// decision is symmetric.
KeepDirection resolve_duplicate(DurationMs meas_out, DurationMs meas_in,
                                NodeId out_initiator, NodeId in_initiator);

struct GraphStats {
    std::map<NodeId, DurationMs> per_oh_gtime;
    DurationMs construction_time{ms(0)};  // max of the per-host times

    static GraphStats from_gtimes(std::map<NodeId, DurationMs> gtimes);
};

// One-hop fan-out for a data message arriving at an overlay host.
// From a local end-host (Source hop): to every peer OH and every local EH
// except the origin. From a peer OH (Peer hop): to local EHs only.
struct ForwardPlan {
    std::vector<NodeId> to_peers;
    std::vector<NodeId> to_local_ehs;
};
ForwardPlan plan_forward(wire::Hop hop, uint32_t origin_eh_id,
                         const std::vector<NodeId>& peer_ohs,
                         const std::vector<NodeId>& local_ehs);

// Reconnect backoff: 1, 2, 4, 8, ... seconds, capped.
DurationMs reconnect_backoff(int attempt, DurationMs base, DurationMs cap);

}  // namespace mcast::overlay
