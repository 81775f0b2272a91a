#include "mcast/overlay.hpp"

#include <algorithm>

namespace mcast::overlay {

KeepDirection resolve_duplicate(DurationMs meas_out, DurationMs meas_in,
                                NodeId out_initiator, NodeId in_initiator) {
    if (meas_out < meas_in) return KeepDirection::Outgoing;
    if (meas_in < meas_out) return KeepDirection::Incoming;
    return out_initiator < in_initiator ? KeepDirection::Outgoing
                                        : KeepDirection::Incoming;
}

GraphStats GraphStats::from_gtimes(std::map<NodeId, DurationMs> gtimes) {
    GraphStats st;
    st.per_oh_gtime = std::move(gtimes);
    for (const auto& [_, g] : st.per_oh_gtime)
        st.construction_time = std::max(st.construction_time, g);
    return st;
}

ForwardPlan plan_forward(wire::Hop hop, uint32_t origin_eh_id,
                         const std::vector<NodeId>& peer_ohs,
                         const std::vector<NodeId>& local_ehs) {
    ForwardPlan plan;
    if (hop == wire::Hop::Source) plan.to_peers = peer_ohs;
    for (NodeId e : local_ehs)
        if (e.id != origin_eh_id) plan.to_local_ehs.push_back(e);
    return plan;
}

DurationMs reconnect_backoff(int attempt, DurationMs base, DurationMs cap) {
    double v = base.count();
    for (int i = 0; i < attempt; ++i) {
        v *= 2;
        if (v >= cap.count()) return cap;
    }
    return std::min(DurationMs{v}, cap);
}

}  // namespace mcast::overlay
