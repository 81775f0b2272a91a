#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "mcast/endhost.hpp"
#include "mcast/monitor.hpp"
#include "mcast/overlay.hpp"
#include "mcast/simnet.hpp"
#include "mcast/task.hpp"

// Simulated protocol roles. Each class owns one node's state; its logic runs
// as coroutines on the simulator's event loop.

namespace mcast::overlay {

class SimOverlayHost {
public:
    SimOverlayHost(simnet::Simulator& sim, NodeId self, std::vector<NodeId> peers,
                   NodeId mh, const ProtocolParams& proto);

    // Registers the listener and spawns construction; `construction_done`
    // (when given) is released once this host's part of the graph is built.
    void start(simnet::WaitGroup* construction_done);
    void stop() { stopped_ = true; }

    struct PairState {
        std::optional<simnet::ConnHandle> out_conn;
        std::optional<DurationMs> out_rtt;
        std::optional<simnet::ConnHandle> in_conn;
        std::optional<DurationMs> in_rtt;
        bool out_failed{false};
        bool decided{false};
        bool absent{false};
        KeepDirection kept_dir{KeepDirection::Outgoing};
        std::optional<simnet::ConnHandle> kept;
        DurationMs kept_rtt{ms(0)};
    };

    NodeId id() const { return self_; }
    DurationMs gtime() const { return gtime_; }
    const std::map<NodeId, PairState>& pairs() const { return pairs_; }
    std::vector<NodeId> local_eh_list() const;
    // Messages seen twice from peer hosts; must stay zero.
    uint64_t duplicate_peer_deliveries() const { return dup_peer_msgs_; }
    uint64_t forwarded_count() const { return forwarded_; }

private:
    simnet::Task run();
    simnet::Task outgoing_sequence(NodeId peer);
    simnet::Task accept_conn(simnet::ConnHandle c);
    simnet::Task serve_peer(NodeId peer, simnet::ConnHandle c);
    simnet::Task serve_eh(NodeId ehn, simnet::ConnHandle c);
    simnet::Task load_loop();
    simnet::Task reconnect_peer(NodeId peer);
    simnet::Task dedup_deadline();

    void try_decide(NodeId peer);
    void force_decide(NodeId peer);
    void pair_resolved(NodeId peer);
    void on_kept_lost(NodeId peer);
    void forward_data(const wire::Data& d, bool from_peer);
    void report_pairs_to_mh(const std::vector<NodeId>& peers_to_report);

    simnet::Simulator& sim_;
    NodeId self_;
    std::vector<NodeId> peers_;
    NodeId mh_;
    ProtocolParams proto_;
    bool stopped_{false};

    std::map<NodeId, PairState> pairs_;
    simnet::WaitGroup pair_wg_;
    std::map<uint32_t, simnet::ConnHandle> local_ehs_;
    simnet::ConnHandle mh_conn_;
    bool constructed_{false};
    DurationMs t1_{ms(0)}, gtime_{ms(0)};

    std::set<std::pair<uint32_t, uint64_t>> seen_from_peers_;
    uint64_t dup_peer_msgs_{0};
    uint64_t forwarded_{0};
};

}  // namespace mcast::overlay

namespace mcast::endhost {

class SimEndHost {
public:
    SimEndHost(simnet::Simulator& sim, NodeId self, std::vector<NodeId> my_ohs, NodeId mh,
               BasicStrategy strategy, const ProtocolParams& proto);

    // Spawns the join flow at virtual time `at`; `joined` (when given) is
    // released once the host is streaming or has given up.
    void start(DurationMs at, simnet::WaitGroup* joined);
    void stop() { stopped_ = true; }

    NodeId id() const { return self_; }
    const MeasurementReport& report() const { return report_; }
    DurationMs measure_wall() const { return measure_wall_; }
    std::optional<NodeId> assigned() const { return assigned_; }
    bool streaming() const { return streaming_; }
    bool gave_up() const { return gave_up_; }
    int full_measure_runs() const { return measure_runs_; }
    DurationMs response_ms() const { return response_ms_; }  // report -> reply

    // Schedules one broadcast from this host once it is streaming.
    void send_data_at(DurationMs t, uint64_t msg_id);
    const std::map<std::pair<uint32_t, uint64_t>, int>& received() const {
        return received_;
    }

private:
    simnet::Task run(simnet::WaitGroup* joined);
    simnet::Task probe(NodeId oh, size_t slot, std::vector<LatencySample>* samples);

    void mark_joined(simnet::WaitGroup* joined);

    simnet::Simulator& sim_;
    NodeId self_;
    std::vector<NodeId> my_ohs_;
    NodeId mh_;
    BasicStrategy strategy_;
    ProtocolParams proto_;
    bool stopped_{false};

    MeasurementReport report_;
    DurationMs measure_wall_{ms(0)};
    DurationMs response_ms_{ms(0)};
    std::optional<NodeId> assigned_;
    bool streaming_{false};
    bool gave_up_{false};
    bool joined_signalled_{false};
    int measure_runs_{0};

    simnet::ConnHandle stream_conn_;
    std::deque<std::pair<DurationMs, uint64_t>> pending_sends_;
    std::map<std::pair<uint32_t, uint64_t>, int> received_;
};

}  // namespace mcast::endhost

namespace mcast::monitor {

class SimMonitorHost {
public:
    SimMonitorHost(simnet::Simulator& sim, NodeId self, DistributionWeights w,
                   const ProtocolParams& proto);

    void start();
    void stop() { stopped_ = true; }

    Service& service() { return service_; }
    const Service& service() const { return service_; }

private:
    simnet::Task serve_conn(simnet::ConnHandle c);
    simnet::Task decision_loop();
    simnet::Task sweeper();

    simnet::Simulator& sim_;
    NodeId self_;
    ProtocolParams proto_;
    Service service_;
    bool stopped_{false};

    struct Pending {
        endhost::MeasurementReport report;
        simnet::ConnHandle conn;
    };
    std::deque<Pending> queue_;
    simnet::Semaphore queue_sem_;
};

}  // namespace mcast::monitor
