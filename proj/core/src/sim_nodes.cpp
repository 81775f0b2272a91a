#include "mcast/sim_nodes.hpp"

#include <algorithm>

namespace mcast::overlay {

using simnet::ConnHandle;
using simnet::ConnResult;
using simnet::RecvResult;
using simnet::Task;
using simnet::WaitGroup;

SimOverlayHost::SimOverlayHost(simnet::Simulator& sim, NodeId self,
                               std::vector<NodeId> peers, NodeId mh,
                               const ProtocolParams& proto)
    : sim_(sim), self_(self), peers_(std::move(peers)), mh_(mh), proto_(proto),
      pair_wg_(sim) {
    std::sort(peers_.begin(), peers_.end());
}

void SimOverlayHost::start(WaitGroup* construction_done) {
    sim_.listen(self_, [this](ConnHandle c) { sim_.spawn(accept_conn(c)); });
    // run() completes once this host's part of the graph is built, so tying
    // the task to the barrier is exactly the construction signal.
    sim_.spawn(run(), construction_done);
}

std::vector<NodeId> SimOverlayHost::local_eh_list() const {
    std::vector<NodeId> out;
    out.reserve(local_ehs_.size());
    for (const auto& [id, _] : local_ehs_) out.push_back(eh(id));
    return out;
}

Task SimOverlayHost::run() {
    auto r = co_await sim_.connect(self_, mh_);
    if (r.ok) {
        mh_conn_ = r.conn;
        sim_.send(mh_conn_, wire::Hello{self_});
    }
    sim_.spawn(load_loop());

    t1_ = sim_.now();
    pair_wg_.add(static_cast<int>(peers_.size()));
    for (NodeId peer : peers_) sim_.spawn(outgoing_sequence(peer));
    if (!peers_.empty()) sim_.spawn(dedup_deadline());
    co_await pair_wg_.wait();
    gtime_ = sim_.now() - t1_;
    constructed_ = true;

    std::vector<NodeId> decided;
    for (const auto& [peer, p] : pairs_)
        if (p.decided && !p.absent) decided.push_back(peer);
    report_pairs_to_mh(decided);
}

Task SimOverlayHost::outgoing_sequence(NodeId peer) {
    auto r = co_await sim_.connect(self_, peer);
    auto& p = pairs_[peer];
    if (!r.ok) {
        p.out_failed = true;
        try_decide(peer);
        co_return;
    }
    p.out_conn = r.conn;
    ConnHandle c = r.conn;
    sim_.send(c, wire::Hello{self_});

    // One 1500-byte probe measures this direction.
    DurationMs t0 = sim_.now();
    sim_.send(c, wire::Ping{1});
    std::optional<DurationMs> rtt;
    while (true) {
        auto rr = co_await sim_.recv(c, proto_.ping_deadline);
        if (rr.kind == RecvResult::Kind::Msg) {
            if (auto* pong = std::get_if<wire::Pong>(&rr.msg); pong && pong->seq == 1) {
                rtt = sim_.now() - t0;
                break;
            }
            if (auto* ping = std::get_if<wire::Ping>(&rr.msg)) {
                sim_.send(c, wire::Pong{ping->seq});
            }
            continue;
        }
        break;
    }
    if (!rtt) {
        auto& ps = pairs_[peer];
        if (ps.out_conn && *ps.out_conn == c) {
            ps.out_conn.reset();
            ps.out_failed = true;
        }
        sim_.close(c);
        try_decide(peer);
        co_return;
    }
    {
        auto& ps = pairs_[peer];
        ps.out_rtt = rtt;
        sim_.send(c, wire::MeasExchange{rtt->count()});
        try_decide(peer);
    }
    co_await serve_peer(peer, c);
}

Task SimOverlayHost::accept_conn(ConnHandle c) {
    auto rr = co_await sim_.recv(c, proto_.ping_deadline);
    if (rr.kind != RecvResult::Kind::Msg) {
        sim_.close(c);
        co_return;
    }
    auto* hello = std::get_if<wire::Hello>(&rr.msg);
    if (!hello) {
        sim_.close(c);
        co_return;
    }
    if (hello->node.role == Role::OH) {
        auto& p = pairs_[hello->node];
        p.in_conn = c;
        try_decide(hello->node);
        co_await serve_peer(hello->node, c);
    } else if (hello->node.role == Role::EH) {
        co_await serve_eh(hello->node, c);
    } else {
        sim_.close(c);
    }
}

Task SimOverlayHost::serve_peer(NodeId peer, ConnHandle c) {
    while (!stopped_) {
        auto rr = co_await sim_.recv(c);
        if (rr.kind == RecvResult::Kind::Msg) {
            if (auto* ping = std::get_if<wire::Ping>(&rr.msg)) {
                sim_.send(c, wire::Pong{ping->seq});
            } else if (auto* ex = std::get_if<wire::MeasExchange>(&rr.msg)) {
                auto& p = pairs_[peer];
                if (p.in_conn && *p.in_conn == c) {
                    p.in_rtt = ms(ex->rtt_ms);
                    try_decide(peer);
                }
            } else if (auto* d = std::get_if<wire::Data>(&rr.msg)) {
                forward_data(*d, /*from_peer=*/true);
            } else if (std::get_if<wire::Bye>(&rr.msg)) {
                // The peer is discarding this connection (dedup loser, or a
                // forced decision went the other way).
                auto& p = pairs_[peer];
                bool was_kept = p.decided && p.kept && *p.kept == c;
                sim_.close(c);
                if (was_kept && !stopped_) on_kept_lost(peer);
                break;
            }
            continue;
        }
        // Connection gone.
        auto& p = pairs_[peer];
        if (p.decided && p.kept && *p.kept == c && !stopped_) {
            on_kept_lost(peer);
        } else if (!p.decided) {
            if (p.out_conn && *p.out_conn == c) {
                p.out_conn.reset();
                p.out_rtt.reset();
                p.out_failed = true;
                try_decide(peer);
            } else if (p.in_conn && *p.in_conn == c) {
                p.in_conn.reset();
                p.in_rtt.reset();
            }
        }
        break;
    }
}

Task SimOverlayHost::serve_eh(NodeId ehn, ConnHandle c) {
    local_ehs_[ehn.id] = c;
    while (!stopped_) {
        auto rr = co_await sim_.recv(c);
        if (rr.kind == RecvResult::Kind::Msg) {
            if (auto* ping = std::get_if<wire::Ping>(&rr.msg)) {
                sim_.send(c, wire::Pong{ping->seq});
            } else if (auto* d = std::get_if<wire::Data>(&rr.msg)) {
                forward_data(*d, /*from_peer=*/false);
            } else if (std::get_if<wire::Bye>(&rr.msg)) {
                sim_.close(c);
                break;
            }
            continue;
        }
        break;
    }
    auto it = local_ehs_.find(ehn.id);
    if (it != local_ehs_.end() && it->second == c) local_ehs_.erase(it);
}

void SimOverlayHost::try_decide(NodeId peer) {
    auto& p = pairs_[peer];
    if (p.decided) return;
    if (p.out_rtt && p.in_rtt) {
        p.kept_dir = resolve_duplicate(*p.out_rtt, *p.in_rtt, self_, peer);
        if (p.kept_dir == KeepDirection::Outgoing) {
            p.kept = p.out_conn;
            p.kept_rtt = *p.out_rtt;
            // Loser is the incoming conn; its initiator (the peer) closes it.
        } else {
            p.kept = p.in_conn;
            p.kept_rtt = *p.in_rtt;
            if (p.out_conn) {
                sim_.send(*p.out_conn, wire::Bye{});
                sim_.close(*p.out_conn);
            }
        }
        p.decided = true;
        pair_resolved(peer);
    } else if (p.out_failed && p.in_rtt) {
        p.kept_dir = KeepDirection::Incoming;
        p.kept = p.in_conn;
        p.kept_rtt = *p.in_rtt;
        p.decided = true;
        pair_resolved(peer);
    }
}

void SimOverlayHost::force_decide(NodeId peer) {
    auto& p = pairs_[peer];
    if (p.decided) return;
    p.decided = true;
    if (p.out_rtt && p.out_conn) {
        p.kept_dir = KeepDirection::Outgoing;
        p.kept = p.out_conn;
        p.kept_rtt = *p.out_rtt;
        if (p.in_conn) {
            sim_.send(*p.in_conn, wire::Bye{});
            sim_.close(*p.in_conn);
        }
    } else if (p.in_conn) {
        p.kept_dir = KeepDirection::Incoming;
        p.kept = p.in_conn;
        p.kept_rtt = p.in_rtt.value_or(ms(0));
    } else {
        p.absent = true;
    }
    pair_resolved(peer);
}

Task SimOverlayHost::dedup_deadline() {
    co_await sim_.sleep(proto_.dedup_wait);
    if (stopped_) co_return;
    for (NodeId peer : peers_) force_decide(peer);
}

void SimOverlayHost::pair_resolved(NodeId peer) {
    if (!constructed_) {
        pair_wg_.done();
    } else {
        report_pairs_to_mh({peer});
    }
}

void SimOverlayHost::on_kept_lost(NodeId peer) {
    // Reset to construction mode for this pair and try to re-establish.
    pairs_[peer] = PairState{};
    sim_.spawn(reconnect_peer(peer));
}

Task SimOverlayHost::reconnect_peer(NodeId peer) {
    for (int attempt = 0; attempt < proto_.reconnect_max_retries; ++attempt) {
        if (stopped_ || !sim_.node_up(self_)) co_return;
        co_await sim_.sleep(reconnect_backoff(attempt, proto_.reconnect_backoff,
                                              proto_.reconnect_backoff_cap));
        if (stopped_) co_return;
        auto& p = pairs_[peer];
        if (p.decided && p.kept) co_return;  // the peer re-established first
        auto r = co_await sim_.connect(self_, peer);
        if (!r.ok) continue;

        auto& ps = pairs_[peer];
        if (ps.decided && ps.kept) {
            sim_.send(r.conn, wire::Bye{});
            sim_.close(r.conn);
            co_return;
        }
        ps.out_conn = r.conn;
        ps.out_failed = false;
        ConnHandle c = r.conn;
        sim_.send(c, wire::Hello{self_});
        DurationMs t0 = sim_.now();
        sim_.send(c, wire::Ping{1});
        std::optional<DurationMs> rtt;
        while (true) {
            auto rr = co_await sim_.recv(c, proto_.ping_deadline);
            if (rr.kind == RecvResult::Kind::Msg) {
                if (auto* pong = std::get_if<wire::Pong>(&rr.msg); pong && pong->seq == 1) {
                    rtt = sim_.now() - t0;
                    break;
                }
                if (auto* ping = std::get_if<wire::Ping>(&rr.msg))
                    sim_.send(c, wire::Pong{ping->seq});
                continue;
            }
            break;
        }
        if (!rtt) {
            sim_.close(c);
            auto& q = pairs_[peer];
            if (q.out_conn && *q.out_conn == c) {
                q.out_conn.reset();
                q.out_failed = true;
            }
            continue;
        }
        {
            auto& q = pairs_[peer];
            q.out_rtt = rtt;
            sim_.send(c, wire::MeasExchange{rtt->count()});
            try_decide(peer);
        }
        // Give a simultaneous reconnect from the peer a window to land so the
        // decision stays symmetric; only then keep ours unilaterally.
        if (!pairs_[peer].decided) {
            co_await sim_.sleep(ms(10000));
            auto& q = pairs_[peer];
            if (!q.decided) {
                if (q.out_conn && *q.out_conn == c) {
                    q.decided = true;
                    q.kept_dir = KeepDirection::Outgoing;
                    q.kept = c;
                    q.kept_rtt = *q.out_rtt;
                    pair_resolved(peer);
                } else {
                    co_return;  // lost again meanwhile
                }
            }
        }
        co_await serve_peer(peer, c);
        co_return;
    }
    // Give up and tell the monitor.
    if (mh_conn_.valid()) sim_.send(mh_conn_, wire::PeerDown{peer.id});
    pairs_[peer].absent = true;
}

void SimOverlayHost::forward_data(const wire::Data& d, bool from_peer) {
    if (from_peer) {
        auto key = std::make_pair(d.origin, d.msg_id);
        if (!seen_from_peers_.insert(key).second) {
            ++dup_peer_msgs_;
            return;
        }
    }
    std::vector<NodeId> peer_list;
    for (const auto& [peer, p] : pairs_)
        if (p.decided && p.kept) peer_list.push_back(peer);
    auto plan = plan_forward(d.hop, d.origin, peer_list, local_eh_list());

    wire::Data fwd = d;
    fwd.hop = wire::Hop::Peer;
    for (NodeId peer : plan.to_peers) {
        const auto& p = pairs_.at(peer);
        if (p.kept && sim_.send(*p.kept, fwd)) ++forwarded_;
    }
    for (NodeId e : plan.to_local_ehs) {
        auto it = local_ehs_.find(e.id);
        if (it != local_ehs_.end() && sim_.send(it->second, fwd)) ++forwarded_;
    }
}

void SimOverlayHost::report_pairs_to_mh(const std::vector<NodeId>& peers_to_report) {
    if (!mh_conn_.valid()) return;
    endhost::MeasurementReport r;
    r.reporter = self_;
    for (NodeId peer : peers_to_report) {
        auto it = pairs_.find(peer);
        if (it == pairs_.end() || !it->second.decided || it->second.absent) continue;
        if (it->second.kept_rtt <= ms(0)) continue;  // unmeasured forced keep
        endhost::LatencySample s;
        s.oh = peer;
        s.status = endhost::SampleStatus::Ok;
        s.lat1 = it->second.kept_rtt;
        r.samples.push_back(s);
    }
    if (r.samples.empty()) return;
    sim_.send(mh_conn_, wire::MeasReport{std::move(r)});
}

Task SimOverlayHost::load_loop() {
    const double load = sim_.scenario().spec_of(self_).load.reported_load;
    while (!stopped_) {
        co_await sim_.sleep(proto_.load_interval);
        if (stopped_ || !sim_.node_up(self_)) co_return;
        if (mh_conn_.valid()) sim_.send(mh_conn_, wire::LoadReport{load});
    }
}

}  // namespace mcast::overlay

namespace mcast::endhost {

using simnet::ConnHandle;
using simnet::RecvResult;
using simnet::Task;
using simnet::WaitGroup;

SimEndHost::SimEndHost(simnet::Simulator& sim, NodeId self, std::vector<NodeId> my_ohs,
                       NodeId mh, BasicStrategy strategy, const ProtocolParams& proto)
    : sim_(sim), self_(self), my_ohs_(std::move(my_ohs)), mh_(mh),
      strategy_(strategy), proto_(proto) {
    std::sort(my_ohs_.begin(), my_ohs_.end());
}

void SimEndHost::start(DurationMs at, WaitGroup* joined) {
    if (joined) joined->add(1);
    sim_.schedule_at(at, [this, joined] { sim_.spawn(run(joined)); });
}

void SimEndHost::mark_joined(WaitGroup* joined) {
    if (joined_signalled_) return;
    joined_signalled_ = true;
    if (joined) joined->done();
}

void SimEndHost::send_data_at(DurationMs t, uint64_t msg_id) {
    sim_.schedule_at(t, [this, msg_id] {
        // Retry until the host is streaming (bounded).
        std::function<void(int)> attempt = [this, msg_id](int tries_left) {
            if (streaming_ && stream_conn_.valid()) {
                wire::Data d;
                d.msg_id = msg_id;
                d.origin = self_.id;
                d.hop = wire::Hop::Source;
                sim_.send(stream_conn_, d);
                return;
            }
            if (tries_left > 0)
                sim_.schedule_after(ms(500), [attempt, tries_left] { attempt(tries_left - 1); });
        };
        attempt(240);
    });
}

Task SimEndHost::probe(NodeId target, size_t slot, std::vector<LatencySample>* samples) {
    LatencySample s;
    s.oh = target;
    DurationMs t0 = sim_.now();

    ConnHandle conn;
    bool connected = false;
    if (auto* base = std::get_if<BaselineReconnect>(&strategy_)) {
        DurationMs acc{ms(0)};
        for (int a = 0; a < base->max_attempts; ++a) {
            auto r = co_await sim_.connect(self_, target);
            acc += r.elapsed;
            if (r.ok) {
                connected = true;
                conn = r.conn;
                break;
            }
        }
        if (!connected) {
            s.status = SampleStatus::ConnFailed;
            s.elapsed = acc;
            (*samples)[slot] = s;
            co_return;
        }
        s.conn = acc;
    } else if (std::holds_alternative<NoReconnect>(strategy_)) {
        auto r = co_await sim_.connect(self_, target);
        if (!r.ok) {
            s.status = SampleStatus::ConnFailed;
            s.elapsed = r.elapsed;
            (*samples)[slot] = s;
            co_return;
        }
        connected = true;
        conn = r.conn;
        s.conn = r.elapsed;
    } else {
        auto t = std::get<AppTimeout>(strategy_).timeout;
        auto r = co_await sim_.connect(self_, target, t);
        if (!r.ok) {
            s.status = r.reason == "app_timeout" ? SampleStatus::TimedOut
                                                 : SampleStatus::ConnFailed;
            s.elapsed = r.elapsed;
            (*samples)[slot] = s;
            co_return;
        }
        connected = true;
        conn = r.conn;
        s.conn = r.elapsed;
    }

    sim_.send(conn, wire::Hello{self_});
    DurationMs lats[3];
    for (uint32_t k = 1; k <= 3; ++k) {
        DurationMs tp = sim_.now();
        sim_.send(conn, wire::Ping{k});
        bool got = false;
        while (!got) {
            auto rr = co_await sim_.recv(conn, proto_.ping_deadline);
            if (rr.kind == RecvResult::Kind::Msg) {
                if (auto* pong = std::get_if<wire::Pong>(&rr.msg); pong && pong->seq == k) {
                    lats[k - 1] = sim_.now() - tp;
                    got = true;
                }
                continue;
            }
            s.status = SampleStatus::TimedOut;
            s.elapsed = sim_.now() - t0;
            sim_.close(conn);
            (*samples)[slot] = s;
            co_return;
        }
    }
    s.status = SampleStatus::Ok;
    s.lat1 = lats[0];
    s.lat2 = lats[1];
    s.lat3 = lats[2];
    sim_.send(conn, wire::Bye{});
    sim_.close(conn);
    (*samples)[slot] = s;
}

Task SimEndHost::run(WaitGroup* joined) {
    struct JoinGuard {
        SimEndHost* e;
        WaitGroup* j;
        ~JoinGuard() { e->mark_joined(j); }
    } guard{this, joined};

    int cycles = 0;
    while (!stopped_ && sim_.node_up(self_)) {
        if (++cycles > proto_.measure_retry_max + 2) {
            gave_up_ = true;
            co_return;
        }

        // Measurement phase: probe every target concurrently.
        bool usable = false;
        for (int attempt = 0; attempt < proto_.measure_retry_max && !usable; ++attempt) {
            ++measure_runs_;
            std::vector<LatencySample> samples(my_ohs_.size());
            WaitGroup wg(sim_);
            DurationMs t0 = sim_.now();
            for (size_t i = 0; i < my_ohs_.size(); ++i)
                sim_.spawn(probe(my_ohs_[i], i, &samples), &wg);
            co_await wg.wait();
            measure_wall_ = sim_.now() - t0;
            report_.reporter = self_;
            report_.samples = std::move(samples);
            report_.m_i = compute_mi(report_.samples);
            usable = !report_.unusable();
            if (!usable) co_await sim_.sleep(ms(1000));
        }
        if (!usable) {
            gave_up_ = true;
            co_return;
        }

        // Send the report; wait for the verdict.
        ConnHandle mc;
        bool mh_ok = false;
        for (int attempt = 0; attempt < 5; ++attempt) {
            auto r = co_await sim_.connect(self_, mh_, ms(10000));
            if (r.ok) {
                mh_ok = true;
                mc = r.conn;
                break;
            }
            co_await sim_.sleep(reconnect_backoff(attempt, proto_.reconnect_backoff,
                                                  proto_.reconnect_backoff_cap));
        }
        if (!mh_ok) {
            gave_up_ = true;
            co_return;
        }
        sim_.send(mc, wire::Hello{self_});
        sim_.send(mc, wire::MeasReport{report_});
        DurationMs t_req = sim_.now();
        auto rr = co_await sim_.recv(mc, ms(120000));
        response_ms_ = sim_.now() - t_req;
        sim_.send(mc, wire::Bye{});
        sim_.close(mc);

        if (rr.kind != RecvResult::Kind::Msg) {
            co_await sim_.sleep(ms(1000));
            continue;
        }
        if (std::get_if<wire::Reject>(&rr.msg)) {
            co_await sim_.sleep(ms(1000));
            continue;
        }
        auto* assign = std::get_if<wire::Assign>(&rr.msg);
        if (!assign) continue;
        assigned_ = oh(assign->oh_id);

        // Streaming phase: stay attached; transient drops retry the same
        // host, a vanished host sends us back to a full measurement cycle.
        int same_oh_failures = 0;
        while (!stopped_ && same_oh_failures < proto_.stream_retry_attempts) {
            auto cr = co_await sim_.connect(self_, *assigned_, ms(10000));
            if (!cr.ok) {
                ++same_oh_failures;
                continue;
            }
            same_oh_failures = 0;
            stream_conn_ = cr.conn;
            sim_.send(stream_conn_, wire::Hello{self_});
            streaming_ = true;
            mark_joined(joined);
            while (!stopped_) {
                auto dr = co_await sim_.recv(stream_conn_);
                if (dr.kind != RecvResult::Kind::Msg) break;
                if (auto* d = std::get_if<wire::Data>(&dr.msg))
                    received_[{d->origin, d->msg_id}] += 1;
            }
            streaming_ = false;
            stream_conn_ = {};
            if (stopped_) co_return;
            ++same_oh_failures;
        }
        if (stopped_) co_return;
        // Full rejoin.
    }
}

}  // namespace mcast::endhost

namespace mcast::monitor {

using simnet::ConnHandle;
using simnet::RecvResult;
using simnet::Task;

SimMonitorHost::SimMonitorHost(simnet::Simulator& sim, NodeId self,
                               DistributionWeights w, const ProtocolParams& proto)
    : sim_(sim), self_(self), proto_(proto), service_(w), queue_sem_(sim) {}

void SimMonitorHost::start() {
    sim_.listen(self_, [this](ConnHandle c) { sim_.spawn(serve_conn(c)); });
    sim_.spawn(decision_loop());
    sim_.spawn(sweeper());
}

Task SimMonitorHost::serve_conn(ConnHandle c) {
    auto rr = co_await sim_.recv(c, ms(120000));
    if (rr.kind != RecvResult::Kind::Msg) {
        sim_.close(c);
        co_return;
    }
    auto* hello = std::get_if<wire::Hello>(&rr.msg);
    if (!hello) {
        sim_.close(c);
        co_return;
    }
    NodeId who = hello->node;
    if (who.role == Role::OH) service_.on_oh_hello(who, sim_.now());

    while (!stopped_) {
        auto mr = co_await sim_.recv(c);
        if (mr.kind != RecvResult::Kind::Msg) break;
        if (auto* lr = std::get_if<wire::LoadReport>(&mr.msg)) {
            if (who.role == Role::OH) service_.on_load_report(who, lr->load, sim_.now());
        } else if (auto* rep = std::get_if<wire::MeasReport>(&mr.msg)) {
            if (rep->report.reporter.role == Role::OH) {
                service_.on_oh_report(rep->report);
            } else {
                queue_.push_back({rep->report, c});
                queue_sem_.release();
            }
        } else if (std::get_if<wire::PeerDown>(&mr.msg)) {
            // Advisory; liveness verdicts come from load-report staleness.
        } else if (std::get_if<wire::Bye>(&mr.msg)) {
            sim_.close(c);
            break;
        }
    }
}

Task SimMonitorHost::decision_loop() {
    while (!stopped_) {
        co_await queue_sem_.acquire();
        if (stopped_) co_return;
        if (queue_.empty()) continue;
        Pending p = std::move(queue_.front());
        queue_.pop_front();
        if (proto_.mh_service > ms(0)) co_await sim_.sleep(proto_.mh_service);
        auto res = service_.on_eh_report(p.report);
        if (res)
            sim_.send(p.conn, wire::Assign{res->oh.id});
        else
            sim_.send(p.conn, wire::Reject{});
    }
}

Task SimMonitorHost::sweeper() {
    while (!stopped_) {
        co_await sim_.sleep(proto_.load_interval);
        if (stopped_) co_return;
        service_.sweep(sim_.now(), proto_.load_interval, proto_.dead_after_missed);
    }
}

}  // namespace mcast::monitor
