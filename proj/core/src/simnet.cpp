#include "mcast/simnet.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "mcast/util.hpp"

namespace mcast::simnet {

namespace detail {

void sched_resume(Simulator& sim, std::coroutine_handle<> h) {
    sim.schedule_at(sim.now(), [h] { h.resume(); });
}

void register_coro(Simulator& sim, std::coroutine_handle<> h) {
    sim.live_coros_.insert(h.address());
}

void unregister_coro(Simulator& sim, std::coroutine_handle<> h) {
    sim.live_coros_.erase(h.address());
}

}  // namespace detail

Simulator::Simulator(const ScenarioSpec& scenario) : scenario_(scenario) {
    for (const auto& s : scenario_.oh_nodes) nodes_[s.node] = NodeState{s, true, {}};
    for (const auto& s : scenario_.eh_nodes) nodes_[s.node] = NodeState{s, true, {}};
    nodes_[scenario_.mh_node.node] = NodeState{scenario_.mh_node, true, {}};
}

Simulator::~Simulator() {
    // Destroy coroutines parked on waits that never completed. Their frames
    // only hold values, so destruction order does not matter.
    auto leftovers = live_coros_;
    for (void* p : leftovers) std::coroutine_handle<>::from_address(p).destroy();
}

void Simulator::schedule_at(DurationMs t, std::function<void()> fn) {
    double at = t.count();
    assert(at >= now_ - 1e-9);
    if (at < now_) at = now_;
    queue_.push(Ev{at, next_seq_++, std::move(fn)});
}

void Simulator::schedule_after(DurationMs d, std::function<void()> fn) {
    schedule_at(ms(now_ + d.count()), std::move(fn));
}

DurationMs Simulator::run_until_idle() {
    while (!queue_.empty()) {
        Ev ev = std::move(const_cast<Ev&>(queue_.top()));
        queue_.pop();
        assert(ev.at >= now_);
        now_ = ev.at;
        ++events_dispatched_;
        ev.fn();
    }
    return ms(now_);
}

DurationMs Simulator::run_while(const std::function<bool()>& cond) {
    while (cond() && !queue_.empty()) {
        Ev ev = std::move(const_cast<Ev&>(queue_.top()));
        queue_.pop();
        assert(ev.at >= now_);
        now_ = ev.at;
        ++events_dispatched_;
        ev.fn();
    }
    return ms(now_);
}

DurationMs Simulator::run_until(DurationMs deadline) {
    while (!queue_.empty() && queue_.top().at <= deadline.count()) {
        Ev ev = std::move(const_cast<Ev&>(queue_.top()));
        queue_.pop();
        assert(ev.at >= now_);
        now_ = ev.at;
        ++events_dispatched_;
        ev.fn();
    }
    if (now_ < deadline.count()) now_ = deadline.count();
    return ms(now_);
}

void Simulator::spawn(Task t, WaitGroup* wg) {
    auto h = t.release();
    h.promise().sim = this;
    h.promise().wg = wg;
    if (wg) wg->add(1);
    detail::register_coro(*this, h);
    schedule_at(now(), [h] { h.resume(); });
}

Simulator::NodeState& Simulator::node(NodeId n) {
    auto it = nodes_.find(n);
    if (it == nodes_.end()) throw std::invalid_argument("unknown node " + node_name(n));
    return it->second;
}

const Simulator::NodeState& Simulator::node(NodeId n) const {
    auto it = nodes_.find(n);
    if (it == nodes_.end()) throw std::invalid_argument("unknown node " + node_name(n));
    return it->second;
}

const LinkModel& Simulator::link_model(NodeId src, NodeId dst) const {
    return scenario_.link(node(src).spec.region, node(dst).spec.region);
}

Simulator::LinkRuntime& Simulator::link_runtime(NodeId src, NodeId dst) {
    auto key = std::make_pair(src, dst);
    auto it = links_.find(key);
    if (it == links_.end()) {
        LinkRuntime rt{
            derive_rng(scenario_.seed, src, "connect->" + node_name(dst)),
            derive_rng(scenario_.seed, src, "send->" + node_name(dst)),
        };
        it = links_.emplace(key, std::move(rt)).first;
    }
    return it->second;
}

bool Simulator::link_blocked(NodeId src, NodeId dst) const {
    return downed_links_.count({src, dst}) > 0;
}

Simulator::Conn* Simulator::find_conn(uint64_t id) {
    auto it = conns_.find(id);
    return it == conns_.end() ? nullptr : &it->second;
}

Simulator::Endpoint& Simulator::end_of(Conn& c, NodeId self) {
    return self == c.initiator ? c.ep_init : c.ep_acc;
}

Simulator::Endpoint& Simulator::peer_of(Conn& c, NodeId self) {
    return self == c.initiator ? c.ep_acc : c.ep_init;
}

NodeId Simulator::peer_node(const Conn& c, NodeId self) const {
    return self == c.initiator ? c.acceptor : c.initiator;
}

void Simulator::trace(const char* kind, const std::string& src, const std::string& dst,
                      const std::string& detail) {
    if (!trace_) return;
    trace_->push_back(util::format_ms(now_) + "," + kind + "," + src + "," + dst + "," +
                      detail);
}

// --- connect ---------------------------------------------------------------

void Simulator::ConnectAwaiter::await_suspend(std::coroutine_handle<> h) {
    auto& s = sim;
    if (src == dst) throw std::invalid_argument("connect to self");
    s.node(src);
    s.node(dst);  // throws on unknown ids

    const double start = s.now_;
    auto res = result;
    auto finish_fail = [&s, res, h, this](double at, const char* reason, double elapsed) {
        s.schedule_at(ms(at), [&s, res, h, reason, elapsed, src = src, dst = dst] {
            res->ok = false;
            res->reason = reason;
            res->elapsed = ms(elapsed);
            s.trace("connect_fail", node_name(src), node_name(dst), reason);
            h.resume();
        });
    };

    s.trace("connect_attempt", node_name(src), node_name(dst), "");

    const double os_cap = s.scenario_.tcp.os_cap.count();
    double give_up = os_cap;
    const char* give_up_reason = "os_timeout";
    if (app_timeout && app_timeout->count() < os_cap) {
        give_up = app_timeout->count();
        give_up_reason = "app_timeout";
    }

    // Target dead or SYN path blocked from the start: burn the full timeout.
    if (!s.node(dst).up || s.link_blocked(src, dst) || s.link_blocked(dst, src)) {
        finish_fail(start + give_up, give_up_reason, give_up);
        return;
    }

    const LinkModel& lm = s.link_model(src, dst);
    RngStream& rng = s.link_runtime(src, dst).connect_rng;

    // SYN attempts at offset 0 and each retransmission slot; a lost final
    // SYN means the OS gives up at its cap.
    double syn_offset = -1;
    for (size_t slot = 0; slot <= s.scenario_.tcp.syn_retx.size(); ++slot) {
        if (!rng.bernoulli(lm.syn_loss_p)) {
            syn_offset = slot == 0 ? 0.0 : s.scenario_.tcp.syn_retx[slot - 1].count();
            break;
        }
    }
    double handshake = lm.connect_fast.count();
    if (rng.bernoulli(lm.slow_connect_p)) handshake += lm.slow_connect.count();
    handshake *= 1.0 + s.node(dst).spec.load.load_factor;

    // give_up = min(os cap, app timeout), so any over-budget sample fails
    // exactly at give_up with its reason.
    double elapsed = syn_offset < 0 ? os_cap : syn_offset + handshake;
    if (syn_offset < 0 || elapsed > give_up) {
        finish_fail(start + give_up, give_up_reason, give_up);
        return;
    }

    s.schedule_at(ms(start + elapsed), [&s, res, h, start, elapsed, give_up,
                                        give_up_reason, src = src, dst = dst] {
        // The target may have died mid-handshake.
        if (!s.node(dst).up || s.link_blocked(src, dst) || s.link_blocked(dst, src)) {
            double at = std::max(s.now_, start + give_up);
            s.schedule_at(ms(at), [&s, res, h, give_up, give_up_reason, src, dst] {
                res->ok = false;
                res->reason = give_up_reason;
                res->elapsed = ms(give_up);
                s.trace("connect_fail", node_name(src), node_name(dst), give_up_reason);
                h.resume();
            });
            return;
        }
        if (!s.node(dst).acceptor) {
            res->ok = false;
            res->reason = "refused";
            res->elapsed = ms(elapsed);
            s.trace("connect_fail", node_name(src), node_name(dst), "refused");
            h.resume();
            return;
        }
        uint64_t id = s.next_conn_++;
        Conn c;
        c.id = id;
        c.initiator = src;
        c.acceptor = dst;
        c.open = true;
        c.established_at = s.now_;
        c.ep_init.node = src;
        c.ep_acc.node = dst;
        c.fifo_floor_fwd = s.now_;
        c.fifo_floor_rev = s.now_;
        s.conns_.emplace(id, std::move(c));
        res->ok = true;
        res->conn = ConnHandle{id, src};
        res->elapsed = ms(elapsed);
        s.trace("connect_ok", node_name(src), node_name(dst), util::format_ms(elapsed));
        s.node(dst).acceptor(ConnHandle{id, dst});
        h.resume();
    });
}

Simulator::ConnectAwaiter Simulator::connect(NodeId src, NodeId dst,
                                             std::optional<DurationMs> app_timeout) {
    return ConnectAwaiter{*this, src, dst, app_timeout};
}

// --- send / deliver ----------------------------------------------------------

double Simulator::sample_one_way(NodeId src, NodeId dst) {
    const LinkModel& lm = link_model(src, dst);
    RngStream& rng = link_runtime(src, dst).send_rng;
    double jitter = lm.jitter.count() > 0
                        ? rng.uniform(-lm.jitter.count(), lm.jitter.count())
                        : 0.0;
    double d = (lm.base_latency.count() + jitter) *
               (1.0 + node(dst).spec.load.load_factor);
    return std::max(0.01, d);
}

bool Simulator::send(ConnHandle ch, const wire::Message& msg) {
    Conn* c = find_conn(ch.id);
    if (!c || !c->open) return false;
    Endpoint& self_ep = end_of(*c, ch.self);
    if (self_ep.closed_local) return false;

    NodeId dst = peer_node(*c, ch.self);
    const LinkModel& lm = link_model(ch.self, dst);
    RngStream& rng = link_runtime(ch.self, dst).send_rng;

    // Encode through the real codec so simulated payloads share the exact
    // wire format (and its size) with the socket mode.
    auto bytes = wire::encode(msg);
    auto mtype = wire::type_of(msg);

    if (lm.drop_p > 0 && rng.bernoulli(lm.drop_p)) {
        trace("drop", node_name(ch.self), node_name(dst), wire::type_name(mtype));
        return true;  // sender cannot tell
    }

    double one_way = sample_one_way(ch.self, dst);
    double& floor = (ch.self == c->initiator) ? c->fifo_floor_fwd : c->fifo_floor_rev;
    double at = std::max(now_ + one_way, floor);
    floor = at;

    uint64_t conn_id = c->id;
    NodeId self = ch.self;
    schedule_at(ms(at), [this, conn_id, self, dst, bytes = std::move(bytes), mtype] {
        Conn* cc = find_conn(conn_id);
        if (!cc || !cc->open) return;
        if (link_blocked(self, dst)) return;
        if (!node(dst).up) return;
        auto decoded = wire::decode_one(bytes);
        trace("deliver", node_name(self), node_name(dst), wire::type_name(mtype));
        deliver(conn_id, dst, std::move(decoded.msg));
    });
    return true;
}

void Simulator::settle_recv(Endpoint& ep, RecvResult r) {
    auto w = ep.waiter;
    ep.waiter = nullptr;
    w->settled = true;
    w->result = std::move(r);
    w->h.resume();
}

void Simulator::deliver(uint64_t conn_id, NodeId to, InboxItem item) {
    Conn* c = find_conn(conn_id);
    if (!c) return;
    Endpoint& ep = end_of(*c, to);
    if (ep.closed_local) return;
    if (ep.waiter) {
        if (std::holds_alternative<FinMarker>(item)) {
            settle_recv(ep, RecvResult{RecvResult::Kind::Closed, {}});
        } else {
            settle_recv(ep,
                        RecvResult{RecvResult::Kind::Msg, std::get<wire::Message>(std::move(item))});
        }
        maybe_gc(conn_id);
        return;
    }
    ep.inbox.push_back(std::move(item));
}

// --- recv --------------------------------------------------------------------

bool Simulator::RecvAwaiter::await_ready() {
    Conn* c = sim.find_conn(this->c.id);
    if (!c) {
        immediate = RecvResult{RecvResult::Kind::Closed, {}};
        return true;
    }
    Endpoint& ep = sim.end_of(*c, this->c.self);
    if (ep.closed_local) {
        immediate = RecvResult{RecvResult::Kind::Closed, {}};
        return true;
    }
    if (!ep.inbox.empty()) {
        InboxItem item = std::move(ep.inbox.front());
        ep.inbox.pop_front();
        if (std::holds_alternative<FinMarker>(item)) {
            immediate = RecvResult{RecvResult::Kind::Closed, {}};
        } else {
            immediate = RecvResult{RecvResult::Kind::Msg,
                                   std::get<wire::Message>(std::move(item))};
        }
        sim.maybe_gc(this->c.id);
        return true;
    }
    if (!c->open) {
        // Torn down (node/link failure) with nothing buffered.
        immediate = RecvResult{RecvResult::Kind::Closed, {}};
        return true;
    }
    return false;
}

void Simulator::RecvAwaiter::await_suspend(std::coroutine_handle<> h) {
    Conn* c = sim.find_conn(this->c.id);
    Endpoint& ep = sim.end_of(*c, this->c.self);
    wait = std::make_shared<RecvWait>();
    wait->h = h;
    ep.waiter = wait;
    if (deadline) {
        std::weak_ptr<RecvWait> weak = wait;
        uint64_t conn_id = this->c.id;
        NodeId self = this->c.self;
        sim.schedule_after(*deadline, [&s = sim, weak, conn_id, self] {
            auto w = weak.lock();
            if (!w || w->settled) return;
            if (Conn* cc = s.find_conn(conn_id)) {
                Endpoint& e = s.end_of(*cc, self);
                if (e.waiter == w) e.waiter = nullptr;
            }
            w->settled = true;
            w->result = RecvResult{RecvResult::Kind::TimedOut, {}};
            w->h.resume();
        });
    }
}

RecvResult Simulator::RecvAwaiter::await_resume() {
    if (wait) return std::move(wait->result);
    return std::move(immediate);
}

Simulator::RecvAwaiter Simulator::recv(ConnHandle c, std::optional<DurationMs> deadline) {
    return RecvAwaiter{*this, c, deadline};
}

Simulator::SleepAwaiter Simulator::sleep(DurationMs d) { return SleepAwaiter{*this, d}; }

// --- close / teardown ---------------------------------------------------------

void Simulator::close(ConnHandle ch) {
    Conn* c = find_conn(ch.id);
    if (!c) return;
    Endpoint& self_ep = end_of(*c, ch.self);
    if (self_ep.closed_local) return;
    self_ep.closed_local = true;
    trace("close", node_name(ch.self), node_name(peer_node(*c, ch.self)), "");

    // Anything we had buffered but not read is gone.
    self_ep.inbox.clear();
    if (self_ep.waiter) settle_recv(self_ep, RecvResult{RecvResult::Kind::Closed, {}});

    NodeId dst = peer_node(*c, ch.self);
    double one_way = sample_one_way(ch.self, dst);
    double& floor = (ch.self == c->initiator) ? c->fifo_floor_fwd : c->fifo_floor_rev;
    double at = std::max(now_ + one_way, floor);
    floor = at;
    uint64_t conn_id = c->id;
    schedule_at(ms(at), [this, conn_id, dst] {
        Conn* cc = find_conn(conn_id);
        if (!cc) return;
        deliver(conn_id, dst, FinMarker{});
        cc->open = false;
        maybe_gc(conn_id);
    });
}

// Abrupt teardown (node/link failure): both sides see the connection die
// immediately, buffered data is lost.
void Simulator::teardown_conn(Conn& c, const char* why) {
    c.open = false;
    trace("conn_teardown", node_name(c.initiator), node_name(c.acceptor), why);
    uint64_t id = c.id;
    for (Endpoint* ep : {&c.ep_init, &c.ep_acc}) {
        ep->inbox.clear();
        if (ep->waiter) settle_recv(*ep, RecvResult{RecvResult::Kind::Closed, {}});
    }
    maybe_gc(id);
}

void Simulator::maybe_gc(uint64_t conn_id) {
    auto it = conns_.find(conn_id);
    if (it == conns_.end()) return;
    const Conn& c = it->second;
    if (c.open) return;
    auto done = [](const Endpoint& ep) { return !ep.waiter && ep.inbox.empty(); };
    if (done(c.ep_init) && done(c.ep_acc)) conns_.erase(it);
}

void Simulator::inject(const FailureEvent& ev) {
    switch (ev.kind) {
        case FailureKind::NodeDown: {
            NodeState& n = node(ev.a);
            n.up = false;
            trace("node_down", node_name(ev.a), "", "");
            std::vector<uint64_t> touched;
            for (auto& [id, c] : conns_)
                if (c.initiator == ev.a || c.acceptor == ev.a) touched.push_back(id);
            std::sort(touched.begin(), touched.end());
            for (uint64_t id : touched)
                if (Conn* c = find_conn(id)) teardown_conn(*c, "node_down");
            break;
        }
        case FailureKind::NodeUp:
            node(ev.a).up = true;
            trace("node_up", node_name(ev.a), "", "");
            break;
        case FailureKind::LinkDown: {
            NodeId b = ev.b.value();
            downed_links_.insert({ev.a, b});
            trace("link_down", node_name(ev.a), node_name(b), "");
            std::vector<uint64_t> touched;
            for (auto& [id, c] : conns_) {
                bool match = (c.initiator == ev.a && c.acceptor == b) ||
                             (c.initiator == b && c.acceptor == ev.a);
                if (match) touched.push_back(id);
            }
            std::sort(touched.begin(), touched.end());
            for (uint64_t id : touched)
                if (Conn* c = find_conn(id)) teardown_conn(*c, "link_down");
            break;
        }
        case FailureKind::LinkUp:
            downed_links_.erase({ev.a, ev.b.value()});
            trace("link_up", node_name(ev.a), node_name(*ev.b), "");
            break;
    }
}

bool Simulator::node_up(NodeId n) const { return node(n).up; }

void Simulator::listen(NodeId n, std::function<void(ConnHandle)> on_accept) {
    node(n).acceptor = std::move(on_accept);
}

}  // namespace mcast::simnet
