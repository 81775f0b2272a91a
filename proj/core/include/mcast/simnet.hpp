#pragma once

#include <coroutine>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "mcast/rng.hpp"
#include "mcast/scenario.hpp"
#include "mcast/task.hpp"
#include "mcast/types.hpp"
#include "mcast/wire.hpp"

namespace mcast::simnet {

// Connection endpoint handle. `self` selects which side of the connection
// the holder speaks for.
struct ConnHandle {
    uint64_t id{0};
    NodeId self;

    bool valid() const { return id != 0; }
    bool operator==(const ConnHandle&) const = default;
};

struct ConnResult {
    bool ok{false};
    ConnHandle conn;
    std::string reason;      // "os_timeout" | "app_timeout" | "refused"
    DurationMs elapsed{ms(0)};
};

struct RecvResult {
    enum class Kind { Msg, Closed, TimedOut } kind{Kind::Closed};
    wire::Message msg;

    bool is_msg() const { return kind == Kind::Msg; }
};

// Deterministic discrete-event virtual network. Single-threaded: all node
// logic runs as coroutines resumed from the event loop, in (time, insertion
// sequence) order. For a fixed scenario and seed the full event trace is
// identical across runs and hosts.
class Simulator {
public:
    explicit Simulator(const ScenarioSpec& scenario);
    ~Simulator();

    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    DurationMs now() const { return ms(now_); }
    const ScenarioSpec& scenario() const { return scenario_; }

    void schedule_at(DurationMs t, std::function<void()> fn);
    void schedule_after(DurationMs d, std::function<void()> fn);

    // Dispatches events until the queue drains; returns the time of the last
    // event (zero if none ran).
    DurationMs run_until_idle();
    // Dispatches events with time <= deadline, then parks the clock there.
    DurationMs run_until(DurationMs deadline);
    // Dispatches while `cond()` holds and events remain.
    DurationMs run_while(const std::function<bool()>& cond);

    void spawn(Task t, WaitGroup* wg = nullptr);

    // --- protocol surface -------------------------------------------------

    struct ConnectAwaiter;
    // Models a TCP connect src -> dst: SYN retransmission on loss, slow-tail
    // handshakes, load scaling, OS cap, optional application timeout.
    ConnectAwaiter connect(NodeId src, NodeId dst,
                           std::optional<DurationMs> app_timeout = std::nullopt);

    // Sends one message; delivery is scheduled after a one-way latency draw,
    // in FIFO order per direction. Returns false on a closed connection.
    bool send(ConnHandle c, const wire::Message& msg);

    struct RecvAwaiter;
    RecvAwaiter recv(ConnHandle c, std::optional<DurationMs> deadline = std::nullopt);

    struct SleepAwaiter;
    SleepAwaiter sleep(DurationMs d);

    // Graceful close: a FIN marker travels to the peer in FIFO order.
    void close(ConnHandle c);

    void listen(NodeId n, std::function<void(ConnHandle)> on_accept);

    void inject(const FailureEvent& ev);
    bool node_up(NodeId n) const;

    // One CSV line per semantic event: t,kind,src,dst,detail.
    void set_trace(std::vector<std::string>* sink) { trace_ = sink; }

    uint64_t events_dispatched() const { return events_dispatched_; }

private:
    friend void detail::sched_resume(Simulator&, std::coroutine_handle<>);
    friend void detail::register_coro(Simulator&, std::coroutine_handle<>);
    friend void detail::unregister_coro(Simulator&, std::coroutine_handle<>);

    struct FinMarker {};
    using InboxItem = std::variant<wire::Message, FinMarker>;

    struct RecvWait {
        std::coroutine_handle<> h;
        RecvResult result;
        bool settled{false};
    };

    struct Endpoint {
        NodeId node;
        std::deque<InboxItem> inbox;
        std::shared_ptr<RecvWait> waiter;
        bool closed_local{false};
    };

    struct Conn {
        uint64_t id{0};
        NodeId initiator, acceptor;
        bool open{false};
        double established_at{0};
        Endpoint ep_init, ep_acc;
        double fifo_floor_fwd{0}, fifo_floor_rev{0};
    };

    struct NodeState {
        NodeSpec spec;
        bool up{true};
        std::function<void(ConnHandle)> acceptor;
    };

    struct LinkRuntime {
        RngStream connect_rng;
        RngStream send_rng;
    };

    struct Ev {
        double at;
        uint64_t seq;
        std::function<void()> fn;
    };
    struct EvCmp {
        bool operator()(const Ev& a, const Ev& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.seq > b.seq;
        }
    };

    NodeState& node(NodeId n);
    const NodeState& node(NodeId n) const;
    const LinkModel& link_model(NodeId src, NodeId dst) const;
    LinkRuntime& link_runtime(NodeId src, NodeId dst);
    bool link_blocked(NodeId src, NodeId dst) const;

    Conn* find_conn(uint64_t id);
    Endpoint& end_of(Conn& c, NodeId self);
    Endpoint& peer_of(Conn& c, NodeId self);
    NodeId peer_node(const Conn& c, NodeId self) const;

    double sample_one_way(NodeId src, NodeId dst);
    void deliver(uint64_t conn_id, NodeId to, InboxItem item);
    void settle_recv(Endpoint& ep, RecvResult r);
    void teardown_conn(Conn& c, const char* why);
    void maybe_gc(uint64_t conn_id);

    void trace(const char* kind, const std::string& src, const std::string& dst,
               const std::string& detail);

    ScenarioSpec scenario_;
    double now_{0};
    uint64_t next_seq_{0};
    uint64_t next_conn_{1};
    uint64_t events_dispatched_{0};
    std::priority_queue<Ev, std::vector<Ev>, EvCmp> queue_;
    std::map<NodeId, NodeState> nodes_;
    std::map<std::pair<NodeId, NodeId>, LinkRuntime> links_;
    std::set<std::pair<NodeId, NodeId>> downed_links_;
    std::unordered_map<uint64_t, Conn> conns_;
    std::unordered_set<void*> live_coros_;
    std::vector<std::string>* trace_{nullptr};
};

struct Simulator::SleepAwaiter {
    Simulator& sim;
    DurationMs d;

    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h) {
        sim.schedule_after(d, [h] { h.resume(); });
    }
    void await_resume() const noexcept {}
};

struct Simulator::ConnectAwaiter {
    Simulator& sim;
    NodeId src, dst;
    std::optional<DurationMs> app_timeout;
    std::shared_ptr<ConnResult> result = std::make_shared<ConnResult>();

    bool await_ready() const noexcept { return false; }
    void await_suspend(std::coroutine_handle<> h);
    ConnResult await_resume() const { return *result; }
};

struct Simulator::RecvAwaiter {
    Simulator& sim;
    ConnHandle c;
    std::optional<DurationMs> deadline;
    RecvResult immediate;
    std::shared_ptr<RecvWait> wait;

    bool await_ready();
    void await_suspend(std::coroutine_handle<> h);
    RecvResult await_resume();
};

}  // namespace mcast::simnet
