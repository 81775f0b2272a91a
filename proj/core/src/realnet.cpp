#include "mcast/realnet.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "mcast/endhost.hpp"
#include "mcast/monitor.hpp"
#include "mcast/overlay.hpp"
#include "mcast/wire.hpp"

namespace mcast::real {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Process-wide virtual origin for DurationMs timestamps.
Clock::time_point process_start() {
    static Clock::time_point t0 = Clock::now();
    return t0;
}

DurationMs now_ms() { return ms(ms_since(process_start())); }

struct Fd {
    int fd{-1};
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& o) noexcept : fd(std::exchange(o.fd, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd = std::exchange(o.fd, -1);
        }
        return *this;
    }
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
    explicit operator bool() const { return fd >= 0; }
};

sockaddr_in to_sockaddr(const Address& a) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(a.port);
    if (inet_pton(AF_INET, a.host.c_str(), &sa.sin_addr) != 1)
        throw std::runtime_error("bad address " + a.host);
    return sa;
}

int listen_on(const Address& a) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    auto sa = to_sockaddr(a);
    if (bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
        ::close(fd);
        throw std::runtime_error("bind failed on " + a.str());
    }
    if (listen(fd, 64) != 0) {
        ::close(fd);
        throw std::runtime_error("listen failed on " + a.str());
    }
    return fd;
}

struct ConnectOutcome {
    int fd{-1};
    bool ok{false};
    std::string reason;
    DurationMs elapsed{ms(0)};
};

// Non-blocking connect with a poll deadline; mirrors the simulator's
// semantics: "app_timeout" when our own deadline cuts first, otherwise the
// OS verdict ("refused", "os_timeout", ...).
ConnectOutcome connect_with_timeout(const Address& a, std::optional<DurationMs> app_timeout,
                                    DurationMs os_cap = ms(75000)) {
    ConnectOutcome out;
    auto t0 = Clock::now();
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) {
        out.reason = "socket";
        return out;
    }
    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    auto sa = to_sockaddr(a);
    int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa);
    if (rc != 0 && errno != EINPROGRESS) {
        out.elapsed = ms(ms_since(t0));
        out.reason = errno == ECONNREFUSED ? "refused" : "error";
        ::close(fd);
        return out;
    }
    double budget = os_cap.count();
    const char* cut_reason = "os_timeout";
    if (app_timeout && app_timeout->count() < budget) {
        budget = app_timeout->count();
        cut_reason = "app_timeout";
    }
    if (rc != 0) {
        pollfd pf{fd, POLLOUT, 0};
        int pr = ::poll(&pf, 1, static_cast<int>(budget));
        out.elapsed = ms(ms_since(t0));
        if (pr == 0) {
            out.reason = cut_reason;
            ::close(fd);
            return out;
        }
        int err = 0;
        socklen_t len = sizeof err;
        getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
            out.reason = err == ECONNREFUSED ? "refused" : "error";
            ::close(fd);
            return out;
        }
    } else {
        out.elapsed = ms(ms_since(t0));
    }
    fcntl(fd, F_SETFL, flags);  // back to blocking
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    out.fd = fd;
    out.ok = true;
    out.elapsed = ms(ms_since(t0));
    return out;
}

bool send_all(int fd, const uint8_t* data, size_t n) {
    size_t off = 0;
    while (off < n) {
        ssize_t w = ::send(fd, data + off, n - off, MSG_NOSIGNAL);
        if (w <= 0) {
            if (w < 0 && (errno == EINTR)) continue;
            return false;
        }
        off += static_cast<size_t>(w);
    }
    return true;
}

bool send_msg(int fd, const wire::Message& m) {
    auto bytes = wire::encode(m);
    return send_all(fd, bytes.data(), bytes.size());
}

// Reads whole frames off a blocking socket; optional per-call deadline.
class FrameReader {
public:
    explicit FrameReader(int fd) : fd_(fd) {}

    // nullopt on EOF/error; sets *timed_out when the deadline cut first.
    std::optional<wire::Message> next(std::optional<DurationMs> deadline = std::nullopt,
                                      bool* timed_out = nullptr) {
        auto t0 = Clock::now();
        while (true) {
            auto res = decoder_.next();
            if (res.status == wire::DecodeStatus::Ok) return std::move(res.msg);
            if (res.status == wire::DecodeStatus::Malformed) return std::nullopt;
            if (deadline) {
                double left = deadline->count() - ms_since(t0);
                if (left <= 0) {
                    if (timed_out) *timed_out = true;
                    return std::nullopt;
                }
                pollfd pf{fd_, POLLIN, 0};
                int pr = ::poll(&pf, 1, static_cast<int>(left) + 1);
                if (pr <= 0) {
                    if (timed_out) *timed_out = true;
                    return std::nullopt;
                }
            }
            uint8_t buf[8192];
            ssize_t r = ::recv(fd_, buf, sizeof buf, 0);
            if (r == 0) return std::nullopt;
            if (r < 0) {
                if (errno == EINTR) continue;
                return std::nullopt;
            }
            decoder_.feed(std::span<const uint8_t>(buf, static_cast<size_t>(r)));
        }
    }

private:
    int fd_;
    wire::Decoder decoder_;
};

std::mutex g_print_mu;

void emit(const std::string& line) {
    std::lock_guard<std::mutex> lk(g_print_mu);
    std::fputs((line + "\n").c_str(), stdout);
    std::fflush(stdout);
}

}  // namespace

Address Address::parse(const std::string& text) {
    auto colon = text.rfind(':');
    if (colon == std::string::npos)
        throw std::runtime_error("address must be host:port, got '" + text + "'");
    Address a;
    a.host = text.substr(0, colon);
    a.port = static_cast<uint16_t>(std::stoi(text.substr(colon + 1)));
    return a;
}

std::string Address::str() const { return host + ":" + std::to_string(port); }

PeerAddress PeerAddress::parse(const std::string& text) {
    auto at = text.find('@');
    if (at == std::string::npos)
        throw std::runtime_error("peer must be id@host:port, got '" + text + "'");
    PeerAddress p;
    p.id = static_cast<uint32_t>(std::stoul(text.substr(0, at)));
    p.addr = Address::parse(text.substr(at + 1));
    return p;
}

// --- monitor host --------------------------------------------------------------

int run_mh(const MhOptions& opt) {
    monitor::Service service(monitor::DistributionWeights{opt.w_load});
    service.set_timing(true);
    std::mutex mu;
    std::atomic<bool> stop{false};

    std::ofstream log;
    if (!opt.log_path.empty()) {
        log.open(opt.log_path);
        log << "eh_id,oh_id,cost_ms,decision_us\n";
    }

    int lfd = listen_on(opt.listen);
    emit("event=mh_up listen=" + opt.listen.str());

    std::thread sweeper([&] {
        while (!stop) {
            std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
                opt.load_interval.count()));
            std::lock_guard<std::mutex> lk(mu);
            for (auto& [oh, affected] :
                 service.sweep(now_ms(), opt.load_interval, opt.dead_after_missed)) {
                emit("event=oh_dead oh=" + std::to_string(oh.id) +
                     " orphans=" + std::to_string(affected.size()));
            }
        }
    });
    sweeper.detach();

    while (!stop) {
        int cfd = ::accept(lfd, nullptr, nullptr);
        if (cfd < 0) break;
        std::thread([cfd, &service, &mu, &log] {
            Fd guard(cfd);
            FrameReader reader(cfd);
            auto hello = reader.next(ms(30000));
            if (!hello) return;
            auto* h = std::get_if<wire::Hello>(&*hello);
            if (!h) return;
            NodeId who = h->node;
            if (who.role == Role::OH) {
                std::lock_guard<std::mutex> lk(mu);
                service.on_oh_hello(who, now_ms());
            }
            while (true) {
                auto m = reader.next();
                if (!m) break;
                if (auto* lr = std::get_if<wire::LoadReport>(&*m)) {
                    if (who.role == Role::OH) {
                        std::lock_guard<std::mutex> lk(mu);
                        service.on_load_report(who, lr->load, now_ms());
                    }
                } else if (auto* rep = std::get_if<wire::MeasReport>(&*m)) {
                    std::lock_guard<std::mutex> lk(mu);
                    if (rep->report.reporter.role == Role::OH) {
                        service.on_oh_report(rep->report);
                    } else {
                        auto res = service.on_eh_report(rep->report);
                        if (res) {
                            send_msg(cfd, wire::Assign{res->oh.id});
                            const auto& e = service.log().back();
                            emit("event=assign eh=" + std::to_string(res->eh.id) +
                                 " oh=" + std::to_string(res->oh.id));
                            if (log.is_open()) {
                                log << res->eh.id << "," << res->oh.id << ","
                                    << res->cost.count() << "," << e.decision_us << "\n";
                                log.flush();
                            }
                        } else {
                            send_msg(cfd, wire::Reject{});
                            emit("event=reject eh=" +
                                 std::to_string(rep->report.reporter.id));
                        }
                    }
                } else if (auto* pd = std::get_if<wire::PeerDown>(&*m)) {
                    emit("event=peer_down_report from=" + std::to_string(who.id) +
                         " peer=" + std::to_string(pd->peer_id));
                } else if (std::get_if<wire::Bye>(&*m)) {
                    break;
                }
            }
        }).detach();
    }
    return 0;
}

// --- overlay host --------------------------------------------------------------

namespace {

struct OhState {
    std::mutex mu;
    std::condition_variable cv;

    struct Pair {
        std::optional<int> out_fd, in_fd;
        std::optional<double> out_rtt, in_rtt;
        bool out_failed{false};
        bool decided{false};
        int kept_fd{-1};
        double kept_rtt{0};
    };
    std::map<uint32_t, Pair> pairs;
    std::map<uint32_t, int> local_ehs;       // eh id -> fd
    std::set<std::pair<uint32_t, uint64_t>> seen_from_peers;
    int mh_fd{-1};
    std::atomic<bool> stop{false};
};

// Returns true when every pair has a decision.
bool all_decided(OhState& st, size_t n_peers) {
    if (st.pairs.size() < n_peers) return false;
    for (auto& [_, p] : st.pairs)
        if (!p.decided) return false;
    return true;
}

void oh_forward(OhState& st, uint32_t self_id, const wire::Data& d, bool from_peer) {
    std::vector<int> peer_fds, eh_fds;
    {
        std::lock_guard<std::mutex> lk(st.mu);
        if (from_peer) {
            auto key = std::make_pair(d.origin, d.msg_id);
            if (!st.seen_from_peers.insert(key).second) return;
        }
        if (!from_peer) {
            for (auto& [_, p] : st.pairs)
                if (p.decided && p.kept_fd >= 0) peer_fds.push_back(p.kept_fd);
        }
        for (auto& [id, fd] : st.local_ehs)
            if (id != d.origin) eh_fds.push_back(fd);
    }
    wire::Data fwd = d;
    fwd.hop = wire::Hop::Peer;
    for (int fd : peer_fds) send_msg(fd, fwd);
    for (int fd : eh_fds) send_msg(fd, fwd);
    (void)self_id;
}

// Serves one established peer connection: answers pings, records exchanged
// measurements, forwards data. Returns when the connection dies.
void oh_serve_peer(OhState& st, uint32_t self_id, uint32_t peer_id, int fd) {
    FrameReader reader(fd);
    while (!st.stop) {
        auto m = reader.next();
        if (!m) break;
        if (auto* ping = std::get_if<wire::Ping>(&*m)) {
            send_msg(fd, wire::Pong{ping->seq});
        } else if (auto* ex = std::get_if<wire::MeasExchange>(&*m)) {
            std::lock_guard<std::mutex> lk(st.mu);
            auto& p = st.pairs[peer_id];
            if (p.in_fd && *p.in_fd == fd) {
                p.in_rtt = ex->rtt_ms;
                st.cv.notify_all();
            }
        } else if (auto* d = std::get_if<wire::Data>(&*m)) {
            oh_forward(st, self_id, *d, true);
        } else if (std::get_if<wire::Bye>(&*m)) {
            break;
        }
    }
    std::lock_guard<std::mutex> lk(st.mu);
    auto& p = st.pairs[peer_id];
    if (p.out_fd && *p.out_fd == fd) p.out_fd.reset();
    if (p.in_fd && *p.in_fd == fd) p.in_fd.reset();
    if (p.decided && p.kept_fd == fd) {
        p.kept_fd = -1;
        emit("event=peer_conn_lost peer=" + std::to_string(peer_id));
    }
    st.cv.notify_all();
    ::close(fd);
}

// Measures one direction (single 1500-byte probe) and exchanges the result.
std::optional<double> measure_and_exchange(int fd) {
    auto t0 = Clock::now();
    if (!send_msg(fd, wire::Ping{1})) return std::nullopt;
    FrameReader reader(fd);
    while (true) {
        bool timed_out = false;
        auto m = reader.next(ms(10000), &timed_out);
        if (!m) return std::nullopt;
        if (auto* pong = std::get_if<wire::Pong>(&*m); pong && pong->seq == 1) {
            double rtt = ms_since(t0);
            send_msg(fd, wire::MeasExchange{rtt});
            return rtt;
        }
        if (auto* ping = std::get_if<wire::Ping>(&*m)) send_msg(fd, wire::Pong{ping->seq});
    }
}

// One-ping measurement loop shared by outgoing construction and reconnect.
// Note: measure_and_exchange consumes frames on this fd, so the caller must
// not have a concurrent reader. Our flow runs it before the serve loop.
void oh_decide_pair(OhState& st, uint32_t self_id, uint32_t peer_id) {
    std::lock_guard<std::mutex> lk(st.mu);
    auto& p = st.pairs[peer_id];
    if (p.decided) return;
    if (p.out_rtt && p.in_rtt) {
        auto dir = overlay::resolve_duplicate(ms(*p.out_rtt), ms(*p.in_rtt),
                                              NodeId{Role::OH, self_id},
                                              NodeId{Role::OH, peer_id});
        p.decided = true;
        if (dir == overlay::KeepDirection::Outgoing) {
            p.kept_fd = p.out_fd.value_or(-1);
            p.kept_rtt = *p.out_rtt;
        } else {
            p.kept_fd = p.in_fd.value_or(-1);
            p.kept_rtt = *p.in_rtt;
            if (p.out_fd) {
                send_msg(*p.out_fd, wire::Bye{});
                // serve loop closes the fd on Bye echo/EOF
            }
        }
        st.cv.notify_all();
    } else if (p.out_failed && p.in_rtt) {
        p.decided = true;
        p.kept_fd = p.in_fd.value_or(-1);
        p.kept_rtt = *p.in_rtt;
        st.cv.notify_all();
    }
}

}  // namespace

int run_oh(const OhOptions& opt) {
    OhState st;
    const uint32_t self_id = opt.id;
    NodeId self = oh(self_id);

    int lfd = listen_on(opt.listen);
    emit("event=oh_up id=" + std::to_string(self_id) + " listen=" + opt.listen.str());

    // Monitor link.
    {
        auto c = connect_with_timeout(opt.monitor, ms(10000));
        if (c.ok) {
            st.mh_fd = c.fd;
            send_msg(st.mh_fd, wire::Hello{self});
        }
    }

    // Accept loop: peers and end-hosts identify themselves with Hello.
    std::thread acceptor([&] {
        while (!st.stop) {
            int cfd = ::accept(lfd, nullptr, nullptr);
            if (cfd < 0) break;
            std::thread([&st, self_id, cfd] {
                FrameReader reader(cfd);
                auto hello = reader.next(ms(30000));
                if (!hello) {
                    ::close(cfd);
                    return;
                }
                auto* h = std::get_if<wire::Hello>(&*hello);
                if (!h) {
                    ::close(cfd);
                    return;
                }
                if (h->node.role == Role::OH) {
                    {
                        std::lock_guard<std::mutex> lk(st.mu);
                        st.pairs[h->node.id].in_fd = cfd;
                    }
                    oh_decide_pair(st, self_id, h->node.id);
                    oh_serve_peer(st, self_id, h->node.id, cfd);
                } else if (h->node.role == Role::EH) {
                    {
                        std::lock_guard<std::mutex> lk(st.mu);
                        st.local_ehs[h->node.id] = cfd;
                    }
                    FrameReader r2 = std::move(reader);
                    while (!st.stop) {
                        auto m = r2.next();
                        if (!m) break;
                        if (auto* ping = std::get_if<wire::Ping>(&*m)) {
                            send_msg(cfd, wire::Pong{ping->seq});
                        } else if (auto* d = std::get_if<wire::Data>(&*m)) {
                            oh_forward(st, self_id, *d, false);
                        } else if (std::get_if<wire::Bye>(&*m)) {
                            break;
                        }
                    }
                    {
                        std::lock_guard<std::mutex> lk(st.mu);
                        auto it = st.local_ehs.find(h->node.id);
                        if (it != st.local_ehs.end() && it->second == cfd)
                            st.local_ehs.erase(it);
                    }
                    ::close(cfd);
                } else {
                    ::close(cfd);
                }
            }).detach();
        }
    });
    acceptor.detach();

    // Construction: connect to every peer, measure, exchange, dedup.
    auto t1 = Clock::now();
    std::vector<std::thread> dialers;
    for (const auto& peer : opt.peers) {
        dialers.emplace_back([&st, self_id, self, peer] {
            ConnectOutcome c;
            for (int attempt = 0; attempt < 20 && !st.stop; ++attempt) {
                c = connect_with_timeout(peer.addr, ms(3000));
                if (c.ok) break;
                std::this_thread::sleep_for(std::chrono::milliseconds(250));
            }
            if (!c.ok) {
                std::lock_guard<std::mutex> lk(st.mu);
                st.pairs[peer.id].out_failed = true;
                st.cv.notify_all();
                return;
            }
            send_msg(c.fd, wire::Hello{self});
            auto rtt = measure_and_exchange(c.fd);
            {
                std::lock_guard<std::mutex> lk(st.mu);
                auto& p = st.pairs[peer.id];
                if (rtt) {
                    p.out_fd = c.fd;
                    p.out_rtt = *rtt;
                } else {
                    p.out_failed = true;
                }
                st.cv.notify_all();
            }
            if (!rtt) {
                ::close(c.fd);
                oh_decide_pair(st, self_id, peer.id);
                return;
            }
            oh_decide_pair(st, self_id, peer.id);
            oh_serve_peer(st, self_id, peer.id, c.fd);
        });
    }

    // Decision watcher: waits for exchanges, forces leftovers at the
    // deadline, reports the built graph.
    {
        std::unique_lock<std::mutex> lk(st.mu);
        auto deadline = Clock::now() + std::chrono::milliseconds(
                                           static_cast<long>(opt.dedup_wait.count()));
        st.cv.wait_until(lk, deadline, [&] {
            if (st.pairs.size() < opt.peers.size()) return false;
            for (auto& [id, p] : st.pairs) {
                if (p.decided) continue;
                if (p.out_rtt && p.in_rtt) return false;  // decidable, not yet done
                if (p.out_failed && p.in_rtt) return false;
                return false;
            }
            return true;
        });
        lk.unlock();
        for (const auto& peer : opt.peers) oh_decide_pair(st, self_id, peer.id);
        lk.lock();
        // Forced decisions for whatever is still open.
        for (auto& [id, p] : st.pairs) {
            if (p.decided) continue;
            p.decided = true;
            if (p.out_rtt && p.out_fd) {
                p.kept_fd = *p.out_fd;
                p.kept_rtt = *p.out_rtt;
                if (p.in_fd) send_msg(*p.in_fd, wire::Bye{});
            } else if (p.in_fd) {
                p.kept_fd = *p.in_fd;
                p.kept_rtt = p.in_rtt.value_or(0);
            } else {
                p.kept_fd = -1;
            }
        }
    }
    double gtime = ms_since(t1);

    // Report kept pairs.
    std::string pair_desc;
    endhost::MeasurementReport pair_report;
    pair_report.reporter = self;
    {
        std::lock_guard<std::mutex> lk(st.mu);
        for (auto& [id, p] : st.pairs) {
            if (p.kept_fd < 0) continue;
            if (!pair_desc.empty()) pair_desc += ",";
            pair_desc += std::to_string(std::min(self_id, id)) + "-" +
                         std::to_string(std::max(self_id, id));
            if (p.kept_rtt > 0) {
                endhost::LatencySample s;
                s.oh = oh(id);
                s.status = endhost::SampleStatus::Ok;
                s.lat1 = ms(p.kept_rtt);
                pair_report.samples.push_back(s);
            }
        }
    }
    if (st.mh_fd >= 0 && !pair_report.samples.empty())
        send_msg(st.mh_fd, wire::MeasReport{pair_report});
    emit("event=overlay_ready id=" + std::to_string(self_id) + " gtime_ms=" +
         std::to_string(gtime) + " pairs=" + pair_desc);

    // Load loop + reconnect supervision.
    while (!st.stop) {
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
            opt.load_interval.count()));
        if (st.mh_fd >= 0)
            send_msg(st.mh_fd, wire::LoadReport{std::min(1.0, opt.load)});

        // Reconnect pairs whose kept connection died.
        std::vector<PeerAddress> lost;
        {
            std::lock_guard<std::mutex> lk(st.mu);
            for (const auto& peer : opt.peers) {
                auto it = st.pairs.find(peer.id);
                if (it != st.pairs.end() && it->second.decided && it->second.kept_fd < 0 &&
                    !it->second.in_fd && !it->second.out_fd)
                    lost.push_back(peer);
            }
        }
        for (const auto& peer : lost) {
            std::thread([&st, self_id, self, peer] {
                for (int attempt = 0; attempt < 6 && !st.stop; ++attempt) {
                    auto c = connect_with_timeout(peer.addr, ms(2000));
                    if (c.ok) {
                        send_msg(c.fd, wire::Hello{self});
                        auto rtt = measure_and_exchange(c.fd);
                        if (rtt) {
                            {
                                std::lock_guard<std::mutex> lk(st.mu);
                                auto& p = st.pairs[peer.id];
                                p.out_fd = c.fd;
                                p.out_rtt = *rtt;
                                p.decided = true;
                                p.kept_fd = c.fd;
                                p.kept_rtt = *rtt;
                            }
                            emit("event=peer_reconnected peer=" + std::to_string(peer.id));
                            oh_serve_peer(st, self_id, peer.id, c.fd);
                            return;
                        }
                        ::close(c.fd);
                    }
                    std::this_thread::sleep_for(std::chrono::milliseconds(500 * (1 << std::min(attempt, 4))));
                }
                if (st.mh_fd >= 0) send_msg(st.mh_fd, wire::PeerDown{peer.id});
                emit("event=peer_lost peer=" + std::to_string(peer.id));
            }).detach();
            std::lock_guard<std::mutex> lk(st.mu);
            st.pairs[peer.id].decided = false;  // single reconnect thread at a time
        }
    }
    for (auto& d : dialers) d.join();
    return 0;
}

// --- end host ------------------------------------------------------------------

namespace {

endhost::LatencySample eh_probe(const PeerAddress& target, NodeId self,
                                const BasicStrategy& strategy) {
    endhost::LatencySample s;
    s.oh = oh(target.id);
    auto t0 = Clock::now();

    ConnectOutcome c;
    double conn_acc = 0;
    if (auto* base = std::get_if<BaselineReconnect>(&strategy)) {
        for (int a = 0; a < base->max_attempts; ++a) {
            c = connect_with_timeout(target.addr, std::nullopt);
            conn_acc += c.elapsed.count();
            if (c.ok) break;
        }
        if (!c.ok) {
            s.status = endhost::SampleStatus::ConnFailed;
            s.elapsed = ms(conn_acc);
            return s;
        }
        s.conn = ms(conn_acc);
    } else if (std::holds_alternative<NoReconnect>(strategy)) {
        c = connect_with_timeout(target.addr, std::nullopt);
        if (!c.ok) {
            s.status = endhost::SampleStatus::ConnFailed;
            s.elapsed = c.elapsed;
            return s;
        }
        s.conn = c.elapsed;
    } else {
        auto t = std::get<AppTimeout>(strategy).timeout;
        c = connect_with_timeout(target.addr, t);
        if (!c.ok) {
            s.status = c.reason == "app_timeout" ? endhost::SampleStatus::TimedOut
                                                 : endhost::SampleStatus::ConnFailed;
            s.elapsed = c.elapsed;
            return s;
        }
        s.conn = c.elapsed;
    }

    Fd fd(c.fd);
    send_msg(fd.fd, wire::Hello{self});
    FrameReader reader(fd.fd);
    DurationMs lats[3];
    for (uint32_t k = 1; k <= 3; ++k) {
        auto tp = Clock::now();
        send_msg(fd.fd, wire::Ping{k});
        bool got = false;
        while (!got) {
            auto m = reader.next(ms(10000));
            if (!m) {
                s.status = endhost::SampleStatus::TimedOut;
                s.elapsed = ms(ms_since(t0));
                return s;
            }
            if (auto* pong = std::get_if<wire::Pong>(&*m); pong && pong->seq == k) {
                lats[k - 1] = ms(ms_since(tp));
                got = true;
            }
        }
    }
    s.status = endhost::SampleStatus::Ok;
    s.lat1 = lats[0];
    s.lat2 = lats[1];
    s.lat3 = lats[2];
    send_msg(fd.fd, wire::Bye{});
    return s;
}

}  // namespace

int run_eh(const EhOptions& opt) {
    NodeId self = eh(opt.id);
    auto started = Clock::now();
    std::atomic<bool> stop{false};

    // Partition filtering is launcher-driven: probe only our group.
    std::vector<PeerAddress> targets = opt.ohs;
    if (opt.partition_group >= 0 && opt.partition_count > 1) {
        std::vector<PeerAddress> mine;
        std::vector<NodeId> ids;
        for (const auto& t : targets) ids.push_back(oh(t.id));
        std::sort(ids.begin(), ids.end());
        for (size_t i = 0; i < ids.size(); ++i) {
            if (static_cast<int>(i % opt.partition_count) != opt.partition_group) continue;
            for (const auto& t : targets)
                if (t.id == ids[i].id) mine.push_back(t);
        }
        targets = std::move(mine);
    }
    if (targets.empty()) {
        emit("event=error msg=no_probe_targets");
        return 2;
    }

    int assignment_count = 0;
    while (!stop) {
        // Measure all targets concurrently.
        std::vector<endhost::LatencySample> samples(targets.size());
        {
            std::vector<std::thread> probes;
            for (size_t i = 0; i < targets.size(); ++i) {
                probes.emplace_back([&, i] {
                    samples[i] = eh_probe(targets[i], self, opt.strategy.basic());
                });
            }
            for (auto& t : probes) t.join();
        }
        endhost::MeasurementReport report;
        report.reporter = self;
        report.samples = samples;
        report.m_i = endhost::compute_mi(samples);
        emit("event=measured m_i_ms=" + std::to_string(report.m_i.count()));
        if (report.unusable()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(500));
            if (ms_since(started) > opt.stay.count() && opt.stay > ms(0)) return 3;
            continue;
        }

        // Report and await the verdict.
        auto mc = connect_with_timeout(opt.monitor, ms(10000));
        if (!mc.ok) {
            std::this_thread::sleep_for(std::chrono::milliseconds(1000));
            continue;
        }
        std::optional<uint32_t> assigned;
        {
            Fd mfd(mc.fd);
            send_msg(mfd.fd, wire::Hello{self});
            send_msg(mfd.fd, wire::MeasReport{report});
            FrameReader reader(mfd.fd);
            auto m = reader.next(ms(30000));
            if (m) {
                if (auto* a = std::get_if<wire::Assign>(&*m)) assigned = a->oh_id;
            }
            send_msg(mfd.fd, wire::Bye{});
        }
        if (!assigned) {
            std::this_thread::sleep_for(std::chrono::milliseconds(1000));
            continue;
        }

        const PeerAddress* target = nullptr;
        for (const auto& t : opt.ohs)
            if (t.id == *assigned) target = &t;
        if (!target) continue;

        // Streaming: retry the same host on transient drops; fall back to a
        // full measurement cycle when it is gone.
        int same_failures = 0;
        while (!stop && same_failures < 3) {
            auto c = connect_with_timeout(target->addr, ms(5000));
            if (!c.ok) {
                ++same_failures;
                std::this_thread::sleep_for(std::chrono::milliseconds(300));
                continue;
            }
            same_failures = 0;
            Fd sfd(c.fd);
            send_msg(sfd.fd, wire::Hello{self});
            ++assignment_count;
            emit(std::string("event=") + (assignment_count == 1 ? "assigned" : "reassigned") +
                 " oh=" + std::to_string(*assigned));

            std::atomic<bool> conn_alive{true};
            std::thread sender;
            if (opt.send_at > ms(0) && opt.send_msg_id != 0) {
                int fd_for_send = sfd.fd;
                sender = std::thread([&, fd_for_send] {
                    while (!stop && conn_alive && ms_since(started) < opt.send_at.count())
                        std::this_thread::sleep_for(std::chrono::milliseconds(20));
                    if (!stop && conn_alive) {
                        wire::Data d;
                        d.msg_id = opt.send_msg_id;
                        d.origin = self.id;
                        d.hop = wire::Hop::Source;
                        if (send_msg(fd_for_send, d))
                            emit("event=sent msg=" + std::to_string(opt.send_msg_id));
                    }
                });
            }

            FrameReader reader(sfd.fd);
            while (!stop) {
                bool timed_out = false;
                auto m = reader.next(ms(500), &timed_out);
                if (!m) {
                    if (timed_out) {
                        if (opt.stay > ms(0) && ms_since(started) > opt.stay.count()) {
                            conn_alive = false;
                            if (sender.joinable()) sender.join();
                            return 0;
                        }
                        continue;
                    }
                    break;  // connection lost
                }
                if (auto* d = std::get_if<wire::Data>(&*m)) {
                    emit("event=data origin=" + std::to_string(d->origin) +
                         " msg=" + std::to_string(d->msg_id));
                } else if (auto* ping = std::get_if<wire::Ping>(&*m)) {
                    send_msg(sfd.fd, wire::Pong{ping->seq});
                }
            }
            conn_alive = false;
            if (sender.joinable()) sender.join();
            if (stop) return 0;
            ++same_failures;
            emit("event=stream_lost oh=" + std::to_string(*assigned));
        }
        // Full rejoin.
    }
    return 0;
}

}  // namespace mcast::real
