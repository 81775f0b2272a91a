#include "mcast/smoke.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>
#include <sstream>
#include <vector>

namespace mcast::smoke {

namespace {

using Clock = std::chrono::steady_clock;

double secs_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Child process with captured stdout, line-buffered on our side.
class Proc {
public:
    Proc() = default;
    Proc(const Proc&) = delete;
    Proc& operator=(const Proc&) = delete;

    bool spawn(const std::vector<std::string>& argv) {
        int fds[2];
        if (pipe(fds) != 0) return false;
        pid_ = fork();
        if (pid_ < 0) return false;
        if (pid_ == 0) {
            dup2(fds[1], STDOUT_FILENO);
            dup2(fds[1], STDERR_FILENO);
            close(fds[0]);
            close(fds[1]);
            std::vector<char*> args;
            for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
            args.push_back(nullptr);
            execv(args[0], args.data());
            _exit(127);
        }
        close(fds[1]);
        out_fd_ = fds[0];
        fcntl(out_fd_, F_SETFL, O_NONBLOCK);
        return true;
    }

    void pump() {
        if (out_fd_ < 0) return;
        char buf[4096];
        while (true) {
            ssize_t r = read(out_fd_, buf, sizeof buf);
            if (r <= 0) break;
            carry_.append(buf, static_cast<size_t>(r));
        }
        size_t pos;
        while ((pos = carry_.find('\n')) != std::string::npos) {
            lines_.push_back(carry_.substr(0, pos));
            carry_.erase(0, pos + 1);
        }
    }

    const std::vector<std::string>& lines() const { return lines_; }

    void kill_hard() {
        if (pid_ > 0) {
            ::kill(pid_, SIGKILL);
            waitpid(pid_, nullptr, 0);
            pid_ = -1;
        }
    }

    void terminate() {
        if (pid_ > 0) {
            ::kill(pid_, SIGTERM);
            waitpid(pid_, nullptr, 0);
            pid_ = -1;
        }
    }

    ~Proc() {
        terminate();
        if (out_fd_ >= 0) close(out_fd_);
    }

    pid_t pid() const { return pid_; }

private:
    pid_t pid_{-1};
    int out_fd_{-1};
    std::string carry_;
    std::vector<std::string> lines_;
};

void sleep_ms(int msec) { usleep(msec * 1000); }

}  // namespace

int run_smoke(const SmokeOptions& opt) {
    auto t0 = Clock::now();
    int failures = 0;
    auto check = [&](bool ok, const std::string& what) {
        std::printf("[%s] smoke: %s\n", ok ? "PASS" : "FAIL", what.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
        return ok;
    };

    const std::string host = "127.0.0.1";
    auto addr = [&](int off) {
        return host + ":" + std::to_string(opt.base_port + off);
    };
    const std::string mh_addr = addr(0);
    std::vector<std::string> oh_addr = {addr(1), addr(2), addr(3)};

    Proc mh;
    mh.spawn({opt.binary, "mh", "--listen", mh_addr, "--load-interval-ms", "400"});
    sleep_ms(300);

    std::vector<std::unique_ptr<Proc>> ohs;
    for (int k = 0; k < 3; ++k) {
        std::string peers;
        for (int j = 0; j < 3; ++j) {
            if (j == k) continue;
            if (!peers.empty()) peers += ",";
            peers += std::to_string(j) + "@" + oh_addr[j];
        }
        auto p = std::make_unique<Proc>();
        p->spawn({opt.binary, "oh", "--id", std::to_string(k), "--listen", oh_addr[k],
                  "--monitor", mh_addr, "--peers", peers, "--load-interval-ms", "400",
                  "--dedup-wait-ms", "6000"});
        ohs.push_back(std::move(p));
        sleep_ms(120);
    }

    // Wait for all three overlay_ready lines; gather the kept pair sets.
    auto wait_for = [&](auto pred, double timeout_s) {
        while (secs_since(t0) < opt.budget_s) {
            mh.pump();
            for (auto& p : ohs) p->pump();
            if (pred()) return true;
            if (timeout_s <= 0) return false;
            timeout_s -= 0.05;
            sleep_ms(50);
        }
        return false;
    };

    auto find_line = [](const Proc& p, const std::string& needle) -> std::optional<std::string> {
        for (const auto& l : p.lines())
            if (l.find(needle) != std::string::npos) return l;
        return std::nullopt;
    };

    bool ready = wait_for(
        [&] {
            for (auto& p : ohs)
                if (!find_line(*p, "event=overlay_ready")) return false;
            return true;
        },
        12.0);
    check(ready, "all overlay hosts finished graph construction");

    std::set<std::string> pairs;
    for (auto& p : ohs) {
        auto line = find_line(*p, "event=overlay_ready");
        if (!line) continue;
        auto pos = line->find("pairs=");
        if (pos == std::string::npos) continue;
        std::istringstream ss(line->substr(pos + 6));
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) pairs.insert(tok);
    }
    check(pairs.size() == 3, "complete graph: 3 kept connections, got " +
                                 std::to_string(pairs.size()));

    // End-hosts. eh0 broadcasts early; eh1 broadcasts after the kill window.
    std::vector<std::unique_ptr<Proc>> ehs;
    std::string ohs_arg;
    for (int j = 0; j < 3; ++j) {
        if (!ohs_arg.empty()) ohs_arg += ",";
        ohs_arg += std::to_string(j) + "@" + oh_addr[j];
    }
    for (int i = 0; i < 5; ++i) {
        std::vector<std::string> argv = {
            opt.binary, "eh", "--id", std::to_string(i), "--monitor", mh_addr,
            "--ohs", ohs_arg, "--strategy", "apptimeout:4000",
            "--stay-ms", "26000"};
        if (i == 0) {
            argv.insert(argv.end(), {"--send-at-ms", "4000", "--send-msg-id", "9001"});
        }
        if (i == 1) {
            argv.insert(argv.end(), {"--send-at-ms", "14000", "--send-msg-id", "9002"});
        }
        auto p = std::make_unique<Proc>();
        p->spawn(argv);
        ehs.push_back(std::move(p));
    }

    bool all_assigned = wait_for(
        [&] {
            for (auto& p : ehs) {
                bool ok = false;
                for (const auto& l : p->lines())
                    if (l.find("event=assigned") != std::string::npos) ok = true;
                if (!ok) return false;
            }
            return true;
        },
        10.0);
    check(all_assigned, "all 5 end-hosts assigned and streaming");

    std::map<int, int> assignment;  // eh -> oh
    for (int i = 0; i < 5; ++i) {
        auto line = find_line(*ehs[i], "event=assigned");
        if (!line) continue;
        auto pos = line->find("oh=");
        if (pos != std::string::npos) assignment[i] = std::stoi(line->substr(pos + 3));
    }

    // Broadcast 1: eh0 sends msg 9001 at t≈4s; eh1..4 each see it once.
    auto count_data = [&](int eh_idx, uint64_t msg_id) {
        int n = 0;
        std::string needle = "event=data origin=0 msg=" + std::to_string(msg_id);
        if (msg_id == 9002) needle = "event=data origin=1 msg=" + std::to_string(msg_id);
        for (const auto& l : ehs[eh_idx]->lines())
            if (l.find(needle) != std::string::npos) ++n;
        return n;
    };
    bool bcast1 = wait_for(
        [&] {
            for (int i = 1; i < 5; ++i)
                if (count_data(i, 9001) < 1) return false;
            return true;
        },
        8.0);
    bool exactly_once1 = true;
    for (int i = 1; i < 5; ++i) exactly_once1 = exactly_once1 && count_data(i, 9001) == 1;
    exactly_once1 = exactly_once1 && count_data(0, 9001) == 0;
    check(bcast1 && exactly_once1, "broadcast from eh0 reached the other 4 exactly once");

    // Kill the overlay host serving eh1 and expect its end-hosts to rejoin.
    int victim = assignment.count(1) ? assignment[1] : 0;
    ohs[static_cast<size_t>(victim)]->kill_hard();
    std::printf("[info] smoke: killed oh%d\n", victim);
    std::fflush(stdout);

    std::vector<int> orphans;
    for (auto& [ehi, ohi] : assignment)
        if (ohi == victim) orphans.push_back(ehi);
    bool rejoined = wait_for(
        [&] {
            for (int i : orphans) {
                bool ok = false;
                for (const auto& l : ehs[static_cast<size_t>(i)]->lines()) {
                    if (l.find("event=reassigned oh=") != std::string::npos &&
                        l.find("oh=" + std::to_string(victim)) == std::string::npos)
                        ok = true;
                }
                if (!ok) return false;
            }
            return true;
        },
        12.0);
    check(rejoined, "end-hosts of the killed host rejoined on survivors (" +
                        std::to_string(orphans.size()) + " orphans)");

    // Broadcast 2: eh1 sends msg 9002 at t≈14s, after rejoining.
    bool bcast2 = wait_for(
        [&] {
            for (int i = 0; i < 5; ++i) {
                if (i == 1) continue;
                if (count_data(i, 9002) < 1) return false;
            }
            return true;
        },
        10.0);
    bool exactly_once2 = true;
    for (int i = 0; i < 5; ++i) {
        if (i == 1) continue;
        exactly_once2 = exactly_once2 && count_data(i, 9002) == 1;
    }
    exactly_once2 = exactly_once2 && count_data(1, 9002) == 0;
    check(bcast2 && exactly_once2, "post-kill broadcast from eh1 reached the other 4 exactly once");

    double elapsed = secs_since(t0);
    check(elapsed < opt.budget_s, "finished within budget (" + std::to_string(elapsed) + "s)");

    if (opt.verbose || failures > 0) {
        auto dump = [&](const char* name, const Proc& p) {
            for (const auto& l : p.lines()) std::printf("  [%s] %s\n", name, l.c_str());
        };
        dump("mh", mh);
        for (size_t k = 0; k < ohs.size(); ++k)
            dump(("oh" + std::to_string(k)).c_str(), *ohs[k]);
        for (size_t i = 0; i < ehs.size(); ++i)
            dump(("eh" + std::to_string(i)).c_str(), *ehs[i]);
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace mcast::smoke
