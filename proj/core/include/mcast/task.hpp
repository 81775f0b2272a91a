#pragma once

#include <coroutine>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <utility>
#include <vector>

namespace mcast::simnet {

class Simulator;

namespace detail {
// Scheduling hooks Task/WaitGroup need from the simulator; implemented in
// simnet.cpp to keep this header light.
void sched_resume(Simulator& sim, std::coroutine_handle<> h);
void register_coro(Simulator& sim, std::coroutine_handle<> h);
void unregister_coro(Simulator& sim, std::coroutine_handle<> h);
}  // namespace detail

class WaitGroup;

// Fire-and-forget coroutine run by the simulator's event loop. Created
// suspended; Simulator::spawn() schedules the first resume and takes
// ownership of the frame. The frame frees itself on completion.
struct Task {
    struct promise_type {
        Simulator* sim = nullptr;
        WaitGroup* wg = nullptr;

        Task get_return_object() {
            return Task{std::coroutine_handle<promise_type>::from_promise(*this)};
        }
        std::suspend_always initial_suspend() noexcept { return {}; }

        struct FinalAwaiter {
            promise_type* p;
            bool await_ready() noexcept;
            void await_suspend(std::coroutine_handle<>) noexcept {}
            void await_resume() noexcept {}
        };
        FinalAwaiter final_suspend() noexcept { return {this}; }

        void return_void() {}
        void unhandled_exception() {
            // Protocol coroutines handle their errors as values; anything
            // escaping here is a bug.
            std::fprintf(stderr, "fatal: unhandled exception in simulation task\n");
            std::terminate();
        }
    };

    using handle_t = std::coroutine_handle<promise_type>;

    explicit Task(handle_t h) : h_(h) {}
    Task(Task&& o) noexcept : h_(std::exchange(o.h_, nullptr)) {}
    Task(const Task&) = delete;
    Task& operator=(const Task&) = delete;
    ~Task() {
        if (h_) h_.destroy();  // never spawned
    }

    handle_t release() { return std::exchange(h_, nullptr); }

private:
    handle_t h_;
};

// Join barrier: spawn(task, &wg) ties task completion to the group; wait()
// suspends until the count reaches zero. Waiter resumption goes through the
// event queue, keeping completion chains iterative and deterministic.
class WaitGroup {
public:
    explicit WaitGroup(Simulator& sim) : sim_(sim) {}

    void add(int n = 1) { pending_ += n; }

    void done() {
        if (--pending_ == 0) {
            for (auto h : waiters_) detail::sched_resume(sim_, h);
            waiters_.clear();
        }
    }

    bool idle() const { return pending_ == 0; }
    int pending() const { return pending_; }

    struct Awaiter {
        WaitGroup& wg;
        bool await_ready() const noexcept { return wg.pending_ == 0; }
        void await_suspend(std::coroutine_handle<> h) { wg.waiters_.push_back(h); }
        void await_resume() const noexcept {}
    };
    Awaiter wait() { return Awaiter{*this}; }

private:
    Simulator& sim_;
    int pending_ = 0;
    std::vector<std::coroutine_handle<>> waiters_;
};

// Counting semaphore for producer/consumer hand-off inside the event loop.
// Waiters are released FIFO through the event queue.
class Semaphore {
public:
    explicit Semaphore(Simulator& sim, int initial = 0) : sim_(sim), count_(initial) {}

    void release() {
        if (!waiters_.empty()) {
            auto h = waiters_.front();
            waiters_.erase(waiters_.begin());
            detail::sched_resume(sim_, h);
        } else {
            ++count_;
        }
    }

    struct Awaiter {
        Semaphore& sem;
        bool await_ready() noexcept {
            if (sem.count_ > 0) {
                --sem.count_;
                return true;
            }
            return false;
        }
        void await_suspend(std::coroutine_handle<> h) { sem.waiters_.push_back(h); }
        void await_resume() const noexcept {}
    };
    Awaiter acquire() { return Awaiter{*this}; }

private:
    Simulator& sim_;
    int count_;
    std::vector<std::coroutine_handle<>> waiters_;
};

inline bool Task::promise_type::FinalAwaiter::await_ready() noexcept {
    if (p->sim) detail::unregister_coro(*p->sim, handle_t::from_promise(*p));
    if (p->wg) p->wg->done();
    return true;  // do not suspend: the frame is destroyed on return
}

}  // namespace mcast::simnet
