#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mcast/sim_nodes.hpp"

namespace mcast::exp {

// One full simulated run: monitor + overlay construction + end-host joins,
// with phase-by-phase control for tests (failures, broadcasts, settling).
class Experiment {
public:
    explicit Experiment(ScenarioSpec spec, bool trace = false);

    // Builds the complete graph and waits until the monitor holds the full
    // inter-host latency matrix (bounded by the dedup deadline).
    void build_overlay();

    // Starts every end-host at the current virtual instant and runs until
    // all are streaming or gave up.
    void join_ehs();

    // Runs the simulation forward by `extra` virtual time.
    void settle(DurationMs extra);

    // Schedules a broadcast from an end-host, then settles.
    void broadcast(NodeId from_eh, uint64_t msg_id, DurationMs settle_for = ms(30000));

    // Stops periodic loops and drains the queue.
    void finish();

    simnet::Simulator& sim() { return *sim_; }
    const ScenarioSpec& spec() const { return spec_; }
    overlay::SimOverlayHost& oh_host(NodeId n);
    endhost::SimEndHost& eh_host(NodeId n);
    monitor::SimMonitorHost& mh_host() { return *mh_; }
    const std::vector<std::string>& trace() const { return trace_; }

    overlay::GraphStats graph_stats() const;
    std::vector<endhost::MeasurementReport> eh_reports() const;
    // Unique undirected pairs kept across all overlay hosts.
    std::set<std::pair<NodeId, NodeId>> kept_pairs() const;
    double pct_probes_ok() const;  // Ok probes / all probes, in percent

private:
    ScenarioSpec spec_;
    std::vector<std::unique_ptr<overlay::SimOverlayHost>> ohs_;
    std::vector<std::unique_ptr<endhost::SimEndHost>> ehs_;
    std::unique_ptr<monitor::SimMonitorHost> mh_;
    std::vector<std::string> trace_;
    std::unique_ptr<simnet::WaitGroup> cons_wg_;
    std::unique_ptr<simnet::WaitGroup> joined_wg_;
    bool built_{false};
    // Declared last: destroyed first, so coroutine frames unwind while the
    // node objects and wait groups above are still alive.
    std::unique_ptr<simnet::Simulator> sim_;
};

// Scenario text for the calibrated experiment family. Heavy-tail runs give
// two overlay regions loss-prone inbound links (slow handshakes and SYN
// loss) while every probe RTT stays inside the observed latency band.
std::string fig_scenario_text(int n_oh, int n_eh, const std::string& strategy,
                              uint64_t seed, bool heavy_tail);

// Figure runners. Each emits a deterministic CSV (header + one row per
// configuration); every row carries the hash of the exact scenario it ran.
std::string run_fig2(const std::vector<int>& oh_counts, uint64_t seed,
                     const std::string& extra_scenario = "");
std::string run_fig3_5(const std::vector<int>& oh_counts, const std::vector<int>& eh_counts,
                       const std::string& strategy, uint64_t seed,
                       const std::string& extra_scenario = "");
std::string run_fig6(const std::vector<int>& bursts, int n_oh, uint64_t seed,
                     const std::string& extra_scenario = "");
std::string run_fig7(int n_oh, int n_eh, uint64_t seed,
                     const std::string& extra_scenario = "");
std::string run_fig8(const std::vector<int>& oh_counts, int n_eh, uint64_t seed,
                     const std::string& extra_scenario = "");

// Dispatch by preset name ("fig2", "fig3", "fig5", "fig6", "fig7", "fig8").
// When `trace_out` is given, the full event trace of every run is appended.
std::string run_fig_preset(const std::string& preset, uint64_t seed,
                           const std::string& extra_scenario = "",
                           std::vector<std::string>* trace_out = nullptr);

// Per-strategy average measurement times from a fig7 CSV, keyed by strategy
// label; used by tests and the acceptance suite.
std::map<std::string, double> parse_fig7_avgs(const std::string& csv);

// Compares two runner outputs; throws if the scenario hashes differ (results
// from different inputs must never be compared row-to-row).
bool compare_runs(const std::string& csv_a, const std::string& csv_b);

}  // namespace mcast::exp
