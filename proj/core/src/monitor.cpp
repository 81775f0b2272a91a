#include "mcast/monitor.hpp"

#include <algorithm>
#include <chrono>

namespace mcast::monitor {

std::pair<NodeId, NodeId> InterOhLatencyMatrix::key(NodeId a, NodeId b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

void InterOhLatencyMatrix::set(NodeId a, NodeId b, DurationMs rtt) {
    entries_[key(a, b)] = rtt;
}

std::optional<DurationMs> InterOhLatencyMatrix::get(NodeId a, NodeId b) const {
    ++lookups_;
    auto it = entries_.find(key(a, b));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

DurationMs InterOhLatencyMatrix::at(NodeId a, NodeId b) const {
    auto v = get(a, b);
    if (!v)
        throw MatrixError("missing latency entry " + node_name(a) + "," + node_name(b));
    return *v;
}

bool DistributionState::alive(NodeId oh) const {
    auto it = oh_table.find(oh);
    return it != oh_table.end() && it->second.alive;
}

void DistributionState::register_oh(NodeId oh) { oh_table.try_emplace(oh); }

DurationMs latency_cost(const std::set<NodeId>& chosen, NodeId candidate,
                        DurationMs l_meas, const InterOhLatencyMatrix& L, double load,
                        const DistributionWeights& w) {
    // Pairwise sum over chosen ∪ {candidate}; union is idempotent, so a
    // candidate already chosen adds no new pairs.
    DurationMs pair_sum{ms(0)};
    std::vector<NodeId> members(chosen.begin(), chosen.end());
    if (!chosen.count(candidate)) members.push_back(candidate);
    for (size_t i = 0; i < members.size(); ++i)
        for (size_t j = i + 1; j < members.size(); ++j)
            pair_sum += L.at(members[i], members[j]);
    return pair_sum + l_meas + ms(w.w_load * load);
}

DurationMs edge_ms(const endhost::LatencySample& s) { return endhost::mean_rtt(s); }

Assignment distribute(const endhost::MeasurementReport& report, DistributionState& state,
                      const InterOhLatencyMatrix& L) {
    struct Candidate {
        NodeId oh;
        DurationMs l_meas;
        double load;
    };
    std::vector<Candidate> candidates;
    for (const auto& s : report.samples) {
        if (!s.ok() || !state.alive(s.oh)) continue;
        candidates.push_back({s.oh, edge_ms(s), state.oh_table.at(s.oh).reported_load});
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) { return a.oh < b.oh; });

    std::optional<Assignment> best;
    for (const auto& c : candidates) {
        // Incremental cost: cached pair sum over chosen + this candidate's
        // cross edges. Candidates missing matrix coverage are unusable.
        DurationMs cross{ms(0)};
        bool covered = true;
        if (!state.chosen.count(c.oh)) {
            for (NodeId m : state.chosen) {
                auto v = L.get(m, c.oh);
                if (!v) {
                    covered = false;
                    break;
                }
                cross += *v;
            }
        }
        if (!covered) continue;
        DurationMs cost = state.chosen_pair_sum + cross + c.l_meas +
                          ms(state.weights.w_load * c.load);
        if (!best || cost < best->cost) best = Assignment{report.reporter, c.oh, cost};
    }
    if (!best) throw NoCandidateError("no usable overlay host in report");

    if (!state.chosen.count(best->oh)) {
        for (NodeId m : state.chosen) state.chosen_pair_sum += L.at(m, best->oh);
        state.chosen.insert(best->oh);
    }
    auto prev = state.assignments.find(report.reporter);
    if (prev != state.assignments.end()) {
        auto t = state.oh_table.find(prev->second);
        if (t != state.oh_table.end() && t->second.assigned_count > 0)
            --t->second.assigned_count;
    }
    state.assignments[report.reporter] = best->oh;
    ++state.oh_table[best->oh].assigned_count;
    return *best;
}

std::vector<NodeId> handle_oh_failure(NodeId oh, DistributionState& state,
                                      const InterOhLatencyMatrix& L) {
    auto it = state.oh_table.find(oh);
    if (it == state.oh_table.end())
        throw std::invalid_argument("unknown overlay host " + node_name(oh));
    it->second.alive = false;
    it->second.assigned_count = 0;

    if (state.chosen.erase(oh)) {
        for (NodeId m : state.chosen) {
            if (auto v = L.get(m, oh)) state.chosen_pair_sum -= *v;
        }
    }

    std::vector<NodeId> affected;
    for (auto a = state.assignments.begin(); a != state.assignments.end();) {
        if (a->second == oh) {
            affected.push_back(a->first);
            a = state.assignments.erase(a);
        } else {
            ++a;
        }
    }
    return affected;
}

void update_load(NodeId oh, double reported_load, DistributionState& state,
                 DurationMs now) {
    if (reported_load < 0.0 || reported_load > 1.0)
        throw std::invalid_argument("reported load out of range");
    auto& info = state.oh_table[oh];
    info.reported_load = reported_load;
    info.alive = true;  // a report from a dead host revives it
    info.last_report = now;
}

std::vector<NodeId> sweep_liveness(DistributionState& state, DurationMs now,
                                   DurationMs interval, int dead_after_missed) {
    std::vector<NodeId> dead;
    for (auto& [oh, info] : state.oh_table) {
        if (!info.alive) continue;
        if (now - info.last_report > interval * dead_after_missed) dead.push_back(oh);
    }
    return dead;
}

DurationMs assignment_total_cost(const std::map<NodeId, NodeId>& assignment,
                                 const std::vector<endhost::MeasurementReport>& reports,
                                 const InterOhLatencyMatrix& L,
                                 const std::map<NodeId, double>& loads,
                                 const DistributionWeights& w) {
    std::set<NodeId> used;
    for (const auto& [_, oh] : assignment) used.insert(oh);
    DurationMs total{ms(0)};
    std::vector<NodeId> members(used.begin(), used.end());
    for (size_t i = 0; i < members.size(); ++i)
        for (size_t j = i + 1; j < members.size(); ++j)
            total += L.at(members[i], members[j]);
    for (const auto& r : reports) {
        auto it = assignment.find(r.reporter);
        if (it == assignment.end()) continue;
        for (const auto& s : r.samples) {
            if (s.oh == it->second) {
                double load = 0.0;
                if (auto l = loads.find(s.oh); l != loads.end()) load = l->second;
                total += edge_ms(s) + ms(w.w_load * load);
                break;
            }
        }
    }
    return total;
}

GlobalOptimum global_optimal_assignment(const std::vector<endhost::MeasurementReport>& reports,
                                        const InterOhLatencyMatrix& L,
                                        const std::map<NodeId, double>& loads,
                                        const DistributionWeights& w) {
    std::set<NodeId> all_ohs;
    for (const auto& r : reports)
        for (const auto& s : r.samples)
            if (s.ok()) all_ohs.insert(s.oh);
    if (all_ohs.size() > 4 || reports.size() > 8)
        throw std::invalid_argument("instance too large for exhaustive enumeration");

    // Reports sorted by end-host id; per-report candidates sorted by host id,
    // so enumeration order is lexicographic and ties resolve to the smallest
    // assignment vector.
    auto sorted = reports;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.reporter < b.reporter; });
    std::vector<std::vector<NodeId>> cands(sorted.size());
    for (size_t i = 0; i < sorted.size(); ++i) {
        for (const auto& s : sorted[i].samples)
            if (s.ok()) cands[i].push_back(s.oh);
        std::sort(cands[i].begin(), cands[i].end());
        if (cands[i].empty())
            throw std::invalid_argument("report with no usable sample");
    }

    std::vector<size_t> idx(sorted.size(), 0);
    std::optional<GlobalOptimum> best;
    while (true) {
        std::map<NodeId, NodeId> assignment;
        for (size_t i = 0; i < sorted.size(); ++i)
            assignment[sorted[i].reporter] = cands[i][idx[i]];
        DurationMs cost = assignment_total_cost(assignment, sorted, L, loads, w);
        if (!best || cost < best->total_cost) best = GlobalOptimum{assignment, cost};

        size_t k = sorted.size();
        while (k > 0) {
            if (++idx[k - 1] < cands[k - 1].size()) break;
            idx[k - 1] = 0;
            --k;
        }
        if (k == 0) break;
    }
    return *best;
}

void Service::on_oh_report(const endhost::MeasurementReport& r) {
    for (const auto& s : r.samples) {
        if (!s.ok()) continue;
        matrix_.set(NodeId{Role::OH, r.reporter.id}, s.oh, s.lat1);
    }
}

void Service::on_load_report(NodeId oh, double load, DurationMs now) {
    update_load(oh, load, state_, now);
}

std::optional<Assignment> Service::on_eh_report(const endhost::MeasurementReport& r) {
    using Clock = std::chrono::steady_clock;
    Clock::time_point t0;
    if (timing_) t0 = Clock::now();
    std::optional<Assignment> out;
    try {
        out = distribute(r, state_, matrix_);
    } catch (const NoCandidateError&) {
        return std::nullopt;
    }
    double us = 0.0;
    if (timing_)
        us = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
    log_.push_back({out->eh, out->oh, out->cost, us});
    return out;
}

std::vector<std::pair<NodeId, std::vector<NodeId>>> Service::sweep(DurationMs now,
                                                                   DurationMs interval,
                                                                   int dead_after_missed) {
    std::vector<std::pair<NodeId, std::vector<NodeId>>> out;
    for (NodeId oh : sweep_liveness(state_, now, interval, dead_after_missed))
        out.emplace_back(oh, handle_oh_failure(oh, state_, matrix_));
    return out;
}

std::vector<NodeId> Service::mark_dead(NodeId oh) {
    return handle_oh_failure(oh, state_, matrix_);
}

}  // namespace mcast::monitor
