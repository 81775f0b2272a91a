#include "mcast/endhost.hpp"

#include <algorithm>
#include <stdexcept>

namespace mcast::endhost {

bool MeasurementReport::unusable() const {
    return std::none_of(samples.begin(), samples.end(),
                        [](const LatencySample& s) { return s.ok(); });
}

DurationMs cumm_lat(const LatencySample& s) {
    if (!s.ok()) throw std::invalid_argument("cumm_lat on a failed sample");
    return s.lat1 + s.lat2 + s.lat3;
}

DurationMs mean_rtt(const LatencySample& s) {
    return cumm_lat(s) / 3.0;
}

DurationMs sample_total(const LatencySample& s) {
    if (s.ok()) return s.conn + s.lat1 + s.lat2 + s.lat3;
    return s.elapsed;
}

DurationMs compute_mi(const std::vector<LatencySample>& samples) {
    if (samples.empty()) throw std::invalid_argument("compute_mi on empty sample list");
    DurationMs best = sample_total(samples.front());
    for (size_t i = 1; i < samples.size(); ++i)
        best = std::max(best, sample_total(samples[i]));
    return best;
}

std::vector<PartitionGroup> partition(std::vector<NodeId> ehs, std::vector<NodeId> ohs,
                                      int group_count) {
    if (group_count < 1) throw std::invalid_argument("group_count must be >= 1");
    if (static_cast<size_t>(group_count) > ohs.size())
        throw std::invalid_argument("group_count exceeds overlay host count");
    std::sort(ehs.begin(), ehs.end());
    std::sort(ohs.begin(), ohs.end());
    std::vector<PartitionGroup> groups(static_cast<size_t>(group_count));
    for (size_t i = 0; i < ehs.size(); ++i) groups[i % group_count].ehs.push_back(ehs[i]);
    for (size_t i = 0; i < ohs.size(); ++i) groups[i % group_count].ohs.push_back(ohs[i]);
    return groups;
}

std::vector<NodeId> ohs_for(NodeId eh, const std::vector<NodeId>& ehs,
                            const std::vector<NodeId>& ohs, const StrategyConfig& strategy) {
    if (!strategy.is_partitioned()) {
        auto sorted = ohs;
        std::sort(sorted.begin(), sorted.end());
        return sorted;
    }
    auto groups = partition(ehs, ohs, strategy.group_count());
    for (const auto& g : groups)
        if (std::find(g.ehs.begin(), g.ehs.end(), eh) != g.ehs.end()) return g.ohs;
    return {};
}

}  // namespace mcast::endhost
