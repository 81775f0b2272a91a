#include "mcast/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mcast/util.hpp"

namespace mcast {

namespace {

struct CountryCount {
    const char* name;
    int count;
};

// Overlay-host deployment counts for the nominal 40-node setting.
constexpr CountryCount kOhCountries[] = {
    {"Austria", 1}, {"Canada", 2},  {"France", 4},  {"Germany", 9},
    {"Greece", 1},  {"Hungary", 1}, {"Israel", 1},  {"Italy", 6},
    {"Korea", 2},   {"Poland", 3},  {"Romania", 2}, {"Spain", 2},
    {"Switzerland", 1}, {"US", 5},
};

// End-host deployment counts as published for the nominal 1000-node
// setting. Note these sum to 1010; preset expansion corrects the total.
constexpr CountryCount kEhCountries[] = {
    {"Argentina", 10}, {"Australia", 10}, {"Austria", 40},  {"Belgium", 20},
    {"Canada", 100},   {"China", 20},     {"Finland", 10},  {"France", 110},
    {"Germany", 160},  {"Greece", 10},    {"Hungary", 20},  {"Italy", 60},
    {"Japan", 10},     {"Korea", 20},     {"Netherlands", 20}, {"Poland", 40},
    {"Portugal", 10},  {"Romania", 20},   {"Russia", 20},   {"Spain", 40},
    {"Switzerland", 10}, {"Taiwan", 10},  {"US", 240},
};

using Counts = std::vector<std::pair<std::string, int>>;

// Largest-remainder scaling to an exact target total. Ties broken by
// (remainder desc, original count desc, name asc) so results are stable.
Counts scale_counts(const Counts& base, int target) {
    long total = 0;
    for (const auto& [_, c] : base) total += c;
    if (total == 0 || target < 0) throw ScenarioError("cannot scale empty count table");

    struct Row {
        std::string name;
        int orig;
        int floor_val;
        double rem;
    };
    std::vector<Row> rows;
    long floor_sum = 0;
    for (const auto& [name, c] : base) {
        double exact = static_cast<double>(c) * target / static_cast<double>(total);
        int fl = static_cast<int>(std::floor(exact));
        rows.push_back({name, c, fl, exact - fl});
        floor_sum += fl;
    }
    long deficit = target - floor_sum;
    std::vector<size_t> order(rows.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (rows[a].rem != rows[b].rem) return rows[a].rem > rows[b].rem;
        if (rows[a].orig != rows[b].orig) return rows[a].orig > rows[b].orig;
        return rows[a].name < rows[b].name;
    });
    for (long i = 0; i < deficit; ++i) rows[order[i % order.size()]].floor_val += 1;

    Counts out;
    for (const auto& r : rows)
        if (r.floor_val > 0) out.emplace_back(r.name, r.floor_val);
    std::sort(out.begin(), out.end());
    return out;
}

Counts table1(int n) {
    Counts base;
    for (const auto& c : kOhCountries) base.emplace_back(c.name, c.count);
    return scale_counts(base, n);
}

// The published table is kept verbatim except that the countries other than
// the US (240) and Germany (160) are rescaled so the nominal total is 1000.
Counts table2_base() {
    Counts pinned, rest;
    for (const auto& c : kEhCountries) {
        if (std::string_view{c.name} == "US" || std::string_view{c.name} == "Germany")
            pinned.emplace_back(c.name, c.count);
        else
            rest.emplace_back(c.name, c.count);
    }
    Counts scaled = scale_counts(rest, 600);
    scaled.insert(scaled.end(), pinned.begin(), pinned.end());
    std::sort(scaled.begin(), scaled.end());
    return scaled;
}

Counts table2(int n) {
    if (n == 1000) return table2_base();
    return scale_counts(table2_base(), n);
}

// Coarse geographic zone per country, for default latency generation.
enum class Zone { EUW, EUE, NA, AS, OC, SA, Other };

Zone zone_of(const std::string& region) {
    static const std::map<std::string, Zone> zones = {
        {"Austria", Zone::EUW},  {"Belgium", Zone::EUW}, {"Finland", Zone::EUW},
        {"France", Zone::EUW},   {"Germany", Zone::EUW}, {"Italy", Zone::EUW},
        {"Netherlands", Zone::EUW}, {"Portugal", Zone::EUW}, {"Spain", Zone::EUW},
        {"Switzerland", Zone::EUW},
        {"Greece", Zone::EUE},   {"Hungary", Zone::EUE}, {"Poland", Zone::EUE},
        {"Romania", Zone::EUE},  {"Russia", Zone::EUE},
        {"Canada", Zone::NA},    {"US", Zone::NA},
        {"China", Zone::AS},     {"Israel", Zone::AS},   {"Japan", Zone::AS},
        {"Korea", Zone::AS},     {"Taiwan", Zone::AS},
        {"Australia", Zone::OC},
        {"Argentina", Zone::SA},
    };
    auto it = zones.find(region);
    return it == zones.end() ? Zone::Other : it->second;
}

double zone_distance_ms(Zone a, Zone b) {
    if (a > b) std::swap(a, b);
    auto pair = [](Zone x, Zone y) { return static_cast<int>(x) * 16 + static_cast<int>(y); };
    static const std::map<int, double> dist = {
        {pair(Zone::EUW, Zone::EUW), 50},  {pair(Zone::EUW, Zone::EUE), 60},
        {pair(Zone::EUW, Zone::NA), 75},   {pair(Zone::EUW, Zone::AS), 140},
        {pair(Zone::EUW, Zone::OC), 170},  {pair(Zone::EUW, Zone::SA), 130},
        {pair(Zone::EUE, Zone::EUE), 52},  {pair(Zone::EUE, Zone::NA), 85},
        {pair(Zone::EUE, Zone::AS), 130},  {pair(Zone::EUE, Zone::OC), 175},
        {pair(Zone::EUE, Zone::SA), 140},  {pair(Zone::NA, Zone::NA), 55},
        {pair(Zone::NA, Zone::AS), 110},   {pair(Zone::NA, Zone::OC), 120},
        {pair(Zone::NA, Zone::SA), 90},    {pair(Zone::AS, Zone::AS), 60},
        {pair(Zone::AS, Zone::OC), 100},   {pair(Zone::AS, Zone::SA), 180},
        {pair(Zone::OC, Zone::OC), 42},    {pair(Zone::OC, Zone::SA), 150},
        {pair(Zone::SA, Zone::SA), 42},
    };
    auto it = dist.find(pair(a, b));
    if (it != dist.end()) return it->second;
    return a == b ? 50 : 100;  // unknown regions get a generic distance
}

}  // namespace

Counts preset_counts(const std::string& preset) {
    auto bad = [&] { throw ScenarioError("unknown preset '" + preset + "'"); };
    if (preset.starts_with("table1-") && preset.ends_with("oh")) {
        int n = 0;
        auto mid = preset.substr(7, preset.size() - 9);
        auto [p, ec] = std::from_chars(mid.data(), mid.data() + mid.size(), n);
        if (ec != std::errc{} || p != mid.data() + mid.size() || n < 1) bad();
        return table1(n);
    }
    if (preset.starts_with("table2-") && preset.ends_with("eh")) {
        int n = 0;
        auto mid = preset.substr(7, preset.size() - 9);
        auto [p, ec] = std::from_chars(mid.data(), mid.data() + mid.size(), n);
        if (ec != std::errc{} || p != mid.data() + mid.size() || n < 1) bad();
        return table2(n);
    }
    bad();
    return {};
}

LinkModel default_link(const std::string& from, const std::string& to) {
    double base;
    if (from == to) {
        base = 42.0;
    } else {
        base = zone_distance_ms(zone_of(from), zone_of(to));
        // Deterministic per-pair spread so same-zone pairs are not identical.
        std::string lo = std::min(from, to), hi = std::max(from, to);
        uint64_t h = util::fnv1a64(lo + "|" + hi);
        double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        base *= 1.0 + 0.25 * u;
    }
    LinkModel m;
    m.base_latency = ms(base);
    m.jitter = ms(base * 0.10);
    m.connect_fast = ms(base * 2.0);
    return m;
}

int StrategyConfig::group_count() const {
    if (auto* p = std::get_if<Partitioned>(&kind)) return p->group_count;
    return 1;
}

BasicStrategy StrategyConfig::basic() const {
    if (auto* p = std::get_if<Partitioned>(&kind)) return p->inner;
    if (auto* b = std::get_if<BaselineReconnect>(&kind)) return *b;
    if (auto* n = std::get_if<NoReconnect>(&kind)) return *n;
    return std::get<AppTimeout>(kind);
}

StrategyConfig StrategyConfig::parse(const std::string& text) {
    auto bad = [&] { throw ScenarioError("unknown strategy '" + text + "'"); };
    auto parse_basic = [&](const std::string& s) -> BasicStrategy {
        if (s == "baseline") return BaselineReconnect{};
        if (s.starts_with("baseline:")) {
            int n = std::stoi(s.substr(9));
            if (n < 1) bad();
            return BaselineReconnect{n};
        }
        if (s == "noreconnect") return NoReconnect{};
        if (s.starts_with("apptimeout:")) {
            double v = std::stod(s.substr(11));
            if (v <= 0) bad();
            return AppTimeout{ms(v)};
        }
        bad();
        return NoReconnect{};
    };

    StrategyConfig cfg;
    if (text.starts_with("partition:")) {
        auto rest = text.substr(10);
        auto plus = rest.find('+');
        Partitioned p;
        std::string count_part = plus == std::string::npos ? rest : rest.substr(0, plus);
        p.group_count = std::stoi(count_part);
        if (p.group_count < 1) bad();
        if (plus != std::string::npos)
            p.inner = parse_basic(rest.substr(plus + 1));
        else
            p.inner = BaselineReconnect{};
        cfg.kind = p;
    } else {
        std::visit([&](auto v) { cfg.kind = v; }, parse_basic(text));
    }
    return cfg;
}

std::string StrategyConfig::to_string() const {
    auto basic_str = [](const BasicStrategy& b) -> std::string {
        if (auto* r = std::get_if<BaselineReconnect>(&b))
            return "baseline:" + std::to_string(r->max_attempts);
        if (std::holds_alternative<NoReconnect>(b)) return "noreconnect";
        char buf[48];
        std::snprintf(buf, sizeof buf, "apptimeout:%.17g",
                      std::get<AppTimeout>(b).timeout.count());
        return buf;
    };
    if (auto* p = std::get_if<Partitioned>(&kind))
        return "partition:" + std::to_string(p->group_count) + "+" + basic_str(p->inner);
    if (auto* r = std::get_if<BaselineReconnect>(&kind))
        return "baseline:" + std::to_string(r->max_attempts);
    if (std::holds_alternative<NoReconnect>(kind)) return "noreconnect";
    char buf[48];
    std::snprintf(buf, sizeof buf, "apptimeout:%.17g",
                  std::get<AppTimeout>(kind).timeout.count());
    return buf;
}

const LinkModel& ScenarioSpec::link(const std::string& from, const std::string& to) const {
    auto it = region_links.find({from, to});
    if (it == region_links.end())
        throw ScenarioError("no link model for " + from + " -> " + to);
    return it->second;
}

const NodeSpec& ScenarioSpec::spec_of(NodeId n) const {
    const std::vector<NodeSpec>* v = nullptr;
    switch (n.role) {
        case Role::OH: v = &oh_nodes; break;
        case Role::EH: v = &eh_nodes; break;
        case Role::MH: return mh_node;
    }
    if (n.id < v->size() && (*v)[n.id].node == n) return (*v)[n.id];
    for (const auto& s : *v)
        if (s.node == n) return s;
    throw ScenarioError("unknown node " + node_name(n));
}

std::vector<NodeId> ScenarioSpec::oh_ids() const {
    std::vector<NodeId> out;
    out.reserve(oh_nodes.size());
    for (const auto& s : oh_nodes) out.push_back(s.node);
    return out;
}

std::vector<NodeId> ScenarioSpec::eh_ids() const {
    std::vector<NodeId> out;
    out.reserve(eh_nodes.size());
    for (const auto& s : eh_nodes) out.push_back(s.node);
    return out;
}

namespace {

struct KV {
    std::map<std::string, std::string> kv;
    int line;

    bool has(const std::string& k) const { return kv.count(k) > 0; }

    std::string str(const std::string& k) const {
        auto it = kv.find(k);
        if (it == kv.end())
            throw ScenarioError("line " + std::to_string(line) + ": missing key '" + k + "'");
        return it->second;
    }

    double num(const std::string& k) const {
        auto s = str(k);
        try {
            size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("");
            return v;
        } catch (...) {
            throw ScenarioError("line " + std::to_string(line) + ": bad number for '" + k + "'");
        }
    }

    double prob(const std::string& k) const {
        double v = num(k);
        if (v < 0.0 || v > 1.0)
            throw ScenarioError("line " + std::to_string(line) + ": '" + k +
                                "' must be in [0,1], got " + str(k));
        return v;
    }

    long integer(const std::string& k) const {
        auto s = str(k);
        long v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw ScenarioError("line " + std::to_string(line) + ": bad integer for '" + k + "'");
        return v;
    }
};

KV parse_kv(const std::string& body, int line) {
    KV out;
    out.line = line;
    for (const auto& tok : util::split(body, ' ')) {
        auto t = util::trim(tok);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ScenarioError("line " + std::to_string(line) + ": expected key=value, got '" + t + "'");
        out.kv[t.substr(0, eq)] = t.substr(eq + 1);
    }
    return out;
}

}  // namespace

ScenarioSpec load_scenario(const std::string& text) {
    ScenarioSpec spec;
    struct Group {
        std::string region;
        int count;
        LoadClass load;
    };
    std::vector<Group> oh_groups, eh_groups;
    struct LinkLine {
        std::string from, to;
        KV kv;
    };
    std::vector<LinkLine> link_lines;
    bool saw_mh = false;

    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        auto line = util::trim(raw);
        if (line.empty() || line[0] == '#') continue;

        if (line.starts_with("preset=")) {
            auto name = line.substr(7);
            auto counts = preset_counts(name);
            bool is_oh = name.starts_with("table1");
            for (const auto& [region, count] : counts) {
                Group g{region, count, {}};
                if (is_oh) g.load = LoadClass{0.05, 0.05};
                (is_oh ? oh_groups : eh_groups).push_back(g);
            }
            continue;
        }

        if (!line.starts_with("["))
            throw ScenarioError("line " + std::to_string(lineno) + ": expected section or preset");
        auto close = line.find(']');
        if (close == std::string::npos)
            throw ScenarioError("line " + std::to_string(lineno) + ": unterminated section name");
        auto section = line.substr(1, close - 1);
        auto kv = parse_kv(line.substr(close + 1), lineno);

        if (section == "oh" || section == "eh") {
            Group g;
            g.region = kv.str("region");
            g.count = kv.has("count") ? static_cast<int>(kv.integer("count")) : 1;
            if (g.count < 0)
                throw ScenarioError("line " + std::to_string(lineno) + ": count must be >= 0");
            double load = kv.has("load") ? kv.num("load") : 0.0;
            if (load < 0)
                throw ScenarioError("line " + std::to_string(lineno) + ": load must be >= 0");
            g.load = LoadClass{load, std::min(1.0, load)};
            (section == "oh" ? oh_groups : eh_groups).push_back(g);
        } else if (section == "mh") {
            if (saw_mh)
                throw ScenarioError("line " + std::to_string(lineno) + ": duplicate [mh] section");
            saw_mh = true;
            if (kv.has("region")) spec.mh_node.region = kv.str("region");
            if (kv.has("service_ms")) spec.proto.mh_service = ms(kv.num("service_ms"));
        } else if (section == "link") {
            link_lines.push_back({kv.str("from"), kv.str("to"), kv});
        } else if (section == "run") {
            if (kv.has("strategy")) spec.strategy = StrategyConfig::parse(kv.str("strategy"));
            if (kv.has("seed")) spec.seed = static_cast<uint64_t>(kv.integer("seed"));
            if (kv.has("w_load")) spec.w_load = kv.num("w_load");
        } else if (section == "failure") {
            FailureEvent ev;
            ev.at = ms(kv.num("at_ms"));
            auto kind = kv.str("kind");
            if (kind == "node_down") ev.kind = FailureKind::NodeDown;
            else if (kind == "node_up") ev.kind = FailureKind::NodeUp;
            else if (kind == "link_down") ev.kind = FailureKind::LinkDown;
            else if (kind == "link_up") ev.kind = FailureKind::LinkUp;
            else throw ScenarioError("line " + std::to_string(lineno) + ": unknown failure kind '" + kind + "'");
            auto target = kv.str("target");
            if (ev.kind == FailureKind::LinkDown || ev.kind == FailureKind::LinkUp) {
                auto dash = target.find('-');
                if (dash == std::string::npos)
                    throw ScenarioError("line " + std::to_string(lineno) +
                                        ": link failure target must be '<node>-<node>'");
                auto a = parse_node_name(target.substr(0, dash));
                auto b = parse_node_name(target.substr(dash + 1));
                if (!a || !b)
                    throw ScenarioError("line " + std::to_string(lineno) + ": bad link target '" + target + "'");
                ev.a = *a;
                ev.b = *b;
            } else {
                auto a = parse_node_name(target);
                if (!a)
                    throw ScenarioError("line " + std::to_string(lineno) + ": bad node target '" + target + "'");
                ev.a = *a;
            }
            spec.failures.push_back(ev);
        } else if (section == "tcp") {
            if (kv.has("cap_ms")) spec.tcp.os_cap = ms(kv.num("cap_ms"));
            if (kv.has("retx_ms")) {
                spec.tcp.syn_retx.clear();
                for (const auto& part : util::split(kv.str("retx_ms"), ','))
                    spec.tcp.syn_retx.push_back(ms(std::stod(part)));
            }
        } else if (section == "proto") {
            if (kv.has("load_interval_ms")) spec.proto.load_interval = ms(kv.num("load_interval_ms"));
            if (kv.has("dead_after_missed")) spec.proto.dead_after_missed = static_cast<int>(kv.integer("dead_after_missed"));
            if (kv.has("dedup_wait_ms")) spec.proto.dedup_wait = ms(kv.num("dedup_wait_ms"));
            if (kv.has("ping_deadline_ms")) spec.proto.ping_deadline = ms(kv.num("ping_deadline_ms"));
            if (kv.has("mh_service_ms")) spec.proto.mh_service = ms(kv.num("mh_service_ms"));
            if (kv.has("reconnect_backoff_ms")) spec.proto.reconnect_backoff = ms(kv.num("reconnect_backoff_ms"));
            if (kv.has("reconnect_backoff_cap_ms")) spec.proto.reconnect_backoff_cap = ms(kv.num("reconnect_backoff_cap_ms"));
            if (kv.has("reconnect_max_retries")) spec.proto.reconnect_max_retries = static_cast<int>(kv.integer("reconnect_max_retries"));
            if (kv.has("stream_retry_attempts")) spec.proto.stream_retry_attempts = static_cast<int>(kv.integer("stream_retry_attempts"));
            if (kv.has("measure_retry_max")) spec.proto.measure_retry_max = static_cast<int>(kv.integer("measure_retry_max"));
        } else {
            throw ScenarioError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
        }
    }

    uint32_t next_oh = 0, next_eh = 0;
    for (const auto& g : oh_groups)
        for (int i = 0; i < g.count; ++i)
            spec.oh_nodes.push_back({oh(next_oh++), g.region, g.load});
    for (const auto& g : eh_groups)
        for (int i = 0; i < g.count; ++i)
            spec.eh_nodes.push_back({eh(next_eh++), g.region, g.load});

    // Region universe: every region named by a node.
    std::vector<std::string> regions;
    auto add_region = [&](const std::string& r) {
        if (std::find(regions.begin(), regions.end(), r) == regions.end())
            regions.push_back(r);
    };
    for (const auto& n : spec.oh_nodes) add_region(n.region);
    for (const auto& n : spec.eh_nodes) add_region(n.region);
    add_region(spec.mh_node.region);
    std::sort(regions.begin(), regions.end());

    for (const auto& a : regions)
        for (const auto& b : regions)
            spec.region_links[{a, b}] = default_link(a, b);

    for (const auto& ll : link_lines) {
        std::vector<std::string> froms, tos;
        if (ll.from == "*") froms = regions;
        else froms = {ll.from};
        if (ll.to == "*") tos = regions;
        else tos = {ll.to};
        for (const auto& f : froms) {
            if (!spec.region_links.count({f, f}))
                throw ScenarioError("line " + std::to_string(ll.kv.line) + ": unknown region '" + f + "'");
        }
        for (const auto& t : tos) {
            if (!spec.region_links.count({t, t}))
                throw ScenarioError("line " + std::to_string(ll.kv.line) + ": unknown region '" + t + "'");
        }
        for (const auto& f : froms) {
            for (const auto& t : tos) {
                LinkModel& m = spec.region_links[{f, t}];
                const KV& kv = ll.kv;
                if (kv.has("base_ms")) m.base_latency = ms(kv.num("base_ms"));
                if (kv.has("jitter_ms")) m.jitter = ms(kv.num("jitter_ms"));
                if (kv.has("fast_ms")) m.connect_fast = ms(kv.num("fast_ms"));
                if (kv.has("slow_p")) m.slow_connect_p = kv.prob("slow_p");
                if (kv.has("slow_ms")) m.slow_connect = ms(kv.num("slow_ms"));
                if (kv.has("syn_loss_p")) m.syn_loss_p = kv.prob("syn_loss_p");
                if (kv.has("drop_p")) m.drop_p = kv.prob("drop_p");
                if (m.base_latency <= ms(0) && f != t)
                    throw ScenarioError("line " + std::to_string(kv.line) + ": base_ms must be > 0");
            }
        }
    }

    return spec;
}

namespace {

std::string fmt_g(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string serialize_scenario(const ScenarioSpec& spec) {
    std::ostringstream out;
    auto emit_nodes = [&](const char* section, const std::vector<NodeSpec>& nodes) {
        // Collapse runs of identical (region, load) into count groups.
        size_t i = 0;
        while (i < nodes.size()) {
            size_t j = i;
            while (j < nodes.size() && nodes[j].region == nodes[i].region &&
                   nodes[j].load == nodes[i].load)
                ++j;
            out << "[" << section << "] region=" << nodes[i].region
                << " count=" << (j - i) << " load=" << fmt_g(nodes[i].load.load_factor)
                << "\n";
            i = j;
        }
    };
    emit_nodes("oh", spec.oh_nodes);
    emit_nodes("eh", spec.eh_nodes);
    out << "[mh] region=" << spec.mh_node.region << "\n";
    for (const auto& [key, m] : spec.region_links) {
        out << "[link] from=" << key.first << " to=" << key.second
            << " base_ms=" << fmt_g(m.base_latency.count())
            << " jitter_ms=" << fmt_g(m.jitter.count())
            << " fast_ms=" << fmt_g(m.connect_fast.count())
            << " slow_p=" << fmt_g(m.slow_connect_p)
            << " slow_ms=" << fmt_g(m.slow_connect.count())
            << " syn_loss_p=" << fmt_g(m.syn_loss_p)
            << " drop_p=" << fmt_g(m.drop_p) << "\n";
    }
    out << "[run] strategy=" << spec.strategy.to_string() << " seed=" << spec.seed
        << " w_load=" << fmt_g(spec.w_load) << "\n";
    for (const auto& f : spec.failures) {
        out << "[failure] at_ms=" << fmt_g(f.at.count()) << " kind=";
        switch (f.kind) {
            case FailureKind::NodeDown: out << "node_down"; break;
            case FailureKind::NodeUp: out << "node_up"; break;
            case FailureKind::LinkDown: out << "link_down"; break;
            case FailureKind::LinkUp: out << "link_up"; break;
        }
        out << " target=" << node_name(f.a);
        if (f.b) out << "-" << node_name(*f.b);
        out << "\n";
    }
    out << "[tcp] cap_ms=" << fmt_g(spec.tcp.os_cap.count()) << " retx_ms=";
    for (size_t i = 0; i < spec.tcp.syn_retx.size(); ++i) {
        if (i) out << ",";
        out << fmt_g(spec.tcp.syn_retx[i].count());
    }
    out << "\n";
    const auto& p = spec.proto;
    out << "[proto] load_interval_ms=" << fmt_g(p.load_interval.count())
        << " dead_after_missed=" << p.dead_after_missed
        << " dedup_wait_ms=" << fmt_g(p.dedup_wait.count())
        << " ping_deadline_ms=" << fmt_g(p.ping_deadline.count())
        << " mh_service_ms=" << fmt_g(p.mh_service.count())
        << " reconnect_backoff_ms=" << fmt_g(p.reconnect_backoff.count())
        << " reconnect_backoff_cap_ms=" << fmt_g(p.reconnect_backoff_cap.count())
        << " reconnect_max_retries=" << p.reconnect_max_retries
        << " stream_retry_attempts=" << p.stream_retry_attempts
        << " measure_retry_max=" << p.measure_retry_max << "\n";
    return out.str();
}

uint64_t scenario_hash(const ScenarioSpec& spec) {
    return util::fnv1a64(serialize_scenario(spec));
}

}  // namespace mcast
