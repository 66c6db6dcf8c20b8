#pragma once

// Deterministic discrete-event simulation of encounters. A Scenario fixes
// the roster, follow edges, app-state schedules, contact plan, traffic, and
// resource limits; run() replays it into an EventLog. Identical scenarios
// (same seed included) serialize to byte-identical logs except for
// crypto_timing records, whose nanosecond payloads are wall-clock.
//
// Event ordering at equal timestamps: app_state_change, then contact_end,
// then contact_start, then bundle_created; remaining ties break on node ids
// and the event's scenario index, so the schedule is a total order.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sos/common.hpp"
#include "sos/crypto.hpp"
#include "sos/eventlog.hpp"
#include "sos/registry.hpp"
#include "sos/rng.hpp"
#include "sos/routing.hpp"
#include "sos/social.hpp"
#include "sos/trace.hpp"

namespace sos::netsim {

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class AppState : std::uint8_t { foreground, background, suspended };

inline std::string to_string(AppState s) {
    switch (s) {
        case AppState::foreground: return "foreground";
        case AppState::background: return "background";
        case AppState::suspended: return "suspended";
    }
    return "foreground";
}

inline AppState parse_app_state(const std::string& text) {
    if (text == "foreground") return AppState::foreground;
    if (text == "background") return AppState::background;
    if (text == "suspended") return AppState::suspended;
    throw ScenarioError("scenario: unknown app state \"" + text +
                        "\" (want foreground|background|suspended)");
}

/// Repeating schedule of (state, duration) phases, cycling forever from t=0.
struct AppStateSchedule {
    struct Phase {
        AppState state = AppState::foreground;
        double duration_s = 0.0;
    };
    std::vector<Phase> phases;

    double cycle_s() const {
        double sum = 0.0;
        for (const auto& p : phases) sum += p.duration_s;
        return sum;
    }

    AppState state_at(double t) const {
        const double cycle = cycle_s();
        double r = std::fmod(t, cycle);
        if (r < 0.0) r = 0.0;
        for (const auto& p : phases) {
            if (r < p.duration_s) return p.state;
            r -= p.duration_s;
        }
        return phases.back().state;
    }

    static AppStateSchedule always(AppState state) {
        return AppStateSchedule{{Phase{state, 1.0}}};
    }
};

/// Discovery success probability per app state; a contact is realized only
/// if both endpoints' draws succeed.
struct DiscoveryProbs {
    double foreground = 1.0;
    double background = 0.5;
    double suspended = 0.0;

    double for_state(AppState s) const {
        switch (s) {
            case AppState::foreground: return foreground;
            case AppState::background: return background;
            case AppState::suspended: return suspended;
        }
        return 0.0;
    }
};

struct NodeSpec {
    std::string username;
    std::vector<std::string> interests;
    std::vector<std::string> follows;  // usernames, in lookup order
    AppStateSchedule schedule = AppStateSchedule::always(AppState::foreground);
};

struct TrafficSpec {
    BundleKind kind = BundleKind::post;
    std::string author;  // username
    std::string to;      // recipient username, dm only
    double created_t = 0.0;
    std::size_t size_bytes = 0;  // post text / dm plaintext length
};

struct Limits {
    std::size_t capacity_bytes = 5 * 1024 * 1024;
    double ttl_s = 86400.0;
};

/// Closed interval of registry reachability; [0,0] covers bootstrap only.
struct OnlinePhase {
    double t0 = 0.0;
    double t1 = 0.0;
};

inline bool online_at(const std::vector<OnlinePhase>& phases, double t) {
    for (const auto& p : phases) {
        if (p.t0 <= t && t <= p.t1) return true;
    }
    return false;
}

struct Scenario {
    int schema = 1;
    std::uint64_t seed = 0;
    double horizon_s = 0.0;
    std::string scheme = "epidemic";
    std::vector<NodeSpec> nodes;
    std::vector<Contact> contacts;  // resolved: loaded/generated/inline, clamped to horizon
    std::vector<TrafficSpec> traffic;
    Limits limits;
    std::vector<OnlinePhase> online_phases;
    DiscoveryProbs discovery;

    const NodeSpec* find_node(const std::string& username) const {
        for (const auto& n : nodes) {
            if (n.username == username) return &n;
        }
        return nullptr;
    }

    /// Static checks; every violation is a configuration error. Call after
    /// any CLI overrides are applied.
    void validate() const;

    /// Canonical form of everything that defines the effective scenario
    /// except the scheme and seed, so one digest identifies the workload
    /// across scheme/seed sweeps (waypoint scenarios fold the seed in
    /// through the generated contacts).
    nlohmann::ordered_json canonical_json() const;

    std::string digest() const {
        const std::string text = canonical_json().dump();
        return sha256_hex(as_bytes(text));
    }

    static Scenario from_json(const nlohmann::json& j, const std::string& base_dir);
    static Scenario from_file(const std::string& path);
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j, const char* key,
                                     const char* context) {
    if (!j.contains(key)) {
        throw ScenarioError(std::string("scenario: ") + context + ": missing \"" + key + "\"");
    }
    return j.at(key);
}

inline double require_number(const nlohmann::json& j, const char* key, const char* context) {
    const auto& v = require(j, key, context);
    if (!v.is_number()) {
        throw ScenarioError(std::string("scenario: ") + context + ": \"" + key +
                            "\" must be a number");
    }
    return v.get<double>();
}

inline std::string require_string(const nlohmann::json& j, const char* key,
                                  const char* context) {
    const auto& v = require(j, key, context);
    if (!v.is_string()) {
        throw ScenarioError(std::string("scenario: ") + context + ": \"" + key +
                            "\" must be a string");
    }
    return v.get<std::string>();
}

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                                const char* context) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ScenarioError(std::string("scenario: ") + context + ": unknown key \"" + key +
                                "\"");
        }
    }
}

// Deterministic printable filler for generated post/dm text.
inline std::string filler_text(std::size_t size) {
    std::string out(size, 'a');
    for (std::size_t i = 0; i < size; ++i) {
        out[i] = static_cast<char>('a' + (i % 26));
    }
    return out;
}

}  // namespace detail

inline Scenario Scenario::from_json(const nlohmann::json& j, const std::string& base_dir) {
    if (!j.is_object()) throw ScenarioError("scenario: document must be an object");
    detail::reject_unknown_keys(j,
                                {"schema", "seed", "horizon_s", "scheme", "nodes", "connectivity",
                                 "traffic", "limits", "online_phases", "discovery"},
                                "top level");

    Scenario s;
    const auto& schema = detail::require(j, "schema", "top level");
    if (!schema.is_number_integer() || schema.get<int>() != 1) {
        throw ScenarioError("scenario: unsupported schema version (want 1)");
    }
    const auto& seed = detail::require(j, "seed", "top level");
    if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
        throw ScenarioError("scenario: \"seed\" must be an integer");
    }
    if (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<std::int64_t>() < 0) {
        throw ScenarioError("scenario: \"seed\" must be non-negative");
    }
    s.seed = seed.get<std::uint64_t>();
    s.horizon_s = detail::require_number(j, "horizon_s", "top level");
    if (j.contains("scheme")) s.scheme = detail::require_string(j, "scheme", "top level");

    if (j.contains("limits")) {
        const auto& l = j.at("limits");
        detail::reject_unknown_keys(l, {"capacity_bytes", "ttl_s"}, "limits");
        if (l.contains("capacity_bytes")) {
            const double cap = detail::require_number(l, "capacity_bytes", "limits");
            if (cap < 1.0) throw ScenarioError("scenario: limits: capacity_bytes must be >= 1");
            s.limits.capacity_bytes = static_cast<std::size_t>(cap);
        }
        if (l.contains("ttl_s")) s.limits.ttl_s = detail::require_number(l, "ttl_s", "limits");
    }

    if (j.contains("online_phases")) {
        const auto& phases = j.at("online_phases");
        if (!phases.is_array()) throw ScenarioError("scenario: online_phases must be an array");
        for (const auto& p : phases) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                throw ScenarioError("scenario: each online phase must be [t0, t1]");
            }
            s.online_phases.push_back({p[0].get<double>(), p[1].get<double>()});
        }
    }

    if (j.contains("discovery")) {
        const auto& d = j.at("discovery");
        detail::reject_unknown_keys(d, {"foreground", "background", "suspended"}, "discovery");
        if (d.contains("foreground")) {
            s.discovery.foreground = detail::require_number(d, "foreground", "discovery");
        }
        if (d.contains("background")) {
            s.discovery.background = detail::require_number(d, "background", "discovery");
        }
        if (d.contains("suspended")) {
            s.discovery.suspended = detail::require_number(d, "suspended", "discovery");
        }
    }

    const auto& nodes = detail::require(j, "nodes", "top level");
    if (!nodes.is_array() || nodes.empty()) {
        throw ScenarioError("scenario: \"nodes\" must be a nonempty array");
    }
    for (const auto& n : nodes) {
        detail::reject_unknown_keys(n, {"username", "interests", "follows", "schedule"}, "node");
        NodeSpec spec;
        spec.username = detail::require_string(n, "username", "node");
        if (n.contains("interests")) {
            for (const auto& tag : n.at("interests")) {
                if (!tag.is_string()) {
                    throw ScenarioError("scenario: node \"" + spec.username +
                                        "\": interests must be strings");
                }
                spec.interests.push_back(tag.get<std::string>());
            }
        }
        if (n.contains("follows")) {
            for (const auto& f : n.at("follows")) {
                if (!f.is_string()) {
                    throw ScenarioError("scenario: node \"" + spec.username +
                                        "\": follows must be usernames");
                }
                spec.follows.push_back(f.get<std::string>());
            }
        }
        if (n.contains("schedule")) {
            const auto& sched = n.at("schedule");
            if (!sched.is_array() || sched.empty()) {
                throw ScenarioError("scenario: node \"" + spec.username +
                                    "\": schedule must be a nonempty array");
            }
            spec.schedule.phases.clear();
            for (const auto& ph : sched) {
                if (!ph.is_array() || ph.size() != 2 || !ph[0].is_string() ||
                    !ph[1].is_number()) {
                    throw ScenarioError("scenario: node \"" + spec.username +
                                        "\": each schedule phase must be [state, duration_s]");
                }
                spec.schedule.phases.push_back(
                    {parse_app_state(ph[0].get<std::string>()), ph[1].get<double>()});
            }
        }
        s.nodes.push_back(std::move(spec));
    }

    const auto& conn = detail::require(j, "connectivity", "top level");
    detail::reject_unknown_keys(conn, {"trace", "contacts", "waypoint"}, "connectivity");
    const int sources = static_cast<int>(conn.contains("trace")) +
                        static_cast<int>(conn.contains("contacts")) +
                        static_cast<int>(conn.contains("waypoint"));
    if (sources != 1) {
        throw ScenarioError(
            "scenario: connectivity must have exactly one of \"trace\", \"contacts\", "
            "\"waypoint\"");
    }
    if (conn.contains("trace")) {
        const std::string rel = detail::require_string(conn, "trace", "connectivity");
        const std::filesystem::path p = std::filesystem::path(rel).is_absolute()
                                            ? std::filesystem::path(rel)
                                            : std::filesystem::path(base_dir) / rel;
        try {
            s.contacts = load_trace(p.string());
        } catch (const TraceError& e) {
            throw ScenarioError(std::string("scenario: connectivity trace: ") + e.what());
        }
    } else if (conn.contains("contacts")) {
        const auto& rows = conn.at("contacts");
        if (!rows.is_array()) {
            throw ScenarioError("scenario: connectivity contacts must be an array");
        }
        std::string csv{kTraceHeader};
        csv.push_back('\n');
        for (const auto& row : rows) {
            if (!row.is_array() || row.size() != 5 || !row[0].is_number() ||
                !row[1].is_number() || !row[2].is_string() || !row[3].is_string() ||
                !row[4].is_number()) {
                throw ScenarioError(
                    "scenario: each inline contact must be [t_start, t_end, node_a, node_b, "
                    "bandwidth_bps]");
            }
            csv += format_double(row[0].get<double>()) + "," +
                   format_double(row[1].get<double>()) + "," + row[2].get<std::string>() + "," +
                   row[3].get<std::string>() + "," + format_double(row[4].get<double>()) + "\n";
        }
        try {
            s.contacts = parse_trace_text(csv, "connectivity.contacts");
        } catch (const TraceError& e) {
            throw ScenarioError(std::string("scenario: ") + e.what());
        }
    } else {
        const auto& wp = conn.at("waypoint");
        detail::reject_unknown_keys(
            wp, {"area_m", "speed_mps", "pause_s", "range_m", "step_s", "bandwidth_bps"},
            "waypoint");
        WaypointParams params;
        const auto pair_of = [&](const char* key, double& lo, double& hi) {
            const auto& v = wp.at(key);
            if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
                throw ScenarioError(std::string("scenario: waypoint: \"") + key +
                                    "\" must be [lo, hi]");
            }
            lo = v[0].get<double>();
            hi = v[1].get<double>();
        };
        if (wp.contains("area_m")) {
            pair_of("area_m", params.area_width_m, params.area_height_m);
        }
        if (wp.contains("speed_mps")) pair_of("speed_mps", params.speed_min_mps, params.speed_max_mps);
        if (wp.contains("pause_s")) pair_of("pause_s", params.pause_min_s, params.pause_max_s);
        if (wp.contains("range_m")) params.range_m = detail::require_number(wp, "range_m", "waypoint");
        if (wp.contains("step_s")) params.step_s = detail::require_number(wp, "step_s", "waypoint");
        if (wp.contains("bandwidth_bps")) {
            params.bandwidth_bps = detail::require_number(wp, "bandwidth_bps", "waypoint");
        }
        std::vector<std::string> names;
        names.reserve(s.nodes.size());
        for (const auto& n : s.nodes) names.push_back(n.username);
        try {
            s.contacts = generate_waypoint_trace(params, names, s.horizon_s, s.seed);
        } catch (const InvalidParams& e) {
            throw ScenarioError(std::string("scenario: waypoint: ") + e.what());
        }
    }

    // Clamp the contact plan to the horizon: later windows cannot matter.
    {
        std::vector<Contact> clamped;
        for (auto& c : s.contacts) {
            if (c.t_start >= s.horizon_s) continue;
            c.t_end = std::min(c.t_end, s.horizon_s);
            if (c.t_start < c.t_end) clamped.push_back(std::move(c));
        }
        s.contacts = std::move(clamped);
    }

    if (j.contains("traffic")) {
        const auto& traffic = j.at("traffic");
        if (!traffic.is_array()) throw ScenarioError("scenario: \"traffic\" must be an array");
        for (const auto& t : traffic) {
            detail::reject_unknown_keys(t, {"type", "author", "to", "t", "size_bytes"},
                                        "traffic item");
            TrafficSpec spec;
            const std::string type = detail::require_string(t, "type", "traffic item");
            if (type == "post") {
                spec.kind = BundleKind::post;
            } else if (type == "dm") {
                spec.kind = BundleKind::dm;
            } else {
                throw ScenarioError("scenario: traffic type must be \"post\" or \"dm\", got \"" +
                                    type + "\"");
            }
            spec.author = detail::require_string(t, "author", "traffic item");
            if (spec.kind == BundleKind::dm) {
                spec.to = detail::require_string(t, "to", "traffic item");
            } else if (t.contains("to")) {
                throw ScenarioError("scenario: post traffic takes no \"to\" field");
            }
            spec.created_t = detail::require_number(t, "t", "traffic item");
            const double size = detail::require_number(t, "size_bytes", "traffic item");
            if (size < 0.0 || size != std::floor(size)) {
                throw ScenarioError("scenario: traffic size_bytes must be a non-negative integer");
            }
            spec.size_bytes = static_cast<std::size_t>(size);
            s.traffic.push_back(std::move(spec));
        }
    }
    return s;
}

inline Scenario Scenario::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("scenario: cannot open \"" + path + "\"");
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ScenarioError("scenario: \"" + path + "\" is not valid JSON");
    const std::string base = std::filesystem::path(path).parent_path().string();
    return from_json(j, base.empty() ? "." : base);
}

inline void Scenario::validate() const {
    const auto fail = [](const std::string& why) { throw ScenarioError("scenario: " + why); };

    if (!(horizon_s > 0.0) || !std::isfinite(horizon_s)) fail("horizon_s must be positive");
    if (!(limits.ttl_s > 0.0)) fail("limits: ttl_s must be positive");
    if (limits.capacity_bytes == 0) fail("limits: capacity_bytes must be positive");

    try {
        parse_scheme(scheme);
    } catch (const UnknownScheme& e) {
        fail(e.what());
    }

    std::set<std::string> usernames;
    for (const auto& n : nodes) {
        if (!crypto::valid_username(n.username)) {
            fail("invalid username \"" + n.username + "\" (want 1-32 chars of [a-z0-9_])");
        }
        if (!usernames.insert(n.username).second) {
            fail("duplicate username \"" + n.username + "\"");
        }
        if (n.schedule.phases.empty()) fail("node \"" + n.username + "\": empty schedule");
        for (const auto& p : n.schedule.phases) {
            if (!(p.duration_s > 0.0)) {
                fail("node \"" + n.username + "\": schedule durations must be positive");
            }
        }
        try {
            social::normalize_interests(n.interests);
        } catch (const social::InvalidProfile& e) {
            fail("node \"" + n.username + "\": " + e.what());
        }
    }
    for (const auto& n : nodes) {
        std::set<std::string> seen;
        for (const auto& f : n.follows) {
            if (f == n.username) fail("node \"" + n.username + "\" follows itself");
            if (usernames.count(f) == 0) {
                fail("node \"" + n.username + "\" follows unknown user \"" + f + "\"");
            }
            if (!seen.insert(f).second) {
                fail("node \"" + n.username + "\" follows \"" + f + "\" twice");
            }
        }
    }

    for (const auto& p : online_phases) {
        if (p.t1 < p.t0) fail("online phase with t1 < t0");
        if (p.t0 < 0.0) fail("online phase starts before t=0");
    }
    if (!online_at(online_phases, 0.0)) {
        fail("registry-unreachable at bootstrap: no online phase covers t=0, so accounts "
             "cannot be created");
    }

    const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(discovery.foreground) || !in_unit(discovery.background) ||
        !in_unit(discovery.suspended)) {
        fail("discovery probabilities must lie in [0,1]");
    }

    for (const auto& c : contacts) {
        if (usernames.count(c.node_a) == 0 || usernames.count(c.node_b) == 0) {
            fail("contact references unknown node \"" +
                 (usernames.count(c.node_a) == 0 ? c.node_a : c.node_b) + "\"");
        }
    }

    // Follower sets are fixed at bootstrap, so audience and key reachability
    // are static properties.
    std::map<std::string, std::size_t> follower_count;
    std::map<std::string, std::set<std::string>> follows_of;
    for (const auto& n : nodes) {
        for (const auto& f : n.follows) {
            follower_count[f] += 1;
            follows_of[n.username].insert(f);
        }
    }
    std::size_t index = 0;
    for (const auto& t : traffic) {
        const std::string where = "traffic[" + std::to_string(index++) + "]";
        if (usernames.count(t.author) == 0) {
            fail(where + ": unknown author \"" + t.author + "\"");
        }
        if (t.created_t < 0.0 || t.created_t > horizon_s) {
            fail(where + ": t outside [0, horizon_s]");
        }
        if (t.kind == BundleKind::post) {
            if (t.size_bytes > social::kMaxPostTextBytes) {
                fail(where + ": text-too-long: post size_bytes exceeds " +
                     std::to_string(social::kMaxPostTextBytes));
            }
            if (follower_count[t.author] == 0) {
                fail(where + ": no-audience: \"" + t.author + "\" has no followers");
            }
        } else {
            if (usernames.count(t.to) == 0) fail(where + ": unknown recipient \"" + t.to + "\"");
            if (t.to == t.author) fail(where + ": dm to self");
            const bool followed = follows_of[t.author].count(t.to) != 0;
            if (!followed && !online_at(online_phases, t.created_t)) {
                fail(where + ": unknown-recipient: \"" + t.author + "\" does not follow \"" +
                     t.to + "\" and the registry is offline at t=" + format_double(t.created_t));
            }
        }
    }
}

inline nlohmann::ordered_json Scenario::canonical_json() const {
    nlohmann::ordered_json j;
    j["schema"] = schema;
    j["horizon_s"] = horizon_s;
    j["limits"] = {{"capacity_bytes", limits.capacity_bytes}, {"ttl_s", limits.ttl_s}};
    auto phases = nlohmann::ordered_json::array();
    for (const auto& p : online_phases) phases.push_back({p.t0, p.t1});
    j["online_phases"] = std::move(phases);
    j["discovery"] = {{"foreground", discovery.foreground},
                      {"background", discovery.background},
                      {"suspended", discovery.suspended}};
    auto node_list = nlohmann::ordered_json::array();
    for (const auto& n : nodes) {
        nlohmann::ordered_json nj;
        nj["username"] = n.username;
        nj["interests"] = n.interests;
        nj["follows"] = n.follows;
        auto sched = nlohmann::ordered_json::array();
        for (const auto& p : n.schedule.phases) {
            sched.push_back({to_string(p.state), p.duration_s});
        }
        nj["schedule"] = std::move(sched);
        node_list.push_back(std::move(nj));
    }
    j["nodes"] = std::move(node_list);
    auto contact_list = nlohmann::ordered_json::array();
    for (const auto& c : contacts) {
        contact_list.push_back({c.t_start, c.t_end, c.node_a, c.node_b, c.bandwidth_bps});
    }
    j["contacts"] = std::move(contact_list);
    auto traffic_list = nlohmann::ordered_json::array();
    for (const auto& t : traffic) {
        nlohmann::ordered_json tj;
        tj["type"] = to_string(t.kind);
        tj["author"] = t.author;
        if (t.kind == BundleKind::dm) tj["to"] = t.to;
        tj["t"] = t.created_t;
        tj["size_bytes"] = t.size_bytes;
        traffic_list.push_back(std::move(tj));
    }
    j["traffic"] = std::move(traffic_list);
    return j;
}

/// Executes one scenario. Construct, call run() once, then read the log and
/// query nodes for application state (feeds, dms, discovery).
class Simulation {
public:
    explicit Simulation(Scenario scenario) : scenario_(std::move(scenario)) {
        scenario_.validate();
        scheme_ = parse_scheme(scenario_.scheme);
    }

    const EventLog& run() {
        if (ran_) return log_;
        ran_ = true;
        setup();
        event_loop();
        final_sweep();
        return log_;
    }

    const EventLog& log() const { return log_; }
    const Scenario& scenario() const { return scenario_; }

    social::Node& node(const std::string& username) {
        const auto it = node_index_.find(username);
        if (it == node_index_.end()) throw SimError("no such node \"" + username + "\"");
        return *nodes_[it->second];
    }

private:
    // Forwards crypto operation durations into the log at current sim time.
    class Sink final : public crypto::TimingSink {
    public:
        explicit Sink(Simulation& sim) : sim_(sim) {}
        void record(std::string_view op, std::uint64_t nanos) override {
            Record r;
            r["type"] = "crypto_timing";
            r["t"] = sim_.now_;
            r["op"] = std::string(op);
            r["nanos"] = nanos;
            sim_.log_.append(std::move(r));
        }

    private:
        Simulation& sim_;
    };

    // Registry access gated by the online phases; logs every completed call.
    class GatedRegistry final : public registry::RegistryClient {
    public:
        GatedRegistry(Simulation& sim, registry::RegistryStore& store)
            : sim_(sim), inner_(store) {}

        registry::RegistryRecord register_account(const std::string& username,
                                                  const std::string& public_key) override {
            require_online();
            auto rec = inner_.register_account(username, public_key);
            log_call("register", username);
            return rec;
        }

        std::optional<registry::RegistryRecord> lookup(const std::string& username) override {
            require_online();
            auto rec = inner_.lookup(username);
            log_call("lookup", username);
            return rec;
        }

    private:
        void require_online() const {
            if (!online_at(sim_.scenario_.online_phases, sim_.now_)) {
                throw registry::RegistryUnreachable(
                    "registry-unreachable: offline at t=" + format_double(sim_.now_));
            }
        }

        void log_call(const char* op, const std::string& username) {
            Record r;
            r["type"] = "registry_call";
            r["t"] = sim_.now_;
            r["node"] = sim_.caller_;
            r["op"] = op;
            r["username"] = username;
            sim_.log_.append(std::move(r));
        }

        Simulation& sim_;
        registry::LocalRegistryClient inner_;
    };

    struct Event {
        double t = 0.0;
        int rank = 0;  // 0 app_state, 1 contact_end, 2 contact_start, 3 bundle_created
        std::string k1;
        std::string k2;
        std::size_t index = 0;
        AppState state = AppState::foreground;

        bool operator<(const Event& o) const {
            if (t != o.t) return t < o.t;
            if (rank != o.rank) return rank < o.rank;
            if (k1 != o.k1) return k1 < o.k1;
            if (k2 != o.k2) return k2 < o.k2;
            return index < o.index;
        }
    };

    struct LiveContact {
        double budget_bytes = 0.0;
    };

    void setup() {
        {
            Record r;
            r["type"] = "run_meta";
            r["t"] = 0.0;
            r["schema"] = 1;
            r["scheme"] = scenario_.scheme;
            r["seed"] = scenario_.seed;
            r["scenario_digest"] = scenario_.digest();
            r["horizon_s"] = scenario_.horizon_s;
            log_.append(std::move(r));
        }

        store_ = std::make_unique<registry::RegistryStore>(registry::RegistryStore::in_memory());
        gate_ = std::make_unique<GatedRegistry>(*this, *store_);
        sink_ = std::make_unique<Sink>(*this);

        // Accounts first (roster order), then follow edges, so lookups can
        // resolve regardless of roster position.
        for (const auto& spec : scenario_.nodes) {
            caller_ = spec.username;
            auto node = std::make_unique<social::Node>(
                spec.username, spec.interests, scheme_, scenario_.limits.capacity_bytes,
                scenario_.limits.ttl_s, identity_seed(spec.username), sink_.get());
            node->create_account(*gate_);
            account_of_[spec.username] = node->account_id();
            username_of_[node->account_id()] = spec.username;
            node_index_[spec.username] = nodes_.size();
            nodes_.push_back(std::move(node));

            Record r;
            r["type"] = "account_created";
            r["t"] = 0.0;
            r["node"] = spec.username;
            r["account_id"] = account_of_[spec.username];
            log_.append(std::move(r));
        }

        for (const auto& spec : scenario_.nodes) {
            caller_ = spec.username;
            social::Node& follower = node(spec.username);
            for (const auto& followee : spec.follows) {
                follower.follow(followee, gate_.get());
                follow_graph_.add(account_of_[spec.username], account_of_[followee]);

                Record r;
                r["type"] = "follow";
                r["t"] = 0.0;
                r["follower"] = spec.username;
                r["followee"] = followee;
                log_.append(std::move(r));
            }
        }

        for (const auto& spec : scenario_.nodes) {
            Record r;
            r["type"] = "app_state_change";
            r["t"] = 0.0;
            r["node"] = spec.username;
            r["state"] = to_string(spec.schedule.state_at(0.0));
            log_.append(std::move(r));
        }
    }

    std::vector<Event> build_events() const {
        std::vector<Event> events;
        for (const auto& spec : scenario_.nodes) {
            AppState prev = spec.schedule.state_at(0.0);
            double t = 0.0;
            std::size_t counter = 0;
            std::size_t phase = 0;
            while (true) {
                t += spec.schedule.phases[phase].duration_s;
                if (t > scenario_.horizon_s) break;
                phase = (phase + 1) % spec.schedule.phases.size();
                const AppState next = spec.schedule.phases[phase].state;
                if (next != prev) {
                    events.push_back({t, 0, spec.username, "", counter++, next});
                    prev = next;
                }
            }
        }
        for (std::size_t i = 0; i < scenario_.contacts.size(); ++i) {
            const Contact& c = scenario_.contacts[i];
            events.push_back({c.t_start, 2, c.node_a, c.node_b, i, AppState::foreground});
            events.push_back({c.t_end, 1, c.node_a, c.node_b, i, AppState::foreground});
        }
        for (std::size_t i = 0; i < scenario_.traffic.size(); ++i) {
            const TrafficSpec& t = scenario_.traffic[i];
            events.push_back({t.created_t, 3, t.author, "", i, AppState::foreground});
        }
        std::sort(events.begin(), events.end());
        return events;
    }

    void event_loop() {
        const std::vector<Event> events = build_events();
        for (const Event& ev : events) {
            now_ = ev.t;
            switch (ev.rank) {
                case 0: handle_app_state(ev); break;
                case 1: handle_contact_end(ev); break;
                case 2: handle_contact_start(ev); break;
                case 3: handle_bundle_created(ev); break;
            }
            drain_dirty();
        }
    }

    void handle_app_state(const Event& ev) {
        Record r;
        r["type"] = "app_state_change";
        r["t"] = now_;
        r["node"] = ev.k1;
        r["state"] = to_string(ev.state);
        log_.append(std::move(r));
    }

    void handle_contact_start(const Event& ev) {
        const Contact& c = scenario_.contacts[ev.index];
        SplitMix64 rng = substream(scenario_.seed, "disc/" + std::to_string(ev.index));
        const double ua = rng.next_double();
        const double ub = rng.next_double();
        const double pa =
            scenario_.discovery.for_state(state_of(c.node_a, c.t_start));
        const double pb =
            scenario_.discovery.for_state(state_of(c.node_b, c.t_start));
        if (!(ua < pa && ub < pb)) return;

        live_[ev.index] = LiveContact{c.bandwidth_bps * (c.t_end - c.t_start)};

        Record r;
        r["type"] = "contact_start";
        r["t"] = now_;
        r["node_a"] = c.node_a;
        r["node_b"] = c.node_b;
        r["bandwidth_bps"] = c.bandwidth_bps;
        log_.append(std::move(r));

        social::Node& a = node(c.node_a);
        social::Node& b = node(c.node_b);
        if (scheme_.kind == SchemeKind::prophet) {
            prophet_update(a.prophet(), b.prophet(), now_);
        }

        // Profile cards, one per direction, before any bundle moves.
        LiveContact& lc = live_[ev.index];
        if (lc.budget_bytes >= social::kProfileCardBytes) {
            lc.budget_bytes -= social::kProfileCardBytes;
            b.observe_profile_card(a.profile());
        }
        if (lc.budget_bytes >= social::kProfileCardBytes) {
            lc.budget_bytes -= social::kProfileCardBytes;
            a.observe_profile_card(b.profile());
        }

        dirty_.insert({ev.index, 0});
        dirty_.insert({ev.index, 1});
    }

    void handle_contact_end(const Event& ev) {
        const auto it = live_.find(ev.index);
        if (it == live_.end()) return;
        live_.erase(it);

        const Contact& c = scenario_.contacts[ev.index];
        Record r;
        r["type"] = "contact_end";
        r["t"] = now_;
        r["node_a"] = c.node_a;
        r["node_b"] = c.node_b;
        log_.append(std::move(r));
    }

    void handle_bundle_created(const Event& ev) {
        const TrafficSpec& spec = scenario_.traffic[ev.index];
        caller_ = spec.author;
        social::Node& author = node(spec.author);
        const std::string text = detail::filler_text(spec.size_bytes);

        Bundle bundle;
        if (spec.kind == BundleKind::post) {
            std::vector<std::string> followers =
                follow_graph_.followers_of(author.account_id());
            bundle = author.publish(text, now_, followers);
        } else {
            registry::RegistryClient* reg =
                online_at(scenario_.online_phases, now_) ? gate_.get() : nullptr;
            auto [b, looked_up] = author.direct_message(spec.to, text, now_, reg,
                                                         ephemeral_secret(ev.index));
            bundle = std::move(b);
        }
        if (scheme_.kind == SchemeKind::spray_and_wait) {
            bundle.copies = scheme_.spray_copies;
        }

        Record r;
        r["type"] = "bundle_created";
        r["t"] = now_;
        r["bundle"] = bundle.id;
        r["kind"] = to_string(bundle.kind);
        r["author"] = spec.author;
        auto dest = nlohmann::ordered_json::array();
        for (const auto& d : bundle.destinations) dest.push_back(username_of_.at(d));
        r["dest"] = std::move(dest);
        r["size_bytes"] = bundle.size_bytes();
        r["ttl_s"] = bundle.ttl_s;
        if (bundle.copies) r["copies"] = *bundle.copies;
        log_.append(std::move(r));

        const std::string bundle_id = bundle.id;
        const auto res = author.buffer().insert_local(std::move(bundle), now_);
        log_drops(spec.author, res.evicted, "capacity");
        if (res.status != ReceiveStatus::accepted) {
            Record d;
            d["type"] = "dropped";
            d["t"] = now_;
            d["node"] = spec.author;
            d["bundle"] = bundle_id;
            d["reason"] = "no-fit";
            log_.append(std::move(d));
            return;
        }
        mark_node_dirty(spec.author);
    }

    void drain_dirty() {
        while (!dirty_.empty()) {
            const auto [contact_idx, direction] = *dirty_.begin();
            dirty_.erase(dirty_.begin());
            if (live_.find(contact_idx) == live_.end()) continue;
            sync_direction(contact_idx, direction);
        }
    }

    void sync_direction(std::size_t contact_idx, int direction) {
        const Contact& c = scenario_.contacts[contact_idx];
        const std::string& sender_name = direction == 0 ? c.node_a : c.node_b;
        const std::string& receiver_name = direction == 0 ? c.node_b : c.node_a;
        social::Node& sender = node(sender_name);
        social::Node& receiver = node(receiver_name);

        log_expirations(sender_name, sender.buffer().expire(now_));
        log_expirations(receiver_name, receiver.buffer().expire(now_));

        const SummaryVector peer_summary = receiver.buffer().summarize(now_);
        const std::vector<PlanItem> plan = plan_transfers(
            scheme_, sender.buffer(), &sender.prophet(), receiver.account_id(), peer_summary,
            &receiver.prophet(), now_, contact_idx);

        LiveContact& lc = live_.at(contact_idx);
        bool receiver_changed = false;
        for (const PlanItem& item : plan) {
            const Buffer::Stored* stored = sender.buffer().find(item.id);
            if (stored == nullptr) continue;
            const std::size_t size = stored->bundle.size_bytes();
            const double window = c.bandwidth_bps * (c.t_end - now_);
            if (static_cast<double>(size) > std::min(lc.budget_bytes, window)) continue;

            Bundle outgoing = stored->bundle;
            outgoing.copies = scheme_.kind == SchemeKind::spray_and_wait
                                  ? std::optional<std::uint32_t>(item.send_copies)
                                  : std::nullopt;
            const std::uint32_t sender_copies = stored->bundle.copies.value_or(1);

            lc.budget_bytes -= static_cast<double>(size);

            Record tr;
            tr["type"] = "transfer";
            tr["t"] = now_;
            tr["bundle"] = outgoing.id;
            tr["from"] = sender_name;
            tr["to"] = receiver_name;
            tr["bytes"] = size;
            if (outgoing.copies) tr["copies"] = *outgoing.copies;
            log_.append(std::move(tr));

            if (!verify_bundle(outgoing, sink_.get())) {
                throw SimError("bundle failed signature verification in transit: " + outgoing.id);
            }

            if (outgoing.addressed_to(receiver.account_id()) &&
                delivered_pairs_.insert({outgoing.id, receiver_name}).second) {
                receiver.deliver(outgoing, now_);
                Record dv;
                dv["type"] = "delivered";
                dv["t"] = now_;
                dv["bundle"] = outgoing.id;
                dv["recipient"] = receiver_name;
                dv["hop_count"] = outgoing.hop_count + 1;
                log_.append(std::move(dv));
            }

            const auto res =
                receiver.buffer().receive(std::move(outgoing), sender.account_id(), now_,
                                          contact_idx);
            log_drops(receiver_name, res.evicted, "capacity");
            switch (res.status) {
                case ReceiveStatus::accepted: {
                    if (item.relinquish) {
                        sender.buffer().remove(item.id);
                    } else if (scheme_.kind == SchemeKind::spray_and_wait) {
                        sender.buffer().set_copies(item.id, sender_copies - item.send_copies);
                    }
                    receiver_changed = true;
                    break;
                }
                case ReceiveStatus::rejected: {
                    Record d;
                    d["type"] = "dropped";
                    d["t"] = now_;
                    d["node"] = receiver_name;
                    d["bundle"] = item.id;
                    d["reason"] = "no-fit";
                    log_.append(std::move(d));
                    break;
                }
                case ReceiveStatus::expired: {
                    Record d;
                    d["type"] = "dropped";
                    d["t"] = now_;
                    d["node"] = receiver_name;
                    d["bundle"] = item.id;
                    d["reason"] = "expired";
                    log_.append(std::move(d));
                    break;
                }
                case ReceiveStatus::duplicate: break;
            }
        }
        if (receiver_changed) mark_node_dirty(receiver_name);
    }

    void mark_node_dirty(const std::string& username) {
        for (const auto& [idx, lc] : live_) {
            const Contact& c = scenario_.contacts[idx];
            if (c.node_a == username) dirty_.insert({idx, 0});
            if (c.node_b == username) dirty_.insert({idx, 1});
        }
    }

    void final_sweep() {
        now_ = scenario_.horizon_s;
        for (const auto& spec : scenario_.nodes) {
            log_expirations(spec.username, node(spec.username).buffer().expire(now_));
        }
    }

    void log_expirations(const std::string& username, const std::vector<std::string>& ids) {
        for (const auto& id : ids) {
            Record r;
            r["type"] = "expired";
            r["t"] = now_;
            r["node"] = username;
            r["bundle"] = id;
            log_.append(std::move(r));
        }
    }

    void log_drops(const std::string& username, const std::vector<std::string>& ids,
                   const char* reason) {
        for (const auto& id : ids) {
            Record r;
            r["type"] = "dropped";
            r["t"] = now_;
            r["node"] = username;
            r["bundle"] = id;
            r["reason"] = reason;
            log_.append(std::move(r));
        }
    }

    AppState state_of(const std::string& username, double t) const {
        return scenario_.find_node(username)->schedule.state_at(t);
    }

    crypto::Seed identity_seed(const std::string& username) const {
        Bytes material;
        put_bytes(material, as_bytes("sos.identity.v1"));
        put_u64_be(material, scenario_.seed);
        put_bytes(material, as_bytes(username));
        return sha256(ByteView{material.data(), material.size()});
    }

    std::array<std::uint8_t, 32> ephemeral_secret(std::size_t traffic_index) const {
        Bytes material;
        put_bytes(material, as_bytes("sos.ephemeral.v1"));
        put_u64_be(material, scenario_.seed);
        put_u64_be(material, static_cast<std::uint64_t>(traffic_index));
        return sha256(ByteView{material.data(), material.size()});
    }

    Scenario scenario_;
    SchemeConfig scheme_;
    EventLog log_;
    bool ran_ = false;
    double now_ = 0.0;
    std::string caller_;

    std::unique_ptr<registry::RegistryStore> store_;
    std::unique_ptr<GatedRegistry> gate_;
    std::unique_ptr<Sink> sink_;

    std::vector<std::unique_ptr<social::Node>> nodes_;
    std::map<std::string, std::size_t> node_index_;
    std::map<std::string, std::string> account_of_;   // username -> account
    std::map<std::string, std::string> username_of_;  // account -> username
    social::FollowGraph follow_graph_;                // over account ids

    std::map<std::size_t, LiveContact> live_;
    std::set<std::pair<std::size_t, int>> dirty_;
    std::set<std::pair<std::string, std::string>> delivered_pairs_;  // (bundle, username)
};

}  // namespace sos::netsim
