#pragma once

// Turns an event log into a metrics report. Every statistic is derived from
// the log alone, so a report can be recomputed from an archived run.
//
// Conventions: a bundle addressed to k destinations contributes k addressed
// pairs; delivery_ratio is 1.0 when nothing was addressed; latency fields
// are absent when nothing was delivered (null in structured reports, empty
// csv cells); percentiles use the nearest-rank method (sorted[ceil(q*n)-1]);
// overhead counts transfers that did not conclude a delivery, per delivered
// pair.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sos/common.hpp"
#include "sos/eventlog.hpp"

namespace sos::analytics {

struct AnalyticsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double nearest_rank(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const auto n = static_cast<double>(sorted.size());
    const auto rank = static_cast<std::size_t>(std::ceil(q * n));
    return sorted[std::min(rank == 0 ? 0 : rank - 1, sorted.size() - 1)];
}

inline double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (const double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

struct OpTiming {
    std::size_t count = 0;
    double mean_ns = 0.0;
    double median_ns = 0.0;

    bool operator==(const OpTiming&) const = default;
};

struct Metrics {
    std::string scheme;
    std::uint64_t seed = 0;
    std::string scenario_digest;
    double horizon_s = 0.0;

    std::size_t addressed_pairs = 0;
    std::size_t delivered_count = 0;
    std::size_t transfers_total = 0;
    double delivery_ratio = 1.0;
    std::optional<double> mean_latency_s;
    std::optional<double> median_latency_s;
    std::optional<double> p95_latency_s;
    double overhead_ratio = 0.0;
    std::uint64_t bytes_transmitted = 0;
    std::size_t encounters_total = 0;
    std::size_t encounters_with_friends = 0;
    std::map<std::uint32_t, std::size_t> hop_histogram;
    std::map<std::string, std::size_t> drops;  // reason -> count
    std::size_t expired_total = 0;
    // node -> state -> seconds
    std::map<std::string, std::map<std::string, double>> time_in_state_s;
    std::map<std::string, OpTiming> crypto_timings;

    bool operator==(const Metrics&) const = default;
};

namespace detail {

inline AnalyticsError bad_record(std::size_t index, const std::string& why) {
    return AnalyticsError("event log record " + std::to_string(index) + ": " + why);
}

inline const nlohmann::ordered_json& field(const Record& r, std::size_t index,
                                            const char* key) {
    const auto it = r.find(key);
    if (it == r.end()) throw bad_record(index, std::string("missing \"") + key + "\"");
    return *it;
}

inline std::string str_field(const Record& r, std::size_t index, const char* key) {
    const auto& v = field(r, index, key);
    if (!v.is_string()) throw bad_record(index, std::string("\"") + key + "\" must be a string");
    return v.get<std::string>();
}

inline double num_field(const Record& r, std::size_t index, const char* key) {
    const auto& v = field(r, index, key);
    if (!v.is_number()) throw bad_record(index, std::string("\"") + key + "\" must be a number");
    return v.get<double>();
}

}  // namespace detail

inline Metrics compute_metrics(const EventLog& log) {
    using detail::bad_record;
    using detail::field;
    using detail::num_field;
    using detail::str_field;

    if (log.size() == 0) throw AnalyticsError("event log record 0: empty log (want run_meta)");
    Metrics m;
    {
        const Record& meta = log.at(0);
        if (!meta.is_object() || field(meta, 0, "type") != "run_meta") {
            throw bad_record(0, "first record must be run_meta");
        }
        m.scheme = str_field(meta, 0, "scheme");
        m.seed = field(meta, 0, "seed").get<std::uint64_t>();
        m.scenario_digest = str_field(meta, 0, "scenario_digest");
        m.horizon_s = num_field(meta, 0, "horizon_s");
    }

    std::map<std::string, double> created_t;                      // bundle -> t
    std::set<std::pair<std::string, std::string>> follows;        // follower -> followee
    std::map<std::string, std::pair<std::string, double>> state;  // node -> (state, since)
    std::vector<double> latencies;
    std::map<std::string, std::vector<double>> op_nanos;

    for (std::size_t i = 1; i < log.size(); ++i) {
        const Record& r = log.at(i);
        if (!r.is_object()) throw bad_record(i, "not an object");
        const std::string type = str_field(r, i, "type");
        const double t = num_field(r, i, "t");

        if (type == "bundle_created") {
            const std::string id = str_field(r, i, "bundle");
            const auto& dest = field(r, i, "dest");
            if (!dest.is_array()) throw bad_record(i, "\"dest\" must be an array");
            m.addressed_pairs += dest.size();
            created_t[id] = t;
        } else if (type == "transfer") {
            m.transfers_total += 1;
            const double bytes = num_field(r, i, "bytes");
            m.bytes_transmitted += static_cast<std::uint64_t>(bytes);
        } else if (type == "delivered") {
            const std::string id = str_field(r, i, "bundle");
            const auto it = created_t.find(id);
            if (it == created_t.end()) {
                throw bad_record(i, "delivered references unknown bundle \"" + id + "\"");
            }
            m.delivered_count += 1;
            latencies.push_back(t - it->second);
            const double hops = num_field(r, i, "hop_count");
            m.hop_histogram[static_cast<std::uint32_t>(hops)] += 1;
        } else if (type == "contact_start") {
            m.encounters_total += 1;
            const std::string a = str_field(r, i, "node_a");
            const std::string b = str_field(r, i, "node_b");
            if (follows.count({a, b}) != 0 || follows.count({b, a}) != 0) {
                m.encounters_with_friends += 1;
            }
        } else if (type == "follow") {
            follows.insert({str_field(r, i, "follower"), str_field(r, i, "followee")});
        } else if (type == "app_state_change") {
            const std::string node = str_field(r, i, "node");
            const std::string next = str_field(r, i, "state");
            const auto it = state.find(node);
            if (it != state.end()) {
                m.time_in_state_s[node][it->second.first] += t - it->second.second;
            }
            state[node] = {next, t};
        } else if (type == "dropped") {
            m.drops[str_field(r, i, "reason")] += 1;
        } else if (type == "expired") {
            m.expired_total += 1;
        } else if (type == "crypto_timing") {
            op_nanos[str_field(r, i, "op")].push_back(num_field(r, i, "nanos"));
        } else if (type == "run_meta") {
            throw bad_record(i, "duplicate run_meta");
        } else if (type != "registry_call" && type != "account_created" &&
                   type != "contact_end") {
            throw bad_record(i, "unknown type \"" + type + "\"");
        }
    }

    for (const auto& [node, st] : state) {
        m.time_in_state_s[node][st.first] += m.horizon_s - st.second;
    }

    m.delivery_ratio = m.addressed_pairs == 0
                           ? 1.0
                           : static_cast<double>(m.delivered_count) /
                                 static_cast<double>(m.addressed_pairs);
    if (!latencies.empty()) {
        std::sort(latencies.begin(), latencies.end());
        m.mean_latency_s = mean_of(latencies);
        m.median_latency_s = nearest_rank(latencies, 0.5);
        m.p95_latency_s = nearest_rank(latencies, 0.95);
    }
    m.overhead_ratio =
        static_cast<double>(m.transfers_total - m.delivered_count) /
        static_cast<double>(std::max<std::size_t>(m.delivered_count, 1));

    for (auto& [op, nanos] : op_nanos) {
        std::sort(nanos.begin(), nanos.end());
        OpTiming timing;
        timing.count = nanos.size();
        timing.mean_ns = mean_of(nanos);
        timing.median_ns = nearest_rank(nanos, 0.5);
        m.crypto_timings[op] = timing;
    }
    return m;
}

inline nlohmann::ordered_json report_json(const Metrics& m) {
    const auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["scheme"] = m.scheme;
    j["seed"] = m.seed;
    j["scenario_digest"] = m.scenario_digest;
    j["horizon_s"] = m.horizon_s;
    j["delivery"] = {{"addressed_pairs", m.addressed_pairs},
                     {"delivered", m.delivered_count},
                     {"ratio", m.delivery_ratio}};
    j["latency_s"] = {{"mean", opt(m.mean_latency_s)},
                      {"median", opt(m.median_latency_s)},
                      {"p95", opt(m.p95_latency_s)}};
    j["overhead_ratio"] = m.overhead_ratio;
    j["transfers_total"] = m.transfers_total;
    j["bytes_transmitted"] = m.bytes_transmitted;
    j["encounters"] = {{"total", m.encounters_total},
                       {"with_friends", m.encounters_with_friends}};
    auto hops = nlohmann::ordered_json::object();
    for (const auto& [hop, count] : m.hop_histogram) hops[std::to_string(hop)] = count;
    j["hop_histogram"] = std::move(hops);
    auto drops = nlohmann::ordered_json::object();
    for (const auto& [reason, count] : m.drops) drops[reason] = count;
    j["drops"] = std::move(drops);
    j["expired_total"] = m.expired_total;
    auto states = nlohmann::ordered_json::object();
    for (const auto& [node, by_state] : m.time_in_state_s) {
        auto node_states = nlohmann::ordered_json::object();
        for (const auto& [name, secs] : by_state) node_states[name] = secs;
        states[node] = std::move(node_states);
    }
    j["time_in_state_s"] = std::move(states);
    auto timings = nlohmann::ordered_json::object();
    for (const auto& [op, timing] : m.crypto_timings) {
        timings[op] = {{"count", timing.count},
                       {"mean_ns", timing.mean_ns},
                       {"median_ns", timing.median_ns}};
    }
    j["crypto_timings"] = std::move(timings);
    return j;
}

inline std::string write_report_structured(const Metrics& m) {
    return report_json(m).dump(2) + "\n";
}

/// Inverse of report_json; a structured report reparses into the metrics
/// it was written from.
inline Metrics metrics_from_report(const std::string& text) {
    const auto j = nlohmann::ordered_json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw AnalyticsError("report: not a JSON object");
    try {
        Metrics m;
        m.scheme = j.at("scheme").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.scenario_digest = j.at("scenario_digest").get<std::string>();
        m.horizon_s = j.at("horizon_s").get<double>();
        m.addressed_pairs = j.at("delivery").at("addressed_pairs").get<std::size_t>();
        m.delivered_count = j.at("delivery").at("delivered").get<std::size_t>();
        m.delivery_ratio = j.at("delivery").at("ratio").get<double>();
        const auto& lat = j.at("latency_s");
        if (!lat.at("mean").is_null()) m.mean_latency_s = lat.at("mean").get<double>();
        if (!lat.at("median").is_null()) m.median_latency_s = lat.at("median").get<double>();
        if (!lat.at("p95").is_null()) m.p95_latency_s = lat.at("p95").get<double>();
        m.overhead_ratio = j.at("overhead_ratio").get<double>();
        m.transfers_total = j.at("transfers_total").get<std::size_t>();
        m.bytes_transmitted = j.at("bytes_transmitted").get<std::uint64_t>();
        m.encounters_total = j.at("encounters").at("total").get<std::size_t>();
        m.encounters_with_friends = j.at("encounters").at("with_friends").get<std::size_t>();
        for (const auto& [hop, count] : j.at("hop_histogram").items()) {
            m.hop_histogram[static_cast<std::uint32_t>(std::stoul(hop))] =
                count.get<std::size_t>();
        }
        for (const auto& [reason, count] : j.at("drops").items()) {
            m.drops[reason] = count.get<std::size_t>();
        }
        m.expired_total = j.at("expired_total").get<std::size_t>();
        for (const auto& [node, by_state] : j.at("time_in_state_s").items()) {
            for (const auto& [name, secs] : by_state.items()) {
                m.time_in_state_s[node][name] = secs.get<double>();
            }
        }
        for (const auto& [op, timing] : j.at("crypto_timings").items()) {
            OpTiming ot;
            ot.count = timing.at("count").get<std::size_t>();
            ot.mean_ns = timing.at("mean_ns").get<double>();
            ot.median_ns = timing.at("median_ns").get<double>();
            m.crypto_timings[op] = ot;
        }
        return m;
    } catch (const nlohmann::ordered_json::exception& e) {
        throw AnalyticsError(std::string("report: ") + e.what());
    }
}

inline constexpr const char* kCsvHeader =
    "scheme,seed,delivery_ratio,mean_latency_s,median_latency_s,p95_latency_s,overhead_ratio,"
    "bytes_transmitted,encounters_total,encounters_with_friends";

inline std::string csv_row(const Metrics& m) {
    const auto opt = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string{};
    };
    std::string row;
    row += m.scheme;
    row += ',' + std::to_string(m.seed);
    row += ',' + format_double(m.delivery_ratio);
    row += ',' + opt(m.mean_latency_s);
    row += ',' + opt(m.median_latency_s);
    row += ',' + opt(m.p95_latency_s);
    row += ',' + format_double(m.overhead_ratio);
    row += ',' + std::to_string(m.bytes_transmitted);
    row += ',' + std::to_string(m.encounters_total);
    row += ',' + std::to_string(m.encounters_with_friends);
    return row;
}

inline std::string write_report_csv(const std::vector<Metrics>& rows) {
    std::string out{kCsvHeader};
    out.push_back('\n');
    for (const auto& m : rows) {
        out += csv_row(m);
        out.push_back('\n');
    }
    return out;
}

/// Serializes a log without its crypto_timing records, whose nanosecond
/// payloads are wall-clock and legitimately differ between identical runs.
inline std::string serialize_without_timings(const EventLog& log) {
    std::string out;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const Record& r = log.at(i);
        const auto it = r.find("type");
        if (it != r.end() && *it == "crypto_timing") continue;
        out += r.dump();
        out.push_back('\n');
    }
    return out;
}

/// Strips the crypto_timings section from a structured report for
/// run-to-run comparison.
inline std::string report_without_timings(const std::string& report_text) {
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(report_text, nullptr, false);
    if (j.is_discarded()) throw AnalyticsError("report: not valid JSON");
    j.erase("crypto_timings");
    return j.dump(2) + "\n";
}

}  // namespace sos::analytics
