#pragma once

// Contact plans: the CSV trace format, a seeded random-waypoint generator,
// and the brute-force foremost-arrival search used to cross-check simulated
// deliveries.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sos/common.hpp"
#include "sos/rng.hpp"

namespace sos {

/// One bidirectional encounter window between two nodes.
struct Contact {
    double t_start = 0.0;
    double t_end = 0.0;
    std::string node_a;
    std::string node_b;
    double bandwidth_bps = 0.0;

    bool involves(const std::string& node) const { return node_a == node || node_b == node; }

    const std::string& other(const std::string& node) const {
        return node_a == node ? node_b : node_a;
    }
};

struct TraceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kTraceHeader = "t_start,t_end,node_a,node_b,bandwidth_bps";

namespace detail {

inline std::string trace_pos(std::string_view source, std::size_t line) {
    return std::string(source) + ":" + std::to_string(line) + ": ";
}

inline double parse_trace_double(std::string_view field, std::string_view source,
                                 std::size_t line, std::string_view what) {
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
        throw TraceError(trace_pos(source, line) + "parse-error: bad " + std::string(what) +
                         " \"" + std::string(field) + "\"");
    }
    return v;
}

}  // namespace detail

/// Parses trace CSV text. Errors carry 1-based line numbers; rows violating
/// the contact invariants (t_start < t_end, distinct endpoints, positive
/// bandwidth) are reported as invariant violations. The result is sorted by
/// (t_start, t_end, node_a, node_b).
inline std::vector<Contact> parse_trace(std::istream& in, std::string_view source = "trace") {
    std::string line;
    std::size_t lineno = 0;
    std::vector<Contact> contacts;

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (line != kTraceHeader) {
                throw TraceError(detail::trace_pos(source, 1) +
                                 "parse-error: expected header \"" + std::string(kTraceHeader) +
                                 "\"");
            }
            continue;
        }
        if (line.empty()) continue;

        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const auto comma = line.find(',', pos);
            fields.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                         : comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (fields.size() != 5) {
            throw TraceError(detail::trace_pos(source, lineno) + "parse-error: expected 5 fields, got " +
                             std::to_string(fields.size()));
        }

        Contact c;
        c.t_start = detail::parse_trace_double(fields[0], source, lineno, "t_start");
        c.t_end = detail::parse_trace_double(fields[1], source, lineno, "t_end");
        c.node_a = fields[2];
        c.node_b = fields[3];
        c.bandwidth_bps = detail::parse_trace_double(fields[4], source, lineno, "bandwidth_bps");

        if (c.t_end <= c.t_start) {
            throw TraceError(detail::trace_pos(source, lineno) +
                             "invariant-violation: t_end must exceed t_start");
        }
        if (c.node_a == c.node_b) {
            throw TraceError(detail::trace_pos(source, lineno) +
                             "invariant-violation: contact endpoints must differ");
        }
        if (c.node_a.empty() || c.node_b.empty()) {
            throw TraceError(detail::trace_pos(source, lineno) +
                             "invariant-violation: empty node id");
        }
        if (c.bandwidth_bps <= 0.0) {
            throw TraceError(detail::trace_pos(source, lineno) +
                             "invariant-violation: bandwidth must be positive");
        }
        contacts.push_back(std::move(c));
    }

    std::sort(contacts.begin(), contacts.end(), [](const Contact& x, const Contact& y) {
        if (x.t_start != y.t_start) return x.t_start < y.t_start;
        if (x.t_end != y.t_end) return x.t_end < y.t_end;
        if (x.node_a != y.node_a) return x.node_a < y.node_a;
        return x.node_b < y.node_b;
    });
    return contacts;
}

inline std::vector<Contact> parse_trace_text(std::string_view text,
                                             std::string_view source = "trace") {
    std::istringstream in{std::string(text)};
    return parse_trace(in, source);
}

inline std::vector<Contact> load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TraceError(path + ": cannot open trace file");
    return parse_trace(in, path);
}

inline std::string serialize_trace(const std::vector<Contact>& contacts) {
    std::string out{kTraceHeader};
    out.push_back('\n');
    for (const auto& c : contacts) {
        out += format_double(c.t_start);
        out.push_back(',');
        out += format_double(c.t_end);
        out.push_back(',');
        out += c.node_a;
        out.push_back(',');
        out += c.node_b;
        out.push_back(',');
        out += format_double(c.bandwidth_bps);
        out.push_back('\n');
    }
    return out;
}

inline void write_trace(const std::string& path, const std::vector<Contact>& contacts) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw TraceError(path + ": cannot open for writing");
    out << serialize_trace(contacts);
    if (!out.flush()) throw TraceError(path + ": write failed");
}

struct WaypointParams {
    double area_width_m = 1000.0;
    double area_height_m = 1000.0;
    double speed_min_mps = 0.5;
    double speed_max_mps = 1.5;
    double pause_min_s = 0.0;
    double pause_max_s = 120.0;
    double range_m = 10.0;
    double step_s = 1.0;
    double bandwidth_bps = 1e6;
};

struct InvalidParams : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void validate_waypoint_params(const WaypointParams& p, double horizon_s) {
    const auto fail = [](const std::string& why) { throw InvalidParams("invalid-params: " + why); };
    if (!(p.area_width_m > 0.0) || !(p.area_height_m > 0.0)) fail("area dimensions must be positive");
    if (!(p.speed_min_mps > 0.0)) fail("minimum speed must be positive");
    if (p.speed_max_mps < p.speed_min_mps) fail("speed range is empty");
    if (p.pause_min_s < 0.0) fail("pause must be non-negative");
    if (p.pause_max_s < p.pause_min_s) fail("pause range is empty");
    if (!(p.range_m > 0.0)) fail("radio range must be positive");
    if (!(p.step_s > 0.0)) fail("sample step must be positive");
    if (!(p.bandwidth_bps > 0.0)) fail("bandwidth must be positive");
    if (!(horizon_s > 0.0)) fail("horizon must be positive");
}

namespace detail {

// Positions of one node at every sample instant k*dt, k = 0..K.
inline std::vector<std::pair<double, double>> waypoint_path(const WaypointParams& p,
                                                            SplitMix64 rng,
                                                            std::size_t samples) {
    std::vector<std::pair<double, double>> pos;
    pos.reserve(samples);
    double x = rng.next_double() * p.area_width_m;
    double y = rng.next_double() * p.area_height_m;

    enum class Phase { moving, paused };
    Phase phase = Phase::paused;
    double phase_left = 0.0;  // remaining seconds in this phase
    double vx = 0.0, vy = 0.0;

    for (std::size_t k = 0; k < samples; ++k) {
        pos.emplace_back(x, y);
        double dt = p.step_s;
        while (dt > 0.0) {
            if (phase_left <= 0.0) {
                if (phase == Phase::paused) {
                    const double wx = rng.next_double() * p.area_width_m;
                    const double wy = rng.next_double() * p.area_height_m;
                    const double v = rng.uniform(p.speed_min_mps, p.speed_max_mps);
                    const double dist = std::hypot(wx - x, wy - y);
                    phase = Phase::moving;
                    phase_left = dist / v;
                    if (phase_left > 0.0) {
                        vx = (wx - x) / phase_left;
                        vy = (wy - y) / phase_left;
                    } else {
                        vx = vy = 0.0;
                    }
                } else {
                    phase = Phase::paused;
                    phase_left = rng.uniform(p.pause_min_s, p.pause_max_s);
                    vx = vy = 0.0;
                    if (phase_left <= 0.0) continue;  // zero pause, pick next waypoint
                }
            }
            const double step = std::min(dt, phase_left);
            x += vx * step;
            y += vy * step;
            phase_left -= step;
            dt -= step;
        }
    }
    return pos;
}

}  // namespace detail

/// Random-waypoint mobility sampled every step_s; a contact spans each
/// maximal run of samples where two nodes sit within radio range. The same
/// params, names, horizon, and seed always give an identical trace.
inline std::vector<Contact> generate_waypoint_trace(const WaypointParams& params,
                                                    const std::vector<std::string>& node_names,
                                                    double horizon_s, std::uint64_t seed) {
    validate_waypoint_params(params, horizon_s);
    const std::size_t samples =
        static_cast<std::size_t>(std::floor(horizon_s / params.step_s)) + 1;

    std::vector<std::vector<std::pair<double, double>>> paths;
    paths.reserve(node_names.size());
    for (std::size_t i = 0; i < node_names.size(); ++i) {
        paths.push_back(detail::waypoint_path(params, substream(seed, "wp/" + std::to_string(i)),
                                              samples));
    }

    std::vector<Contact> contacts;
    for (std::size_t i = 0; i < node_names.size(); ++i) {
        for (std::size_t j = i + 1; j < node_names.size(); ++j) {
            std::optional<std::size_t> run_start;
            for (std::size_t k = 0; k <= samples; ++k) {
                const bool in_range =
                    k < samples &&
                    std::hypot(paths[i][k].first - paths[j][k].first,
                               paths[i][k].second - paths[j][k].second) <= params.range_m;
                if (in_range && !run_start) run_start = k;
                if (!in_range && run_start) {
                    Contact c;
                    c.t_start = static_cast<double>(*run_start) * params.step_s;
                    c.t_end = std::min(static_cast<double>(k) * params.step_s, horizon_s);
                    c.node_a = node_names[i];
                    c.node_b = node_names[j];
                    c.bandwidth_bps = params.bandwidth_bps;
                    if (c.t_start < c.t_end) contacts.push_back(std::move(c));
                    run_start.reset();
                }
            }
        }
    }
    std::sort(contacts.begin(), contacts.end(), [](const Contact& x, const Contact& y) {
        if (x.t_start != y.t_start) return x.t_start < y.t_start;
        if (x.t_end != y.t_end) return x.t_end < y.t_end;
        if (x.node_a != y.node_a) return x.node_a < y.node_a;
        return x.node_b < y.node_b;
    });
    return contacts;
}

/// Earliest possible delivery time from src (holding a message at t0) to dst
/// over time-respecting contact paths: a message at u from time t crosses
/// contact (u,v,[s,e]) iff t <= e, arriving at v at max(t, s). Transfers are
/// instantaneous and resource-free. nullopt means unreachable.
inline std::optional<double> foremost_arrival(const std::vector<Contact>& contacts,
                                              const std::string& src, const std::string& dst,
                                              double t0) {
    if (src == dst) return t0;
    std::map<std::string, double> label;
    label[src] = t0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& c : contacts) {
            for (const auto& [from, to] :
                 {std::pair{&c.node_a, &c.node_b}, std::pair{&c.node_b, &c.node_a}}) {
                const auto it = label.find(*from);
                if (it == label.end() || it->second > c.t_end) continue;
                const double arrival = std::max(it->second, c.t_start);
                const auto [dit, inserted] = label.try_emplace(*to, arrival);
                if (!inserted && dit->second <= arrival) continue;
                dit->second = arrival;
                changed = true;
            }
        }
    }
    const auto it = label.find(dst);
    if (it == label.end()) return std::nullopt;
    return it->second;
}

}  // namespace sos
