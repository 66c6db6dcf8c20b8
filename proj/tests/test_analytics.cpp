#include <catch2/catch_amalgamated.hpp>

#include "sos/analytics.hpp"

using namespace sos;
using namespace sos::analytics;
using Catch::Matchers::WithinAbs;

namespace {

Record meta(const std::string& scheme = "epidemic", double horizon = 100.0) {
    Record r;
    r["type"] = "run_meta";
    r["t"] = 0.0;
    r["schema"] = 1;
    r["scheme"] = scheme;
    r["seed"] = 7;
    r["scenario_digest"] = std::string(64, 'd');
    r["horizon_s"] = horizon;
    return r;
}

Record created(const std::string& id, double t, std::vector<std::string> dest) {
    Record r;
    r["type"] = "bundle_created";
    r["t"] = t;
    r["bundle"] = id;
    r["kind"] = "post";
    r["author"] = "author";
    r["dest"] = dest;
    r["size_bytes"] = 300;
    r["ttl_s"] = 86400.0;
    return r;
}

Record transfer(const std::string& id, double t, std::size_t bytes = 300) {
    Record r;
    r["type"] = "transfer";
    r["t"] = t;
    r["bundle"] = id;
    r["from"] = "x";
    r["to"] = "y";
    r["bytes"] = bytes;
    return r;
}

Record delivered(const std::string& id, double t, int hops = 1,
                 const std::string& who = "y") {
    Record r;
    r["type"] = "delivered";
    r["t"] = t;
    r["bundle"] = id;
    r["recipient"] = who;
    r["hop_count"] = hops;
    return r;
}

Record contact_start(const std::string& a, const std::string& b, double t) {
    Record r;
    r["type"] = "contact_start";
    r["t"] = t;
    r["node_a"] = a;
    r["node_b"] = b;
    r["bandwidth_bps"] = 1e6;
    return r;
}

Record follow(const std::string& follower, const std::string& followee) {
    Record r;
    r["type"] = "follow";
    r["t"] = 0.0;
    r["follower"] = follower;
    r["followee"] = followee;
    return r;
}

Record app_state(const std::string& node, const std::string& state, double t) {
    Record r;
    r["type"] = "app_state_change";
    r["t"] = t;
    r["node"] = node;
    r["state"] = state;
    return r;
}

}  // namespace

TEST_CASE("nearest-rank percentiles match the hand calculation") {
    const std::vector<double> sorted{2.0, 5.0, 9.0, 40.0};
    CHECK(nearest_rank(sorted, 0.5) == 5.0);   // ceil(0.5*4) = 2nd
    CHECK(nearest_rank(sorted, 0.95) == 40.0); // ceil(0.95*4) = 4th
    CHECK(nearest_rank(sorted, 0.25) == 2.0);
    CHECK(nearest_rank(sorted, 1.0) == 40.0);
    CHECK(nearest_rank({7.0}, 0.5) == 7.0);
    CHECK(nearest_rank({}, 0.5) == 0.0);
    CHECK(mean_of(sorted) == 14.0);
}

TEST_CASE("a small fixture log produces exact metrics") {
    // Two bundles: b1 to two destinations (one delivered after 2 transfers),
    // b2 to one destination (delivered in one hop). 1 drop, 1 expiry.
    EventLog log;
    log.append(meta());
    log.append(follow("alice", "bob"));
    log.append(app_state("alice", "foreground", 0.0));
    log.append(created("b1", 10.0, {"alice", "carol"}));
    log.append(created("b2", 20.0, {"alice"}));
    log.append(contact_start("alice", "bob", 12.0));
    log.append(transfer("b1", 12.0));
    log.append(contact_start("bob", "carol", 14.0));
    log.append(transfer("b1", 14.0, 200));
    log.append(delivered("b1", 15.0, 2, "alice"));
    log.append(transfer("b2", 25.0));
    log.append(delivered("b2", 29.0, 1, "alice"));
    {
        Record d;
        d["type"] = "dropped";
        d["t"] = 30.0;
        d["node"] = "bob";
        d["bundle"] = "b1";
        d["reason"] = "no-fit";
        log.append(d);
        Record e;
        e["type"] = "expired";
        e["t"] = 90.0;
        e["node"] = "bob";
        e["bundle"] = "b2";
        log.append(e);
    }

    const Metrics m = compute_metrics(log);
    CHECK(m.scheme == "epidemic");
    CHECK(m.seed == 7);
    CHECK(m.horizon_s == 100.0);
    CHECK(m.addressed_pairs == 3);
    CHECK(m.delivered_count == 2);
    CHECK_THAT(m.delivery_ratio, WithinAbs(2.0 / 3.0, 1e-15));
    CHECK(m.transfers_total == 3);
    CHECK(m.bytes_transmitted == 800);
    // Latencies 5 (b1) and 9 (b2): mean 7, median 5 by nearest rank.
    CHECK(m.mean_latency_s == 7.0);
    CHECK(m.median_latency_s == 5.0);
    CHECK(m.p95_latency_s == 9.0);
    // (3 - 2) surplus transfers per delivered pair.
    CHECK(m.overhead_ratio == 0.5);
    CHECK(m.encounters_total == 2);
    CHECK(m.encounters_with_friends == 1);  // alice-bob follows, bob-carol not
    CHECK(m.hop_histogram == std::map<std::uint32_t, std::size_t>{{1, 1}, {2, 1}});
    CHECK(m.drops == std::map<std::string, std::size_t>{{"no-fit", 1}});
    CHECK(m.expired_total == 1);
    REQUIRE(m.time_in_state_s.count("alice") == 1);
    CHECK(m.time_in_state_s.at("alice").at("foreground") == 100.0);
}

TEST_CASE("time in state splits per node across transitions to the horizon") {
    EventLog log;
    log.append(meta("epidemic", 50.0));
    log.append(app_state("alice", "foreground", 0.0));
    log.append(app_state("bob", "background", 0.0));
    log.append(app_state("alice", "suspended", 20.0));
    log.append(app_state("alice", "foreground", 30.0));

    const Metrics m = compute_metrics(log);
    CHECK(m.time_in_state_s.at("alice").at("foreground") == 40.0);  // [0,20) + [30,50)
    CHECK(m.time_in_state_s.at("alice").at("suspended") == 10.0);
    CHECK(m.time_in_state_s.at("bob").at("background") == 50.0);
    CHECK(m.time_in_state_s.at("bob").count("foreground") == 0);
}

TEST_CASE("zero deliveries leave latency empty and overhead per unit") {
    EventLog log;
    log.append(meta());
    log.append(created("b1", 0.0, {"alice"}));
    log.append(transfer("b1", 1.0));
    log.append(transfer("b1", 2.0));

    const Metrics m = compute_metrics(log);
    CHECK(m.delivered_count == 0);
    CHECK(m.delivery_ratio == 0.0);
    CHECK_FALSE(m.mean_latency_s.has_value());
    CHECK_FALSE(m.median_latency_s.has_value());
    CHECK_FALSE(m.p95_latency_s.has_value());
    CHECK(m.overhead_ratio == 2.0);  // transfers / max(delivered, 1)
    CHECK(m.hop_histogram.empty());

    const std::string csv = write_report_csv({m});
    const auto row_start = csv.find('\n') + 1;
    const std::string row = csv.substr(row_start, csv.find('\n', row_start) - row_start);
    CHECK(row == "epidemic,7,0,,,,2,600,0,0");  // empty latency cells

    const auto j = report_json(m);
    CHECK(j.at("latency_s").at("mean").is_null());
    CHECK(j.at("latency_s").at("p95").is_null());
}

TEST_CASE("an empty workload counts as fully delivered") {
    EventLog log;
    log.append(meta());
    const Metrics m = compute_metrics(log);
    CHECK(m.addressed_pairs == 0);
    CHECK(m.delivery_ratio == 1.0);
    CHECK(m.overhead_ratio == 0.0);
}

TEST_CASE("the hop histogram accounts for every delivery") {
    EventLog log;
    log.append(meta());
    log.append(created("b1", 0.0, {"p", "q", "r"}));
    log.append(transfer("b1", 1.0));
    log.append(delivered("b1", 1.0, 1, "p"));
    log.append(transfer("b1", 2.0));
    log.append(delivered("b1", 2.0, 2, "q"));
    log.append(transfer("b1", 3.0));
    log.append(delivered("b1", 3.0, 2, "r"));
    const Metrics m = compute_metrics(log);
    std::size_t total = 0;
    for (const auto& [hops, count] : m.hop_histogram) total += count;
    CHECK(total == m.delivered_count);
    CHECK(m.hop_histogram.at(1) == 1);
    CHECK(m.hop_histogram.at(2) == 2);
}

TEST_CASE("malformed logs fail with the record index") {
    const auto error_of = [](const EventLog& log) {
        try {
            compute_metrics(log);
            return std::string{};
        } catch (const AnalyticsError& e) {
            return std::string(e.what());
        }
    };

    EventLog empty;
    CHECK(error_of(empty).find("record 0") != std::string::npos);

    EventLog no_meta;
    no_meta.append(created("b1", 0.0, {"x"}));
    CHECK(error_of(no_meta).find("record 0") != std::string::npos);
    CHECK(error_of(no_meta).find("run_meta") != std::string::npos);

    EventLog double_meta;
    double_meta.append(meta());
    double_meta.append(meta());
    CHECK(error_of(double_meta).find("record 1: duplicate run_meta") != std::string::npos);

    EventLog unknown;
    unknown.append(meta());
    unknown.append({{"type", "teleport"}, {"t", 1.0}});
    CHECK(error_of(unknown).find("record 1: unknown type \"teleport\"") != std::string::npos);

    EventLog orphan;
    orphan.append(meta());
    orphan.append(delivered("ghost", 5.0));
    CHECK(error_of(orphan).find("unknown bundle") != std::string::npos);

    EventLog missing_field;
    missing_field.append(meta());
    {
        Record r;
        r["type"] = "transfer";
        r["t"] = 1.0;
        missing_field.append(r);
    }
    CHECK(error_of(missing_field).find("record 1: missing \"bytes\"") != std::string::npos);

    EventLog bad_type;
    bad_type.append(meta());
    {
        Record r;
        r["type"] = "transfer";
        r["t"] = 1.0;
        r["bytes"] = "many";
        bad_type.append(r);
    }
    CHECK(error_of(bad_type).find("must be a number") != std::string::npos);
}

TEST_CASE("structured reports reparse into the metrics they came from") {
    EventLog log;
    log.append(meta("snw:L=4", 60.0));
    log.append(follow("a", "b"));
    log.append(app_state("a", "foreground", 0.0));
    log.append(app_state("a", "background", 10.0));
    log.append(created("b1", 1.0, {"x", "y"}));
    log.append(contact_start("a", "b", 2.0));
    log.append(transfer("b1", 2.0));
    log.append(delivered("b1", 2.0, 1, "x"));
    {
        Record ct;
        ct["type"] = "crypto_timing";
        ct["t"] = 2.0;
        ct["op"] = "sign";
        ct["nanos"] = 1200;
        log.append(ct);
        ct["nanos"] = 1800;
        log.append(ct);
    }

    const Metrics m = compute_metrics(log);
    CHECK(m.crypto_timings.at("sign").count == 2);
    CHECK(m.crypto_timings.at("sign").mean_ns == 1500.0);
    CHECK(m.crypto_timings.at("sign").median_ns == 1200.0);

    const std::string text = write_report_structured(m);
    const Metrics back = metrics_from_report(text);
    CHECK(back == m);

    // Optional latencies survive the round trip as nulls too.
    EventLog none;
    none.append(meta());
    const Metrics empty_m = compute_metrics(none);
    CHECK(metrics_from_report(write_report_structured(empty_m)) == empty_m);

    CHECK_THROWS_AS(metrics_from_report("not json"), AnalyticsError);
    CHECK_THROWS_AS(metrics_from_report("{}"), AnalyticsError);
}

TEST_CASE("csv reports have the fixed column order") {
    EventLog log;
    log.append(meta("prophet", 100.0));
    log.append(created("b1", 0.0, {"x"}));
    log.append(transfer("b1", 4.0));
    log.append(delivered("b1", 4.0, 1, "x"));
    log.append(contact_start("a", "b", 4.0));

    const Metrics m = compute_metrics(log);
    const std::string csv = write_report_csv({m, m});
    const auto first_nl = csv.find('\n');
    CHECK(csv.substr(0, first_nl) ==
          "scheme,seed,delivery_ratio,mean_latency_s,median_latency_s,p95_latency_s,"
          "overhead_ratio,bytes_transmitted,encounters_total,encounters_with_friends");
    const std::string row = "prophet,7,1,4,4,4,0,300,1,0";
    CHECK(csv == std::string(kCsvHeader) + "\n" + row + "\n" + row + "\n");
}

TEST_CASE("timing records and report sections strip cleanly for comparison") {
    EventLog log;
    log.append(meta());
    {
        Record ct;
        ct["type"] = "crypto_timing";
        ct["t"] = 1.0;
        ct["op"] = "sign";
        ct["nanos"] = 999;
        log.append(ct);
    }
    log.append(created("b1", 0.0, {"x"}));

    const std::string stripped = serialize_without_timings(log);
    CHECK(stripped.find("crypto_timing") == std::string::npos);
    CHECK(stripped.find("bundle_created") != std::string::npos);
    CHECK(EventLog::parse(stripped).size() == 2);

    const Metrics m = compute_metrics(log);
    const std::string report = write_report_structured(m);
    CHECK(report.find("crypto_timings") != std::string::npos);
    const std::string bare = report_without_timings(report);
    CHECK(bare.find("crypto_timings") == std::string::npos);
    CHECK(bare.find("delivery") != std::string::npos);
}
