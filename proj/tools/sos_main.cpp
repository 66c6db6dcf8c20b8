// Command-line front end: scenario runs, scheme comparisons, trace
// generation, the foremost-arrival oracle, and the registry service.
//
// Exit codes: 0 success, 2 configuration error (bad flags, bad scenario,
// unknown scheme, bad trace), 1 runtime error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "sos/sos.hpp"

namespace {

enum class LogLevel { off = 0, info = 1, debug = 2 };

LogLevel log_level() {
    const char* env = std::getenv("SOS_LOG");
    if (env == nullptr) return LogLevel::info;
    const std::string v{env};
    if (v == "off") return LogLevel::off;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::info;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) std::cerr << "sos: " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::debug) std::cerr << "sos: " << msg << "\n";
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open \"" + path + "\" for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing \"" + path + "\"");
}

sos::netsim::Scenario load_scenario(const std::string& path,
                                    const std::optional<std::string>& scheme,
                                    const std::optional<std::uint64_t>& seed) {
    auto scenario = sos::netsim::Scenario::from_file(path);
    if (scheme) scenario.scheme = *scheme;
    if (seed) scenario.seed = *seed;
    return scenario;
}

sos::analytics::Metrics run_one(sos::netsim::Scenario scenario, const std::string& log_path) {
    sos::netsim::Simulation sim(std::move(scenario));
    const sos::EventLog& log = sim.run();
    log_debug("run produced " + std::to_string(log.size()) + " event records");
    if (!log_path.empty()) log.write_file(log_path);
    return sos::analytics::compute_metrics(log);
}

struct RunArgs {
    std::string scenario;
    std::optional<std::string> scheme;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "structured";
    std::string log_path;
};

int cmd_run(const RunArgs& args) {
    auto scenario = load_scenario(args.scenario, args.scheme, args.seed);
    log_info("running \"" + args.scenario + "\" scheme=" + scenario.scheme +
             " seed=" + std::to_string(scenario.seed));
    const auto metrics = run_one(std::move(scenario), args.log_path);
    if (args.format == "csv") {
        write_text(args.out, sos::analytics::write_report_csv({metrics}));
    } else {
        write_text(args.out, sos::analytics::write_report_structured(metrics));
    }
    log_info("delivered " + std::to_string(metrics.delivered_count) + "/" +
             std::to_string(metrics.addressed_pairs) + " addressed pairs");
    return 0;
}

struct CompareArgs {
    std::string scenario;
    std::string schemes;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string log_dir;
};

std::vector<std::string> split_schemes(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        const auto comma = csv.find(',', pos);
        out.push_back(csv.substr(pos, comma == std::string::npos ? std::string::npos
                                                                 : comma - pos));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

int cmd_compare(const CompareArgs& args) {
    const std::vector<std::string> schemes = split_schemes(args.schemes);
    if (schemes.empty() || args.schemes.empty()) {
        throw sos::UnknownScheme("unknown-scheme: --schemes list is empty; valid schemes: " +
                                 sos::known_schemes_hint());
    }
    for (const auto& s : schemes) sos::parse_scheme(s);

    const auto base = load_scenario(args.scenario, std::nullopt, args.seed);
    std::vector<sos::analytics::Metrics> rows;
    for (const auto& scheme : schemes) {
        auto scenario = base;
        scenario.scheme = scheme;
        log_info("comparing scheme " + scheme);
        rows.push_back(run_one(std::move(scenario), ""));
    }
    write_text(args.out, sos::analytics::write_report_csv(rows));
    return 0;
}

struct GenTraceArgs {
    std::size_t nodes = 0;
    std::uint64_t seed = 0;
    double horizon_s = 3600.0;
    std::string out;
    sos::WaypointParams params;
};

int cmd_gen_trace(const GenTraceArgs& args) {
    sos::validate_waypoint_params(args.params, args.horizon_s);
    if (args.nodes == 0) throw sos::InvalidParams("invalid-params: --nodes must be >= 1");
    std::vector<std::string> names;
    names.reserve(args.nodes);
    for (std::size_t i = 0; i < args.nodes; ++i) {
        std::string idx = std::to_string(i);
        if (idx.size() < 3) idx.insert(0, 3 - idx.size(), '0');
        names.push_back("n" + idx);
    }
    const auto contacts =
        sos::generate_waypoint_trace(args.params, names, args.horizon_s, args.seed);
    log_info("generated " + std::to_string(contacts.size()) + " contacts for " +
             std::to_string(args.nodes) + " nodes");
    write_text(args.out, sos::serialize_trace(contacts));
    return 0;
}

struct OracleArgs {
    std::string trace;
    std::string src;
    std::string dst;
    double t0 = 0.0;
};

int cmd_oracle(const OracleArgs& args) {
    const auto contacts = sos::load_trace(args.trace);
    const auto arrival = sos::foremost_arrival(contacts, args.src, args.dst, args.t0);
    if (arrival) {
        std::cout << sos::format_double(*arrival) << "\n";
    } else {
        std::cout << "unreachable\n";
    }
    return 0;
}

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

struct ServeArgs {
    std::string bind = "127.0.0.1:7000";
    std::string store = "registry.log";
};

int cmd_registry_serve(const ServeArgs& args) {
    const auto colon = args.bind.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= args.bind.size()) {
        throw sos::netsim::ScenarioError("config: --bind must be host:port, got \"" + args.bind +
                                         "\"");
    }
    const std::string host = args.bind.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(args.bind.substr(colon + 1));
    } catch (const std::exception&) {
        throw sos::netsim::ScenarioError("config: --bind port is not a number in \"" +
                                         args.bind + "\"");
    }
    if (port < 0 || port > 65535) {
        throw sos::netsim::ScenarioError("config: --bind port out of range in \"" + args.bind +
                                         "\"");
    }

    auto store = sos::registry::RegistryStore::open(args.store);
    sos::registry::RegistryService service(store);
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    const auto bound = service.start(host, port);
    if (!bound) throw std::runtime_error("cannot bind " + args.bind);
    log_info("registry listening on " + host + ":" + std::to_string(*bound) + ", store \"" +
             args.store + "\" (" + std::to_string(store.size()) + " accounts)");
    while (!g_stop.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    log_info("shutting down");
    service.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"delay-tolerant social networking simulator and registry"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "run one scenario and write a metrics report");
    run->add_option("--scenario", run_args.scenario, "scenario JSON file")->required();
    std::string run_scheme, run_format = "structured";
    std::uint64_t run_seed = 0;
    auto* run_scheme_opt = run->add_option("--scheme", run_scheme, "routing scheme override");
    auto* run_seed_opt = run->add_option("--seed", run_seed, "seed override");
    run->add_option("--out", run_args.out, "report path (default stdout)");
    run->add_option("--format", run_format, "report format")
        ->check(CLI::IsMember({"structured", "csv"}));
    run->add_option("--log", run_args.log_path, "write the event log (JSONL) here");

    CompareArgs cmp_args;
    auto* cmp = app.add_subcommand("compare", "run one scenario under several schemes");
    cmp->add_option("--scenario", cmp_args.scenario, "scenario JSON file")->required();
    cmp->add_option("--schemes", cmp_args.schemes, "comma-separated scheme list")->required();
    std::uint64_t cmp_seed = 0;
    auto* cmp_seed_opt = cmp->add_option("--seed", cmp_seed, "seed override");
    cmp->add_option("--out", cmp_args.out, "CSV path (default stdout)");

    GenTraceArgs gen_args;
    auto* gen = app.add_subcommand("gen-trace", "generate a synthetic encounter trace");
    gen->add_option("--nodes", gen_args.nodes, "number of nodes")->required();
    gen->add_option("--seed", gen_args.seed, "generator seed");
    gen->add_option("--horizon", gen_args.horizon_s, "trace duration in seconds");
    gen->add_option("--out", gen_args.out, "trace CSV path (default stdout)");
    gen->add_option("--width", gen_args.params.area_width_m, "area width in meters");
    gen->add_option("--height", gen_args.params.area_height_m, "area height in meters");
    gen->add_option("--speed-min", gen_args.params.speed_min_mps, "minimum speed m/s");
    gen->add_option("--speed-max", gen_args.params.speed_max_mps, "maximum speed m/s");
    gen->add_option("--pause-min", gen_args.params.pause_min_s, "minimum pause seconds");
    gen->add_option("--pause-max", gen_args.params.pause_max_s, "maximum pause seconds");
    gen->add_option("--range", gen_args.params.range_m, "radio range in meters");
    gen->add_option("--step", gen_args.params.step_s, "sampling step in seconds");
    gen->add_option("--bandwidth", gen_args.params.bandwidth_bps, "contact bandwidth bytes/s");

    OracleArgs oracle_args;
    auto* oracle = app.add_subcommand("oracle", "foremost arrival time through a trace");
    oracle->add_option("--trace", oracle_args.trace, "trace CSV file")->required();
    oracle->add_option("--src", oracle_args.src, "source node")->required();
    oracle->add_option("--dst", oracle_args.dst, "destination node")->required();
    oracle->add_option("--t0", oracle_args.t0, "start time");

    ServeArgs serve_args;
    auto* reg = app.add_subcommand("registry", "registry account service");
    reg->require_subcommand(1);
    auto* serve = reg->add_subcommand("serve", "serve the account API over HTTP");
    serve->add_option("--bind", serve_args.bind, "host:port to listen on");
    serve->add_option("--store", serve_args.store, "append-only account store path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*run) {
            if (*run_scheme_opt) run_args.scheme = run_scheme;
            if (*run_seed_opt) run_args.seed = run_seed;
            run_args.format = run_format;
            return cmd_run(run_args);
        }
        if (*cmp) {
            if (*cmp_seed_opt) cmp_args.seed = cmp_seed;
            return cmd_compare(cmp_args);
        }
        if (*gen) return cmd_gen_trace(gen_args);
        if (*oracle) return cmd_oracle(oracle_args);
        if (*serve) return cmd_registry_serve(serve_args);
        return 2;
    } catch (const sos::netsim::ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sos::UnknownScheme& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sos::InvalidParams& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sos::TraceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
