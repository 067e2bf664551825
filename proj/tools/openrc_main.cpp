#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "openrc/engine.hpp"
#include "openrc/scenario.hpp"
#include "openrc/textio.hpp"

namespace fs = std::filesystem;
using namespace openrc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitInternal = 4;

constexpr const char* kBuiltinPaper = "builtin:paper";

Scenario load_scenario(const std::string& path) {
    if (path == kBuiltinPaper) return paper_scenario();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(0, "cannot open scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << contents;
}

std::string hash_hex(std::uint64_t h) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct RunConfig {
    std::string scenario_path;
    std::optional<std::uint64_t> seed_override;
    std::string out_dir = ".";
    bool emit_states = false;
    bool check = false;
    bool oracle = false;
    bool feedback_on_change = false;
};

int cmd_run(const RunConfig& cfg) {
    Scenario sc = load_scenario(cfg.scenario_path);
    if (cfg.seed_override) sc.seed = *cfg.seed_override;

    EngineOptions opt;
    opt.check = cfg.check;
    opt.oracle = cfg.oracle;
    opt.emit_states = cfg.emit_states;
    opt.feedback_on_change_only = cfg.feedback_on_change;

    RunResult res = run(sc, opt);

    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_file(dir / "metrics.csv", metrics_to_csv(res.metrics));
    if (cfg.emit_states) write_file(dir / "states.csv", states_to_csv(res.state_trace));

    std::ostringstream meta;
    meta << "scenario " << cfg.scenario_path << '\n';
    meta << "scenario_hash " << hash_hex(scenario_hash(sc)) << '\n';
    meta << "seed " << sc.seed << '\n';
    meta << "pool " << sc.pool_size << '\n';
    meta << "rounds " << sc.rounds << '\n';
    meta << "check " << (cfg.check ? "on" : "off") << '\n';
    meta << "oracle " << (cfg.oracle ? "on" : "off") << '\n';
    meta << "emit_states " << (cfg.emit_states ? "on" : "off") << '\n';
    meta << "feedback_on_change " << (cfg.feedback_on_change ? "on" : "off") << '\n';
    if (cfg.check) {
        meta << "max_mass_residual_x " << format_double(res.stats.max_mass_residual_x) << '\n';
        meta << "max_mass_residual_y " << format_double(res.stats.max_mass_residual_y) << '\n';
        meta << "max_column_deviation " << format_double(res.stats.max_column_deviation)
             << '\n';
    }
    if (cfg.oracle)
        meta << "max_oracle_deviation " << format_double(res.stats.max_oracle_deviation)
             << '\n';
    meta << "degeneracy_flags " << res.stats.degeneracy_flags << '\n';
    meta << "skipped_stochastic_events " << res.stats.skipped_stochastic_events << '\n';
    meta << "status ok\n";
    write_file(dir / "run.meta", meta.str());

    if (!res.metrics.empty()) {
        const MetricsRecord& last = res.metrics.back();
        std::cout << "ran " << sc.rounds << " rounds: n=" << last.n
                  << " xbar=" << format_double(last.x_bar)
                  << " err=" << format_double(last.err) << '\n';
    }
    std::cout << "wrote " << (dir / "metrics.csv").string() << '\n';
    return kExitOk;
}

int cmd_graph(std::size_t pool, double prob, std::uint64_t seed) {
    Rng rng(seed, RngStream::Graph);
    OpenDigraph g = generate_pool_graph(pool, prob, rng);
    ActivationVector all(pool, true);
    std::cout << "# pool " << pool << " extra_edge_prob " << format_double(prob) << " seed "
              << seed << '\n';
    std::cout << "# strongly_connected "
              << (is_strongly_connected(g, all) ? "true" : "false") << '\n';
    for (const Edge& e : g.edges()) std::cout << "edge " << e.from << ' ' << e.to << '\n';
    return kExitOk;
}

int cmd_validate(const std::string& path) {
    Scenario sc = load_scenario(path);
    Rng graph_rng(sc.seed, RngStream::Graph);
    Rng churn_rng(sc.seed, RngStream::Churn);
    Rng mass_rng(sc.seed, RngStream::Mass);
    Rng init_rng(sc.seed, RngStream::Init);

    OpenDigraph g = build_graph(sc, graph_rng);
    ActivationVector activation = initial_activation(sc, init_rng);
    if (!is_strongly_connected(g, activation))
        throw ScenarioError("initial active subgraph is not strongly connected");

    // Dry replay of the event stream: same draws as a real run, no
    // protocol state.
    std::uint64_t skipped = 0;
    for (Round k = 0; k < sc.rounds; ++k) {
        SampledEvents sampled = sample_round_events(sc, k, g, activation, churn_rng, mass_rng);
        skipped += sampled.stochastic_skipped ? 1 : 0;
        std::vector<AgentId> arrivals;
        for (const auto& [id, mass] : sampled.events.arrivals) arrivals.push_back(id);
        activation = apply_transition(activation, sampled.events.departures, arrivals);
    }
    std::cout << "scenario ok: pool " << sc.pool_size << ", " << sc.rounds << " rounds, "
              << sc.scripted_events.size() << " scripted event(s), " << skipped
              << " skipped stochastic event(s)\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic simulator for ratio consensus in open multi-agent networks"};
    app.require_subcommand(1);

    RunConfig run_cfg;
    CLI::App* run_cmd = app.add_subcommand("run", "Run a scenario and write CSV traces");
    run_cmd->add_option("scenario", run_cfg.scenario_path,
                        "Scenario file path, or 'builtin:paper'")
        ->required();
    std::uint64_t seed_value = 0;
    CLI::Option* seed_opt =
        run_cmd->add_option("--seed", seed_value, "Override the scenario seed");
    run_cmd->add_option("--out", run_cfg.out_dir, "Output directory (default '.')");
    run_cmd->add_flag("--check", run_cfg.check, "Verify invariants every round");
    run_cmd->add_flag("--oracle", run_cfg.oracle,
                      "Cross-validate against the matrix-form recursion");
    run_cmd->add_flag("--emit-states", run_cfg.emit_states, "Also write states.csv");
    run_cmd->add_flag("--feedback-on-change", run_cfg.feedback_on_change,
                      "Recompute feedback only when the activation changes");

    std::size_t graph_pool = 0;
    double graph_prob = 0.0;
    std::uint64_t graph_seed = 0;
    CLI::App* graph_cmd =
        app.add_subcommand("graph", "Generate a strongly connected pool graph");
    graph_cmd->add_option("pool", graph_pool, "Pool size (>= 1)")->required();
    graph_cmd->add_option("extra_edge_prob", graph_prob, "Extra edge probability [0,1]")
        ->required();
    graph_cmd->add_option("--seed", graph_seed, "Generator seed");

    std::string validate_path;
    CLI::App* validate_cmd =
        app.add_subcommand("validate", "Parse a scenario and dry-run its event stream");
    validate_cmd->add_option("scenario", validate_path,
                             "Scenario file path, or 'builtin:paper'")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*run_cmd) {
            if (*seed_opt) run_cfg.seed_override = seed_value;
            return cmd_run(run_cfg);
        }
        if (*graph_cmd) {
            if (graph_pool == 0) {
                std::cerr << "error: pool must be >= 1\n";
                return kExitUsage;
            }
            return cmd_graph(graph_pool, graph_prob, graph_seed);
        }
        if (*validate_cmd) return cmd_validate(validate_path);
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const InvariantViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ProtocolError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
}
