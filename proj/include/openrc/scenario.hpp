#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "openrc/rng.hpp"
#include "openrc/topology.hpp"
#include "openrc/types.hpp"

namespace openrc {

struct MassDist {
    enum class Kind { Uniform, Constant };
    Kind kind = Kind::Constant;
    double lo = 0.0;  // Constant keeps its value here
    double hi = 0.0;

    static MassDist uniform(double lo, double hi);
    static MassDist constant(double v);

    bool operator==(const MassDist&) const = default;
};

double sample_mass(const MassDist& dist, Rng& rng);

/// Half-open churn window (start, end]: while start < k <= end, each
/// round draws one Bernoulli(event_prob) arrival-or-departure event.
struct ChurnWindow {
    Round start = 0;
    Round end = 0;
    double event_prob = 0.0;

    bool contains(Round k) const { return start < k && k <= end; }
    bool operator==(const ChurnWindow&) const = default;
};

struct ScriptedEvent {
    enum class Kind { Arrive, Depart };
    Round round = 0;
    Kind kind = Kind::Arrive;
    AgentId agent = 0;
    double joining_mass = 0.0;  // Arrive only

    bool operator==(const ScriptedEvent&) const = default;
};

struct GraphSpec {
    enum class Kind { Cycle, Auto, Explicit };
    Kind kind = Kind::Cycle;
    double extra_edge_prob = 0.0;  // Auto
    std::vector<Edge> edges;       // Explicit

    bool operator==(const GraphSpec&) const = default;
};

struct Scenario {
    std::size_t pool_size = 0;
    std::vector<AgentId> initial_active;       // empty when initial_random_count set
    std::optional<int> initial_random_count;
    GraphSpec graph;
    Round rounds = 0;
    std::uint64_t seed = 0;
    std::vector<ChurnWindow> churn_windows;
    std::vector<ScriptedEvent> scripted_events;
    MassDist mass_initial = MassDist::uniform(1.0, 10.0);
    MassDist mass_arrival = MassDist::uniform(10.0, 20.0);
};

/// Parses the line-oriented scenario dialect ('#' comments):
///   pool <n>
///   initial <id> <id> ...  |  initial random <count>
///   graph cycle  |  graph auto <extra_edge_prob>  |  edge <i> <j> (repeated)
///   rounds <n>
///   seed <u64>
///   interval <start> <end> <prob>
///   mass_initial uniform <lo> <hi> | mass_initial const <v>   (same for mass_arrival)
///   at <k> arrive <id> <mass>  |  at <k> depart <id>
/// Throws ParseError with the offending line number.
Scenario parse_scenario(const std::string& text);

/// Canonical scenario-file rendering; parse(serialize(sc)) reproduces sc.
std::string serialize_scenario(const Scenario& sc);

/// The built-in experiment: pool of 150 with 100 initially active agents,
/// initial masses uniform in [1,10], arrival masses uniform in [10,20],
/// churn probability 0.10 over (1,80] and 0.20 over (101,180], quiescent
/// elsewhere, 200 rounds.
Scenario paper_scenario();

/// Materializes the potential graph (Auto consumes the graph rng stream).
OpenDigraph build_graph(const Scenario& sc, Rng& graph_rng);

/// Resolves the initial activation ("initial random" consumes init_rng).
ActivationVector initial_activation(const Scenario& sc, Rng& init_rng);

/// Events of one round: who arrives (with which mass) and who departs.
struct RoundEvents {
    std::vector<std::pair<AgentId, double>> arrivals;  // ascending by agent
    std::vector<AgentId> departures;                   // ascending

    bool empty() const { return arrivals.empty() && departures.empty(); }
    bool operator==(const RoundEvents&) const = default;
};

/// Draws this many candidates for the round's stochastic event before
/// giving up and emitting none.
inline constexpr int kEventRetryBudget = 32;

struct SampledEvents {
    RoundEvents events;
    bool stochastic_skipped = false;  // retry budget exhausted
};

/// Merges scripted events at round k with at most one stochastic event
/// when k lies in a churn window. Scripted events failing transition
/// validation are fatal; stochastic candidates failing it are resampled
/// among the untried candidates until the budget runs out. Arrival masses
/// come from mass_rng only after a candidate is accepted, so churn retries
/// never shift the mass stream.
SampledEvents sample_round_events(const Scenario& sc, Round k, const OpenDigraph& g,
                                  const ActivationVector& activation, Rng& churn_rng,
                                  Rng& mass_rng);

/// FNV-1a of the canonical serialization; recorded in run metadata.
std::uint64_t scenario_hash(const Scenario& sc);

} // namespace openrc
