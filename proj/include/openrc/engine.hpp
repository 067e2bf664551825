#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "openrc/protocol.hpp"
#include "openrc/scenario.hpp"
#include "openrc/topology.hpp"
#include "openrc/types.hpp"

namespace openrc {

/// Global snapshot at the start of round `round`: who is active plus every
/// agent's state. activation_next is staged by stage_events() during the
/// round and equals activation_now in between rounds.
struct WorldState {
    Round round = 0;
    OpenDigraph graph;
    ActivationVector activation_now;
    ActivationVector activation_next;
    std::vector<AgentState> states;
    std::uint64_t degeneracy_flags = 0;  // y-guard activations so far
};

/// World at round 0 with the given agents active, each registered with
/// its joining mass (one mass per active agent, ascending id order).
WorldState init_world(OpenDigraph graph, const ActivationVector& initial,
                      const std::vector<double>& joining_masses);

/// Stages the activation transition implied by this round's events.
void stage_events(WorldState& w, const RoundEvents& ev);

/// Feedback exchange plus weight assignment for one round, as a pure
/// function of the activation pair: every active sender counts the
/// acknowledgements of its active out-neighbors and splits its outgoing
/// weight uniformly over those that remain.
RoundWeights compute_round_weights(const OpenDigraph& g, const ActivationVector& now,
                                   const ActivationVector& next);

/// Executes the staged round with the given weights: broadcast, remaining
/// updates (merged in ascending sender order), departing finalization,
/// arrival registration; then publishes the new activation and advances
/// the round counter.
void advance(WorldState& w, const RoundEvents& ev, const RoundWeights& weights);

/// One full synchronous round.
void step(WorldState& w, const RoundEvents& ev);

/// Matrix form of one round's weights: receiver-row, sender-column. W is
/// the 0/1 diagonal that injects arriving agents' joining values.
struct SystemMatrices {
    std::size_t pool = 0;
    std::vector<double> C;        // row-major pool x pool
    std::vector<double> C_tilde;  // row-major pool x pool
    std::vector<std::uint8_t> W;  // diagonal entries

    double c(AgentId receiver, AgentId sender) const { return C[receiver * pool + sender]; }
    double c_tilde(AgentId receiver, AgentId sender) const {
        return C_tilde[receiver * pool + sender];
    }
};

/// Must be called after stage_events and with the weights of the same round.
SystemMatrices build_matrices(const WorldState& w, const RoundWeights& weights);

/// One step of the vector-matrix recursion:
///   x' = C x + C_tilde (x - x_hat) + W x_hat_next
///   y' = C y + C_tilde (y - y_hat) + W y_hat_next
/// Used as the cross-validation oracle for the per-agent path.
std::pair<std::vector<double>, std::vector<double>> oracle_step(
    const std::vector<double>& x, const std::vector<double>& y,
    const std::vector<double>& x_hat, const std::vector<double>& y_hat,
    const std::vector<double>& x_hat_next, const std::vector<double>& y_hat_next,
    const SystemMatrices& m);

struct MassResidual {
    double x = 0.0;  // sum of active x minus sum of active x_hat
    double y = 0.0;  // sum of active y minus sum of active y_hat
};

/// Mass-preservation residuals over the active agents. The sums must
/// agree to within kMassTolerance (relative); run() enforces this when
/// checking is enabled.
MassResidual mass_check(const WorldState& w);

/// Max over active senders of |column sum of C + C_tilde over active
/// rows - 1|; zero up to rounding for any valid round.
double column_stochasticity_check(const SystemMatrices& m, const ActivationVector& now,
                                  const ActivationVector& next);

inline constexpr double kMassTolerance = 1e-9;     // relative
inline constexpr double kColumnTolerance = 1e-12;  // absolute

/// Mean joining mass of the active agents: the consensus target.
double target_average(const ActivationVector& a, const std::vector<AgentState>& states);

/// Euclidean norm of (z_j - x_bar) over the active agents.
double consensus_error(const ActivationVector& a, const std::vector<AgentState>& states,
                       double x_bar);

struct MetricsRecord {
    Round k = 0;
    int n = 0;
    double x_bar = 0.0;
    double err = 0.0;
    double sum_x = 0.0;
    double sum_y = 0.0;
    std::uint64_t flags = 0;  // cumulative y-guard activations
};

MetricsRecord collect_metrics(const WorldState& w);

struct StateRow {
    Round k = 0;
    AgentId agent = 0;
    bool active = false;
    double x = 0.0, y = 0.0, z = 0.0, x_hat = 0.0;
};

struct EngineOptions {
    bool check = false;        // invariant checks every round (builds matrices)
    bool oracle = false;       // cross-validate against the matrix recursion
    bool emit_states = false;  // collect the per-agent trace
    bool feedback_on_change_only = false;  // reuse weights while activation is unchanged
};

struct RunStats {
    double max_mass_residual_x = 0.0;
    double max_mass_residual_y = 0.0;
    double max_column_deviation = 0.0;  // when check
    double max_oracle_deviation = 0.0;  // when oracle
    std::uint64_t degeneracy_flags = 0;
    std::uint64_t skipped_stochastic_events = 0;
};

struct RunResult {
    std::vector<MetricsRecord> metrics;  // one record per step, k = 1..rounds
    WorldState world;
    std::vector<StateRow> state_trace;  // when emit_states: k = 0..rounds
    RunStats stats;
};

/// Runs a scenario end to end. Fatal protocol or scenario errors abort
/// with the offending round and agent in the message; invariant breaches
/// throw InvariantViolation when checking is enabled.
RunResult run(const Scenario& sc, const EngineOptions& opt = {});

/// CSV serializations; floats in shortest round-trip decimal form.
std::string metrics_to_csv(const std::vector<MetricsRecord>& records);
std::string states_to_csv(const std::vector<StateRow>& rows);

} // namespace openrc
