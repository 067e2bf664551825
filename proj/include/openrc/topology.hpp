#pragma once

#include <string>
#include <vector>

#include "openrc/rng.hpp"
#include "openrc/types.hpp"

namespace openrc {

/// Directed edge: `to` receives from `from`.
struct Edge {
    AgentId from = 0;
    AgentId to = 0;

    bool operator==(const Edge&) const = default;
    bool operator<(const Edge& o) const {
        return from != o.from ? from < o.from : to < o.to;
    }
};

/// The fixed potential digraph over the agent pool. Self-loops are
/// excluded; an agent's own contribution enters through its self-weight,
/// not through an edge. Only activation varies during a run.
class OpenDigraph {
public:
    OpenDigraph() = default;
    OpenDigraph(std::size_t pool_size, const std::vector<Edge>& edges);

    std::size_t pool_size() const { return pool_size_; }
    std::size_t edge_count() const { return edge_count_; }

    /// Receivers of j, ascending.
    const std::vector<AgentId>& out_neighbors(AgentId j) const { return out_[j]; }
    /// Senders to j, ascending.
    const std::vector<AgentId>& in_neighbors(AgentId j) const { return in_[j]; }

    std::vector<Edge> edges() const;

private:
    std::size_t pool_size_ = 0;
    std::size_t edge_count_ = 0;
    std::vector<std::vector<AgentId>> out_;
    std::vector<std::vector<AgentId>> in_;
};

/// Edges of the potential graph whose endpoints are both active; the
/// active subgraph G(k) as an edge list, sorted.
std::vector<Edge> induced_subgraph(const OpenDigraph& g, const ActivationVector& a);

/// True iff the digraph on `nodes` with `edges` has exactly one strongly
/// connected component. Edges must stay within `nodes`; `nodes` nonempty.
bool is_strongly_connected(const std::vector<AgentId>& nodes, const std::vector<Edge>& edges);

/// Strong connectivity of the subgraph of g induced by activation a.
/// False when no agent is active.
bool is_strongly_connected(const OpenDigraph& g, const ActivationVector& a);

/// Random pool graph: a directed Hamiltonian cycle over a random
/// permutation of the pool, plus every other ordered pair independently
/// with probability extra_edge_prob. The full pool is therefore strongly
/// connected by construction. Deterministic given the rng state.
OpenDigraph generate_pool_graph(std::size_t pool_size, double extra_edge_prob, Rng& rng);

/// Why a proposed activation transition was rejected.
struct TransitionViolation {
    enum class Kind {
        NotStronglyConnected,  // next active set is empty or not strongly connected
        StrandedDeparture,     // departing agent has no out-neighbor among remaining agents
        BadEventSet,           // departures not active, arrivals not inactive, or overlap
    };
    Kind kind;
    std::vector<AgentId> agents;  // offending agents, when applicable
    std::string message;
};

struct TransitionReport {
    bool ok = true;
    std::vector<TransitionViolation> violations;

    std::string describe() const;
};

/// Checks that applying `departures` and `arrivals` to `a_now` yields an
/// activation whose induced subgraph is strongly connected, and that every
/// departing agent keeps at least one out-neighbor among the agents that
/// remain (otherwise its residual mass has no recipient).
TransitionReport validate_transition(const OpenDigraph& g,
                                     const ActivationVector& a_now,
                                     const std::vector<AgentId>& departures,
                                     const std::vector<AgentId>& arrivals);

/// a_now with departures cleared and arrivals set.
ActivationVector apply_transition(const ActivationVector& a_now,
                                  const std::vector<AgentId>& departures,
                                  const std::vector<AgentId>& arrivals);

} // namespace openrc
