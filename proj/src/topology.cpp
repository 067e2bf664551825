#include "openrc/topology.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace openrc {

OpenDigraph::OpenDigraph(std::size_t pool_size, const std::vector<Edge>& edges)
    : pool_size_(pool_size), out_(pool_size), in_(pool_size) {
    for (const Edge& e : edges) {
        if (e.from >= pool_size || e.to >= pool_size)
            throw std::invalid_argument("edge endpoint out of pool range");
        if (e.from == e.to)
            throw std::invalid_argument("self-loop edges are not allowed");
        out_[e.from].push_back(e.to);
    }
    for (AgentId j = 0; j < pool_size_; ++j) {
        auto& o = out_[j];
        std::sort(o.begin(), o.end());
        o.erase(std::unique(o.begin(), o.end()), o.end());
        edge_count_ += o.size();
        for (AgentId l : o) in_[l].push_back(j);
    }
    for (auto& i : in_) std::sort(i.begin(), i.end());
}

std::vector<Edge> OpenDigraph::edges() const {
    std::vector<Edge> es;
    es.reserve(edge_count_);
    for (AgentId j = 0; j < pool_size_; ++j)
        for (AgentId l : out_[j]) es.push_back({j, l});
    return es;
}

std::vector<Edge> induced_subgraph(const OpenDigraph& g, const ActivationVector& a) {
    std::vector<Edge> es;
    for (AgentId j = 0; j < g.pool_size(); ++j) {
        if (!a[j]) continue;
        for (AgentId l : g.out_neighbors(j))
            if (a[l]) es.push_back({j, l});
    }
    return es;
}

namespace {

// Iterative Tarjan over the nodes marked in `active`. Returns the number
// of strongly connected components among them.
int count_sccs(std::size_t pool_size,
               const std::vector<std::vector<AgentId>>& out,
               const std::vector<std::uint8_t>& active) {
    constexpr std::uint32_t kUnvisited = ~0u;
    std::vector<std::uint32_t> index(pool_size, kUnvisited);
    std::vector<std::uint32_t> lowlink(pool_size, 0);
    std::vector<std::uint8_t> on_stack(pool_size, 0);
    std::vector<AgentId> stack;
    std::uint32_t next_index = 0;
    int components = 0;

    struct Frame {
        AgentId v;
        std::size_t edge_pos;
    };
    std::vector<Frame> call_stack;

    for (AgentId root = 0; root < pool_size; ++root) {
        if (!active[root] || index[root] != kUnvisited) continue;
        call_stack.push_back({root, 0});
        index[root] = lowlink[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = 1;

        while (!call_stack.empty()) {
            Frame& f = call_stack.back();
            const auto& succ = out[f.v];
            bool descended = false;
            while (f.edge_pos < succ.size()) {
                AgentId w = succ[f.edge_pos++];
                if (!active[w]) continue;
                if (index[w] == kUnvisited) {
                    index[w] = lowlink[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call_stack.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (on_stack[w]) lowlink[f.v] = std::min(lowlink[f.v], index[w]);
            }
            if (descended) continue;

            AgentId v = f.v;
            call_stack.pop_back();
            if (!call_stack.empty()) {
                AgentId parent = call_stack.back().v;
                lowlink[parent] = std::min(lowlink[parent], lowlink[v]);
            }
            if (lowlink[v] == index[v]) {
                ++components;
                AgentId w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                } while (w != v);
            }
        }
    }
    return components;
}

} // namespace

bool is_strongly_connected(const std::vector<AgentId>& nodes, const std::vector<Edge>& edges) {
    if (nodes.empty()) return false;
    AgentId max_id = *std::max_element(nodes.begin(), nodes.end());
    std::vector<std::uint8_t> active(max_id + 1, 0);
    for (AgentId v : nodes) active[v] = 1;
    std::vector<std::vector<AgentId>> out(max_id + 1);
    for (const Edge& e : edges) out[e.from].push_back(e.to);
    return count_sccs(max_id + 1, out, active) == 1;
}

bool is_strongly_connected(const OpenDigraph& g, const ActivationVector& a) {
    std::vector<std::uint8_t> active(g.pool_size(), 0);
    int n_active = 0;
    for (AgentId j = 0; j < g.pool_size(); ++j) {
        if (a[j]) {
            active[j] = 1;
            ++n_active;
        }
    }
    if (n_active == 0) return false;
    std::vector<std::vector<AgentId>> out(g.pool_size());
    for (AgentId j = 0; j < g.pool_size(); ++j)
        if (a[j])
            for (AgentId l : g.out_neighbors(j))
                if (a[l]) out[j].push_back(l);
    return count_sccs(g.pool_size(), out, active) == 1;
}

OpenDigraph generate_pool_graph(std::size_t pool_size, double extra_edge_prob, Rng& rng) {
    if (pool_size == 0) throw std::invalid_argument("pool_size must be >= 1");
    if (extra_edge_prob < 0.0 || extra_edge_prob > 1.0)
        throw std::invalid_argument("extra_edge_prob must be in [0, 1]");

    std::vector<AgentId> perm(pool_size);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = 0; i + 1 < pool_size; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.bounded(pool_size - i));
        std::swap(perm[i], perm[j]);
    }

    std::vector<Edge> edges;
    std::vector<std::uint8_t> on_cycle(pool_size * pool_size, 0);
    if (pool_size > 1) {
        for (std::size_t i = 0; i < pool_size; ++i) {
            AgentId a = perm[i];
            AgentId b = perm[(i + 1) % pool_size];
            edges.push_back({a, b});
            on_cycle[a * pool_size + b] = 1;
        }
    }
    for (AgentId i = 0; i < pool_size; ++i) {
        for (AgentId j = 0; j < pool_size; ++j) {
            if (i == j || on_cycle[i * pool_size + j]) continue;
            if (rng.bernoulli(extra_edge_prob)) edges.push_back({i, j});
        }
    }
    return OpenDigraph(pool_size, edges);
}

std::string TransitionReport::describe() const {
    if (ok) return "ok";
    std::ostringstream os;
    for (std::size_t i = 0; i < violations.size(); ++i) {
        if (i) os << "; ";
        os << violations[i].message;
    }
    return os.str();
}

ActivationVector apply_transition(const ActivationVector& a_now,
                                  const std::vector<AgentId>& departures,
                                  const std::vector<AgentId>& arrivals) {
    ActivationVector next = a_now;
    for (AgentId j : departures) next.set(j, false);
    for (AgentId j : arrivals) next.set(j, true);
    return next;
}

TransitionReport validate_transition(const OpenDigraph& g,
                                     const ActivationVector& a_now,
                                     const std::vector<AgentId>& departures,
                                     const std::vector<AgentId>& arrivals) {
    TransitionReport report;
    auto fail = [&report](TransitionViolation::Kind kind, std::vector<AgentId> agents,
                          std::string msg) {
        report.ok = false;
        report.violations.push_back({kind, std::move(agents), std::move(msg)});
    };

    std::vector<AgentId> bad;
    for (AgentId j : departures)
        if (j >= a_now.size() || !a_now[j]) bad.push_back(j);
    if (!bad.empty())
        fail(TransitionViolation::Kind::BadEventSet, bad, "departure of inactive agent");

    bad.clear();
    for (AgentId j : arrivals)
        if (j >= a_now.size() || a_now[j]) bad.push_back(j);
    if (!bad.empty())
        fail(TransitionViolation::Kind::BadEventSet, bad, "arrival of active agent");

    bad.clear();
    for (AgentId j : departures)
        if (std::find(arrivals.begin(), arrivals.end(), j) != arrivals.end()) bad.push_back(j);
    if (!bad.empty())
        fail(TransitionViolation::Kind::BadEventSet, bad,
             "agent both departing and arriving in the same round");
    if (!report.ok) return report;

    ActivationVector next = apply_transition(a_now, departures, arrivals);
    if (next.active_count() == 0) {
        fail(TransitionViolation::Kind::NotStronglyConnected, {},
             "transition leaves no active agents");
    } else if (!is_strongly_connected(g, next)) {
        fail(TransitionViolation::Kind::NotStronglyConnected, {},
             "next active subgraph is not strongly connected");
    }

    // Remaining set: active now and not departing. Arrivals do not count;
    // a departing agent's residual mass may only go to agents that were
    // already active and stay.
    ActivationVector remaining = a_now;
    for (AgentId j : departures) remaining.set(j, false);
    std::vector<AgentId> stranded;
    for (AgentId j : departures) {
        bool has_recipient = false;
        for (AgentId l : g.out_neighbors(j)) {
            if (remaining[l]) {
                has_recipient = true;
                break;
            }
        }
        if (!has_recipient) stranded.push_back(j);
    }
    if (!stranded.empty()) {
        std::ostringstream os;
        os << "departing agent(s) without remaining out-neighbor:";
        for (AgentId j : stranded) os << ' ' << j;
        fail(TransitionViolation::Kind::StrandedDeparture, stranded, os.str());
    }
    return report;
}

} // namespace openrc
