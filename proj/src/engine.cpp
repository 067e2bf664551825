#include "openrc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "openrc/textio.hpp"

namespace openrc {

WorldState init_world(OpenDigraph graph, const ActivationVector& initial,
                      const std::vector<double>& joining_masses) {
    if (initial.size() != graph.pool_size())
        throw std::invalid_argument("activation size does not match the pool");
    WorldState w;
    w.graph = std::move(graph);
    w.activation_now = initial;
    w.activation_next = initial;
    w.states.resize(w.graph.pool_size());
    std::size_t next_mass = 0;
    for (AgentId j = 0; j < w.graph.pool_size(); ++j) {
        if (!initial[j]) continue;
        if (next_mass >= joining_masses.size())
            throw std::invalid_argument("fewer joining masses than active agents");
        w.states[j] = arriving_update(joining_masses[next_mass++]);
    }
    if (next_mass != joining_masses.size())
        throw std::invalid_argument("more joining masses than active agents");
    return w;
}

void stage_events(WorldState& w, const RoundEvents& ev) {
    std::vector<AgentId> arrivals;
    arrivals.reserve(ev.arrivals.size());
    for (const auto& [id, mass] : ev.arrivals) arrivals.push_back(id);
    w.activation_next = apply_transition(w.activation_now, ev.departures, arrivals);
}

RoundWeights compute_round_weights(const OpenDigraph& g, const ActivationVector& now,
                                   const ActivationVector& next) {
    RoundWeights rw;
    rw.senders.resize(g.pool_size());
    for (AgentId j = 0; j < g.pool_size(); ++j) {
        if (!now[j]) continue;  // arriving and inactive agents send nothing
        OperatingMode mode = classify_mode(now[j], next[j]);
        std::vector<AgentId> remaining_out;
        for (AgentId l : g.out_neighbors(j)) {
            if (!now[l]) continue;  // link not in the active graph
            if (feedback(classify_mode(now[l], next[l]), now[j]) == 1)
                remaining_out.push_back(l);
        }
        rw.senders[j] = mode == OperatingMode::Remaining
                            ? assign_remaining_weights(j, remaining_out)
                            : assign_departing_weights(j, remaining_out);
    }
    return rw;
}

void advance(WorldState& w, const RoundEvents& ev, const RoundWeights& weights) {
    const std::size_t n = w.graph.pool_size();
    std::vector<OperatingMode> mode(n);
    for (AgentId j = 0; j < n; ++j)
        mode[j] = classify_mode(w.activation_now[j], w.activation_next[j]);

    std::vector<BroadcastPair> zeta(n);
    for (AgentId j = 0; j < n; ++j) {
        if (mode[j] == OperatingMode::Remaining || mode[j] == OperatingMode::Departing)
            zeta[j] = broadcast_values(w.states[j], mode[j], weights.senders[j].c,
                                       weights.senders[j].c_tilde);
    }

    std::vector<AgentState> next_states = w.states;
    std::vector<Contribution> from_remaining, from_departing;
    for (AgentId j = 0; j < n; ++j) {
        if (mode[j] != OperatingMode::Remaining) continue;
        from_remaining.clear();
        from_departing.clear();
        bool self_added = false;
        for (AgentId i : w.graph.in_neighbors(j)) {
            if (mode[i] == OperatingMode::Remaining) {
                if (!self_added && i > j) {
                    from_remaining.push_back({j, zeta[j]});
                    self_added = true;
                }
                from_remaining.push_back({i, zeta[i]});
            } else if (mode[i] == OperatingMode::Departing) {
                from_departing.push_back({i, zeta[i]});
            }
        }
        if (!self_added) from_remaining.push_back({j, zeta[j]});

        RemainingUpdateResult res = remaining_update(w.states[j], from_remaining, from_departing);
        if (res.degenerate) ++w.degeneracy_flags;
        next_states[j] = res.state;
    }
    for (AgentId j = 0; j < n; ++j)
        if (mode[j] == OperatingMode::Departing) next_states[j] = departing_finalize(w.states[j]);
    for (const auto& [id, mass] : ev.arrivals) next_states[id] = arriving_update(mass);

    w.states = std::move(next_states);
    w.activation_now = w.activation_next;
    ++w.round;
}

void step(WorldState& w, const RoundEvents& ev) {
    stage_events(w, ev);
    advance(w, ev, compute_round_weights(w.graph, w.activation_now, w.activation_next));
}

SystemMatrices build_matrices(const WorldState& w, const RoundWeights& weights) {
    const std::size_t n = w.graph.pool_size();
    SystemMatrices m;
    m.pool = n;
    m.C.assign(n * n, 0.0);
    m.C_tilde.assign(n * n, 0.0);
    m.W.assign(n, 0);
    for (AgentId j = 0; j < n; ++j) {
        const SenderWeights& sw = weights.senders[j];
        if (sw.mode == OperatingMode::Remaining) {
            m.C[j * n + j] = sw.c;
            for (AgentId l : sw.recipients) m.C[l * n + j] = sw.c;
        } else if (sw.mode == OperatingMode::Departing) {
            for (AgentId l : sw.recipients) m.C_tilde[l * n + j] = sw.c_tilde;
        }
        m.W[j] = (!w.activation_now[j] && w.activation_next[j]) ? 1 : 0;
    }
    return m;
}

std::pair<std::vector<double>, std::vector<double>> oracle_step(
    const std::vector<double>& x, const std::vector<double>& y,
    const std::vector<double>& x_hat, const std::vector<double>& y_hat,
    const std::vector<double>& x_hat_next, const std::vector<double>& y_hat_next,
    const SystemMatrices& m) {
    const std::size_t n = m.pool;
    std::vector<double> xn(n, 0.0), yn(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        double ax = 0.0, ay = 0.0;
        const double* crow = m.C.data() + r * n;
        const double* trow = m.C_tilde.data() + r * n;
        for (std::size_t s = 0; s < n; ++s) {
            ax += crow[s] * x[s];
            ay += crow[s] * y[s];
        }
        for (std::size_t s = 0; s < n; ++s) {
            ax += trow[s] * (x[s] - x_hat[s]);
            ay += trow[s] * (y[s] - y_hat[s]);
        }
        if (m.W[r]) {
            ax += x_hat_next[r];
            ay += y_hat_next[r];
        }
        xn[r] = ax;
        yn[r] = ay;
    }
    return {std::move(xn), std::move(yn)};
}

MassResidual mass_check(const WorldState& w) {
    double sum_x = 0.0, sum_x_hat = 0.0, sum_y = 0.0, sum_y_hat = 0.0;
    for (AgentId j = 0; j < w.graph.pool_size(); ++j) {
        if (!w.activation_now[j]) continue;
        sum_x += w.states[j].x;
        sum_x_hat += w.states[j].x_hat;
        sum_y += w.states[j].y;
        sum_y_hat += w.states[j].y_hat;
    }
    return {sum_x - sum_x_hat, sum_y - sum_y_hat};
}

double column_stochasticity_check(const SystemMatrices& m, const ActivationVector& now,
                                  const ActivationVector& next) {
    (void)next;  // senders are exactly the agents active at k
    double max_dev = 0.0;
    for (AgentId j = 0; j < m.pool; ++j) {
        if (!now[j]) continue;
        double col = 0.0;
        for (AgentId l = 0; l < m.pool; ++l)
            if (now[l]) col += m.C[l * m.pool + j] + m.C_tilde[l * m.pool + j];
        max_dev = std::max(max_dev, std::abs(col - 1.0));
    }
    return max_dev;
}

double target_average(const ActivationVector& a, const std::vector<AgentState>& states) {
    double sum = 0.0;
    int n = 0;
    for (AgentId j = 0; j < states.size(); ++j) {
        if (!a[j]) continue;
        sum += states[j].x_hat;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("no active agents");
    return sum / n;
}

double consensus_error(const ActivationVector& a, const std::vector<AgentState>& states,
                       double x_bar) {
    double sq = 0.0;
    for (AgentId j = 0; j < states.size(); ++j) {
        if (!a[j]) continue;
        double d = states[j].z - x_bar;
        sq += d * d;
    }
    return std::sqrt(sq);
}

MetricsRecord collect_metrics(const WorldState& w) {
    MetricsRecord rec;
    rec.k = w.round;
    rec.n = w.activation_now.active_count();
    rec.x_bar = target_average(w.activation_now, w.states);
    rec.err = consensus_error(w.activation_now, w.states, rec.x_bar);
    double sx = 0.0, sy = 0.0;
    for (AgentId j = 0; j < w.states.size(); ++j) {
        if (!w.activation_now[j]) continue;
        sx += w.states[j].x;
        sy += w.states[j].y;
    }
    rec.sum_x = sx;
    rec.sum_y = sy;
    rec.flags = w.degeneracy_flags;
    return rec;
}

namespace {

void append_state_rows(std::vector<StateRow>& trace, const WorldState& w) {
    for (AgentId j = 0; j < w.states.size(); ++j) {
        const AgentState& s = w.states[j];
        trace.push_back({w.round, j, w.activation_now[j], s.x, s.y, s.z, s.x_hat});
    }
}

void enforce_checks(const WorldState& w, const SystemMatrices& matrices,
                    const ActivationVector& prev_now, RunStats& stats) {
    MassResidual res = mass_check(w);
    double sum_x_hat = 0.0;
    int n_active = 0;
    for (AgentId j = 0; j < w.states.size(); ++j) {
        if (!w.activation_now[j]) continue;
        sum_x_hat += w.states[j].x_hat;
        ++n_active;
    }
    double tol_x = kMassTolerance * std::max(1.0, std::abs(sum_x_hat));
    double tol_y = kMassTolerance * std::max(1.0, static_cast<double>(n_active));
    stats.max_mass_residual_x = std::max(stats.max_mass_residual_x, std::abs(res.x));
    stats.max_mass_residual_y = std::max(stats.max_mass_residual_y, std::abs(res.y));
    if (std::abs(res.x) > tol_x || std::abs(res.y) > tol_y) {
        std::ostringstream os;
        os << "mass preservation violated at round " << w.round << ": residual_x="
           << format_double(res.x) << " residual_y=" << format_double(res.y);
        throw InvariantViolation(os.str());
    }

    double dev = column_stochasticity_check(matrices, prev_now, w.activation_now);
    stats.max_column_deviation = std::max(stats.max_column_deviation, dev);
    if (dev > kColumnTolerance) {
        std::ostringstream os;
        os << "column stochasticity violated at round " << w.round
           << ": max deviation=" << format_double(dev);
        throw InvariantViolation(os.str());
    }

    if (!is_strongly_connected(w.graph, w.activation_now)) {
        std::ostringstream os;
        os << "active subgraph not strongly connected at round " << w.round;
        throw InvariantViolation(os.str());
    }
}

struct OracleSnapshot {
    std::vector<double> x, y, x_hat, y_hat;
};

OracleSnapshot snapshot_vectors(const WorldState& w) {
    OracleSnapshot s;
    const std::size_t n = w.states.size();
    s.x.resize(n);
    s.y.resize(n);
    s.x_hat.resize(n);
    s.y_hat.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        s.x[j] = w.states[j].x;
        s.y[j] = w.states[j].y;
        s.x_hat[j] = w.states[j].x_hat;
        s.y_hat[j] = w.states[j].y_hat;
    }
    return s;
}

} // namespace

RunResult run(const Scenario& sc, const EngineOptions& opt) {
    Rng graph_rng(sc.seed, RngStream::Graph);
    Rng churn_rng(sc.seed, RngStream::Churn);
    Rng mass_rng(sc.seed, RngStream::Mass);
    Rng init_rng(sc.seed, RngStream::Init);

    OpenDigraph graph = build_graph(sc, graph_rng);
    ActivationVector initial = initial_activation(sc, init_rng);
    if (!is_strongly_connected(graph, initial))
        throw ScenarioError("initial active subgraph is not strongly connected");

    std::vector<double> masses;
    masses.reserve(initial.active_count());
    for (AgentId j = 0; j < sc.pool_size; ++j)
        if (initial[j]) masses.push_back(sample_mass(sc.mass_initial, mass_rng));

    RunResult result;
    WorldState& w = result.world;
    w = init_world(std::move(graph), initial, masses);
    result.metrics.reserve(sc.rounds);
    if (opt.emit_states) append_state_rows(result.state_trace, w);

    const bool need_matrices = opt.check || opt.oracle;
    bool cache_valid = false;
    ActivationVector cached_now, cached_next;
    RoundWeights cached_weights;

    for (Round k = 0; k < sc.rounds; ++k) {
        SampledEvents sampled =
            sample_round_events(sc, k, w.graph, w.activation_now, churn_rng, mass_rng);
        result.stats.skipped_stochastic_events += sampled.stochastic_skipped ? 1 : 0;

        stage_events(w, sampled.events);

        const RoundWeights* weights;
        try {
            if (opt.feedback_on_change_only && cache_valid && cached_now == w.activation_now &&
                cached_next == w.activation_next) {
                weights = &cached_weights;
            } else {
                cached_weights =
                    compute_round_weights(w.graph, w.activation_now, w.activation_next);
                cached_now = w.activation_now;
                cached_next = w.activation_next;
                cache_valid = true;
                weights = &cached_weights;
            }
        } catch (const ProtocolError& e) {
            throw ProtocolError("round " + std::to_string(k) + ": " + e.what());
        }

        SystemMatrices matrices;
        if (need_matrices) matrices = build_matrices(w, *weights);
        OracleSnapshot before;
        if (opt.oracle) before = snapshot_vectors(w);
        ActivationVector prev_now = w.activation_now;

        advance(w, sampled.events, *weights);

        if (opt.oracle) {
            OracleSnapshot after = snapshot_vectors(w);
            auto [ox, oy] = oracle_step(before.x, before.y, before.x_hat, before.y_hat,
                                        after.x_hat, after.y_hat, matrices);
            double dev = 0.0;
            for (std::size_t j = 0; j < ox.size(); ++j) {
                dev = std::max(dev, std::abs(ox[j] - after.x[j]));
                dev = std::max(dev, std::abs(oy[j] - after.y[j]));
            }
            result.stats.max_oracle_deviation =
                std::max(result.stats.max_oracle_deviation, dev);
        }
        if (opt.check) enforce_checks(w, matrices, prev_now, result.stats);

        result.metrics.push_back(collect_metrics(w));
        if (opt.emit_states) append_state_rows(result.state_trace, w);
    }
    result.stats.degeneracy_flags = w.degeneracy_flags;
    return result;
}

std::string metrics_to_csv(const std::vector<MetricsRecord>& records) {
    std::string out = "k,n,xbar,err,sum_x,sum_y,flags\n";
    for (const MetricsRecord& r : records) {
        out += std::to_string(r.k);
        out += ',';
        out += std::to_string(r.n);
        out += ',';
        out += format_double(r.x_bar);
        out += ',';
        out += format_double(r.err);
        out += ',';
        out += format_double(r.sum_x);
        out += ',';
        out += format_double(r.sum_y);
        out += ',';
        out += std::to_string(r.flags);
        out += '\n';
    }
    return out;
}

std::string states_to_csv(const std::vector<StateRow>& rows) {
    std::string out = "k,agent,active,x,y,z,xhat\n";
    for (const StateRow& r : rows) {
        out += std::to_string(r.k);
        out += ',';
        out += std::to_string(r.agent);
        out += ',';
        out += r.active ? '1' : '0';
        out += ',';
        out += format_double(r.x);
        out += ',';
        out += format_double(r.y);
        out += ',';
        out += format_double(r.z);
        out += ',';
        out += format_double(r.x_hat);
        out += '\n';
    }
    return out;
}

} // namespace openrc
