#include "openrc/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <sstream>

#include "openrc/textio.hpp"

namespace openrc {

MassDist MassDist::uniform(double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("uniform mass interval has lo > hi");
    return {Kind::Uniform, lo, hi};
}

MassDist MassDist::constant(double v) {
    return {Kind::Constant, v, v};
}

double sample_mass(const MassDist& dist, Rng& rng) {
    if (dist.kind == MassDist::Kind::Constant) return dist.lo;
    if (dist.lo > dist.hi) throw std::invalid_argument("uniform mass interval has lo > hi");
    return rng.uniform_real(dist.lo, dist.hi);
}

namespace {

struct LineTokens {
    int lineno;
    std::vector<std::string> tokens;
};

template <class T>
T parse_number(const std::string& tok, int lineno, const char* what) {
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw ParseError(lineno, std::string("malformed ") + what + " '" + tok + "'");
    return value;
}

double parse_real(const std::string& tok, int lineno, const char* what) {
    return parse_number<double>(tok, lineno, what);
}

AgentId parse_agent(const std::string& tok, int lineno, const Scenario& sc, bool need_pool) {
    if (need_pool && sc.pool_size == 0)
        throw ParseError(lineno, "'pool' must be declared before agent ids are used");
    auto id = parse_number<std::uint32_t>(tok, lineno, "agent id");
    if (id >= sc.pool_size)
        throw ParseError(lineno, "agent id " + tok + " out of range [0, " +
                                     std::to_string(sc.pool_size) + ")");
    return id;
}

void expect_arity(const LineTokens& lt, std::size_t n) {
    if (lt.tokens.size() != n)
        throw ParseError(lt.lineno, "directive '" + lt.tokens[0] + "' expects " +
                                        std::to_string(n - 1) + " argument(s)");
}

} // namespace

Scenario parse_scenario(const std::string& text) {
    Scenario sc;
    sc.mass_initial = MassDist::uniform(1.0, 10.0);
    sc.mass_arrival = MassDist::uniform(10.0, 20.0);

    bool have_pool = false, have_rounds = false, have_seed = false;
    bool have_graph = false, have_initial = false;
    bool have_mass_initial = false, have_mass_arrival = false;
    std::vector<int> window_lines;
    std::vector<int> event_lines;

    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (auto pos = raw.find('#'); pos != std::string::npos) raw.resize(pos);
        std::istringstream ls(raw);
        LineTokens lt{lineno, {}};
        for (std::string tok; ls >> tok;) lt.tokens.push_back(tok);
        if (lt.tokens.empty()) continue;
        const std::string& dir = lt.tokens[0];

        if (dir == "pool") {
            expect_arity(lt, 2);
            if (have_pool) throw ParseError(lineno, "duplicate 'pool' directive");
            auto n = parse_number<std::uint64_t>(lt.tokens[1], lineno, "pool size");
            if (n == 0) throw ParseError(lineno, "pool size must be >= 1");
            sc.pool_size = static_cast<std::size_t>(n);
            have_pool = true;
        } else if (dir == "initial") {
            if (have_initial) throw ParseError(lineno, "duplicate 'initial' directive");
            if (lt.tokens.size() < 2)
                throw ParseError(lineno, "'initial' needs agent ids or 'random <count>'");
            if (lt.tokens[1] == "random") {
                expect_arity(lt, 3);
                if (!have_pool)
                    throw ParseError(lineno, "'pool' must be declared before 'initial'");
                auto count = parse_number<std::uint32_t>(lt.tokens[2], lineno, "count");
                if (count == 0 || count > sc.pool_size)
                    throw ParseError(lineno, "initial random count must be in [1, pool]");
                sc.initial_random_count = static_cast<int>(count);
            } else {
                for (std::size_t i = 1; i < lt.tokens.size(); ++i) {
                    AgentId id = parse_agent(lt.tokens[i], lineno, sc, true);
                    if (std::find(sc.initial_active.begin(), sc.initial_active.end(), id) !=
                        sc.initial_active.end())
                        throw ParseError(lineno, "duplicate initial agent " + lt.tokens[i]);
                    sc.initial_active.push_back(id);
                }
                std::sort(sc.initial_active.begin(), sc.initial_active.end());
            }
            have_initial = true;
        } else if (dir == "graph") {
            if (have_graph) throw ParseError(lineno, "duplicate 'graph' directive");
            if (!sc.graph.edges.empty())
                throw ParseError(lineno, "'graph' directive conflicts with 'edge' lines");
            if (lt.tokens.size() >= 2 && lt.tokens[1] == "cycle") {
                expect_arity(lt, 2);
                sc.graph.kind = GraphSpec::Kind::Cycle;
            } else if (lt.tokens.size() >= 2 && lt.tokens[1] == "auto") {
                expect_arity(lt, 3);
                double p = parse_real(lt.tokens[2], lineno, "edge probability");
                if (p < 0.0 || p > 1.0)
                    throw ParseError(lineno, "edge probability must be in [0, 1]");
                sc.graph.kind = GraphSpec::Kind::Auto;
                sc.graph.extra_edge_prob = p;
            } else {
                throw ParseError(lineno, "'graph' expects 'cycle' or 'auto <prob>'");
            }
            have_graph = true;
        } else if (dir == "edge") {
            expect_arity(lt, 3);
            if (have_graph)
                throw ParseError(lineno, "'edge' lines conflict with 'graph' directive");
            AgentId i = parse_agent(lt.tokens[1], lineno, sc, true);
            AgentId j = parse_agent(lt.tokens[2], lineno, sc, true);
            if (i == j) throw ParseError(lineno, "self-loop edges are not allowed");
            sc.graph.kind = GraphSpec::Kind::Explicit;
            sc.graph.edges.push_back({i, j});
        } else if (dir == "rounds") {
            expect_arity(lt, 2);
            if (have_rounds) throw ParseError(lineno, "duplicate 'rounds' directive");
            auto n = parse_number<std::uint32_t>(lt.tokens[1], lineno, "round count");
            if (n == 0) throw ParseError(lineno, "rounds must be >= 1");
            sc.rounds = n;
            have_rounds = true;
        } else if (dir == "seed") {
            expect_arity(lt, 2);
            if (have_seed) throw ParseError(lineno, "duplicate 'seed' directive");
            sc.seed = parse_number<std::uint64_t>(lt.tokens[1], lineno, "seed");
            have_seed = true;
        } else if (dir == "interval") {
            expect_arity(lt, 4);
            ChurnWindow w;
            w.start = parse_number<std::uint32_t>(lt.tokens[1], lineno, "window start");
            w.end = parse_number<std::uint32_t>(lt.tokens[2], lineno, "window end");
            w.event_prob = parse_real(lt.tokens[3], lineno, "event probability");
            if (w.start >= w.end) throw ParseError(lineno, "churn window start >= end");
            if (w.event_prob < 0.0 || w.event_prob > 1.0)
                throw ParseError(lineno, "event probability must be in [0, 1]");
            sc.churn_windows.push_back(w);
            window_lines.push_back(lineno);
        } else if (dir == "mass_initial" || dir == "mass_arrival") {
            bool& have = dir == "mass_initial" ? have_mass_initial : have_mass_arrival;
            MassDist& slot = dir == "mass_initial" ? sc.mass_initial : sc.mass_arrival;
            if (have) throw ParseError(lineno, "duplicate '" + dir + "' directive");
            if (lt.tokens.size() >= 2 && lt.tokens[1] == "uniform") {
                expect_arity(lt, 4);
                double lo = parse_real(lt.tokens[2], lineno, "interval bound");
                double hi = parse_real(lt.tokens[3], lineno, "interval bound");
                if (lo > hi) throw ParseError(lineno, "mass interval has lo > hi");
                slot = MassDist::uniform(lo, hi);
            } else if (lt.tokens.size() >= 2 && lt.tokens[1] == "const") {
                expect_arity(lt, 3);
                slot = MassDist::constant(parse_real(lt.tokens[2], lineno, "mass value"));
            } else {
                throw ParseError(lineno, "'" + dir + "' expects 'uniform <lo> <hi>' or 'const <v>'");
            }
            have = true;
        } else if (dir == "at") {
            if (lt.tokens.size() < 3) throw ParseError(lineno, "'at' expects <round> <kind> ...");
            ScriptedEvent ev;
            ev.round = parse_number<std::uint32_t>(lt.tokens[1], lineno, "round");
            if (lt.tokens[2] == "arrive") {
                expect_arity(lt, 5);
                ev.kind = ScriptedEvent::Kind::Arrive;
                ev.agent = parse_agent(lt.tokens[3], lineno, sc, true);
                ev.joining_mass = parse_real(lt.tokens[4], lineno, "joining mass");
            } else if (lt.tokens[2] == "depart") {
                expect_arity(lt, 4);
                ev.kind = ScriptedEvent::Kind::Depart;
                ev.agent = parse_agent(lt.tokens[3], lineno, sc, true);
            } else {
                throw ParseError(lineno, "'at' expects 'arrive' or 'depart'");
            }
            sc.scripted_events.push_back(ev);
            event_lines.push_back(lineno);
        } else {
            throw ParseError(lineno, "unknown directive '" + dir + "'");
        }
    }

    if (!have_pool) throw ParseError(0, "missing 'pool' directive");
    if (!have_rounds) throw ParseError(0, "missing 'rounds' directive");
    if (!have_initial) throw ParseError(0, "missing 'initial' directive");
    if (!have_graph && sc.graph.edges.empty())
        throw ParseError(0, "missing graph specification ('graph ...' or 'edge ...' lines)");

    for (std::size_t i = 0; i < sc.churn_windows.size(); ++i) {
        if (sc.churn_windows[i].end >= sc.rounds)
            throw ParseError(window_lines[i], "churn window extends past the round horizon");
    }
    std::vector<std::size_t> order(sc.churn_windows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&sc](std::size_t a, std::size_t b) {
        return sc.churn_windows[a].start < sc.churn_windows[b].start;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (sc.churn_windows[order[i]].start < sc.churn_windows[order[i - 1]].end)
            throw ParseError(window_lines[order[i]], "churn windows overlap");
    }

    for (std::size_t i = 0; i < sc.scripted_events.size(); ++i) {
        const ScriptedEvent& ev = sc.scripted_events[i];
        if (ev.round >= sc.rounds)
            throw ParseError(event_lines[i], "scripted event round past the round horizon");
        for (std::size_t j = 0; j < i; ++j) {
            const ScriptedEvent& other = sc.scripted_events[j];
            if (other.round == ev.round && other.agent == ev.agent)
                throw ParseError(event_lines[i], "agent " + std::to_string(ev.agent) +
                                                     " has two scripted events at round " +
                                                     std::to_string(ev.round));
        }
    }
    return sc;
}

std::string serialize_scenario(const Scenario& sc) {
    std::ostringstream os;
    os << "pool " << sc.pool_size << '\n';
    os << "seed " << sc.seed << '\n';
    os << "rounds " << sc.rounds << '\n';
    switch (sc.graph.kind) {
        case GraphSpec::Kind::Cycle:
            os << "graph cycle\n";
            break;
        case GraphSpec::Kind::Auto:
            os << "graph auto " << format_double(sc.graph.extra_edge_prob) << '\n';
            break;
        case GraphSpec::Kind::Explicit: {
            auto edges = sc.graph.edges;
            std::sort(edges.begin(), edges.end());
            edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
            for (const Edge& e : edges) os << "edge " << e.from << ' ' << e.to << '\n';
            break;
        }
    }
    if (sc.initial_random_count) {
        os << "initial random " << *sc.initial_random_count << '\n';
    } else {
        auto ids = sc.initial_active;
        std::sort(ids.begin(), ids.end());
        os << "initial";
        for (AgentId id : ids) os << ' ' << id;
        os << '\n';
    }
    auto emit_mass = [&os](const char* name, const MassDist& d) {
        if (d.kind == MassDist::Kind::Uniform)
            os << name << " uniform " << format_double(d.lo) << ' ' << format_double(d.hi)
               << '\n';
        else
            os << name << " const " << format_double(d.lo) << '\n';
    };
    emit_mass("mass_initial", sc.mass_initial);
    emit_mass("mass_arrival", sc.mass_arrival);
    auto windows = sc.churn_windows;
    std::sort(windows.begin(), windows.end(),
              [](const ChurnWindow& a, const ChurnWindow& b) { return a.start < b.start; });
    for (const ChurnWindow& w : windows)
        os << "interval " << w.start << ' ' << w.end << ' ' << format_double(w.event_prob)
           << '\n';
    auto events = sc.scripted_events;
    std::sort(events.begin(), events.end(), [](const ScriptedEvent& a, const ScriptedEvent& b) {
        if (a.round != b.round) return a.round < b.round;
        if (a.kind != b.kind) return a.kind == ScriptedEvent::Kind::Depart;
        return a.agent < b.agent;
    });
    for (const ScriptedEvent& ev : events) {
        if (ev.kind == ScriptedEvent::Kind::Arrive)
            os << "at " << ev.round << " arrive " << ev.agent << ' '
               << format_double(ev.joining_mass) << '\n';
        else
            os << "at " << ev.round << " depart " << ev.agent << '\n';
    }
    return os.str();
}

Scenario paper_scenario() {
    Scenario sc;
    sc.pool_size = 150;
    sc.initial_random_count = 100;
    sc.graph.kind = GraphSpec::Kind::Auto;
    sc.graph.extra_edge_prob = 0.1;
    sc.rounds = 200;
    sc.seed = 0;
    sc.churn_windows = {{1, 80, 0.10}, {101, 180, 0.20}};
    sc.mass_initial = MassDist::uniform(1.0, 10.0);
    sc.mass_arrival = MassDist::uniform(10.0, 20.0);
    return sc;
}

OpenDigraph build_graph(const Scenario& sc, Rng& graph_rng) {
    switch (sc.graph.kind) {
        case GraphSpec::Kind::Cycle: {
            std::vector<Edge> edges;
            if (sc.pool_size > 1)
                for (AgentId i = 0; i < sc.pool_size; ++i)
                    edges.push_back({i, static_cast<AgentId>((i + 1) % sc.pool_size)});
            return OpenDigraph(sc.pool_size, edges);
        }
        case GraphSpec::Kind::Auto:
            return generate_pool_graph(sc.pool_size, sc.graph.extra_edge_prob, graph_rng);
        case GraphSpec::Kind::Explicit:
            return OpenDigraph(sc.pool_size, sc.graph.edges);
    }
    throw std::logic_error("unreachable graph kind");
}

ActivationVector initial_activation(const Scenario& sc, Rng& init_rng) {
    ActivationVector a(sc.pool_size);
    if (sc.initial_random_count) {
        int count = *sc.initial_random_count;
        if (count < 1 || static_cast<std::size_t>(count) > sc.pool_size)
            throw ScenarioError("initial random count must be in [1, pool]");
        std::vector<AgentId> ids(sc.pool_size);
        std::iota(ids.begin(), ids.end(), 0);
        for (int i = 0; i < count; ++i) {
            std::size_t j = i + static_cast<std::size_t>(init_rng.bounded(ids.size() - i));
            std::swap(ids[i], ids[j]);
            a.set(ids[i], true);
        }
    } else {
        for (AgentId id : sc.initial_active) {
            if (id >= sc.pool_size)
                throw ScenarioError("initial agent " + std::to_string(id) +
                                    " is outside the pool");
            a.set(id, true);
        }
    }
    if (a.active_count() == 0) throw ScenarioError("scenario has no initially active agents");
    return a;
}

SampledEvents sample_round_events(const Scenario& sc, Round k, const OpenDigraph& g,
                                  const ActivationVector& activation, Rng& churn_rng,
                                  Rng& mass_rng) {
    if (k >= sc.rounds) throw std::invalid_argument("round past the scenario horizon");

    SampledEvents out;
    RoundEvents& ev = out.events;
    for (const ScriptedEvent& se : sc.scripted_events) {
        if (se.round != k) continue;
        if (se.kind == ScriptedEvent::Kind::Arrive)
            ev.arrivals.emplace_back(se.agent, se.joining_mass);
        else
            ev.departures.push_back(se.agent);
    }
    std::sort(ev.arrivals.begin(), ev.arrivals.end());
    std::sort(ev.departures.begin(), ev.departures.end());

    auto arrival_ids = [&ev] {
        std::vector<AgentId> ids;
        ids.reserve(ev.arrivals.size());
        for (const auto& [id, mass] : ev.arrivals) ids.push_back(id);
        return ids;
    };

    if (!ev.empty()) {
        TransitionReport report = validate_transition(g, activation, ev.departures, arrival_ids());
        if (!report.ok) {
            std::ostringstream os;
            os << "scripted event(s) at round " << k << " rejected: " << report.describe();
            throw ScenarioError(os.str());
        }
    }

    const ChurnWindow* window = nullptr;
    for (const ChurnWindow& w : sc.churn_windows)
        if (w.contains(k)) {
            window = &w;
            break;
        }
    if (window == nullptr || !churn_rng.bernoulli(window->event_prob)) return out;

    // Candidate pools for the stochastic event, excluding agents already
    // referenced by a scripted event this round.
    std::vector<AgentId> can_arrive, can_depart;
    for (AgentId j = 0; j < sc.pool_size; ++j) {
        if (activation[j]) {
            if (!std::binary_search(ev.departures.begin(), ev.departures.end(), j))
                can_depart.push_back(j);
        } else {
            bool scripted_arrival = false;
            for (const auto& [id, mass] : ev.arrivals) scripted_arrival |= id == j;
            if (!scripted_arrival) can_arrive.push_back(j);
        }
    }

    bool accepted = false;
    for (int draw = 0; draw < kEventRetryBudget; ++draw) {
        bool arrive;
        if (!can_arrive.empty() && !can_depart.empty())
            arrive = churn_rng.bernoulli(0.5);
        else if (!can_arrive.empty())
            arrive = true;
        else if (!can_depart.empty())
            arrive = false;
        else
            break;

        std::vector<AgentId>& pool = arrive ? can_arrive : can_depart;
        std::size_t pick_at = static_cast<std::size_t>(churn_rng.bounded(pool.size()));
        AgentId pick = pool[pick_at];
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick_at));

        std::vector<AgentId> dep = ev.departures;
        std::vector<AgentId> arr = arrival_ids();
        if (arrive)
            arr.insert(std::lower_bound(arr.begin(), arr.end(), pick), pick);
        else
            dep.insert(std::lower_bound(dep.begin(), dep.end(), pick), pick);

        if (validate_transition(g, activation, dep, arr).ok) {
            if (arrive) {
                double mass = sample_mass(sc.mass_arrival, mass_rng);
                auto pos = std::lower_bound(
                    ev.arrivals.begin(), ev.arrivals.end(), pick,
                    [](const auto& pr, AgentId id) { return pr.first < id; });
                ev.arrivals.emplace(pos, pick, mass);
            } else {
                ev.departures.insert(
                    std::lower_bound(ev.departures.begin(), ev.departures.end(), pick), pick);
            }
            accepted = true;
            break;
        }
    }
    out.stochastic_skipped = !accepted;
    return out;
}

std::uint64_t scenario_hash(const Scenario& sc) {
    return fnv1a(serialize_scenario(sc));
}

} // namespace openrc
