#pragma once

// Reference amplifier netlists: stage-per-edge circuits built from a DAG,
// plus the fixed chain and mesh topologies used by the acceptance runs.

#include <numbers>
#include <random>
#include <set>
#include <string>

#include "ldimrec/amp.hpp"
#include "ldimrec/graph.hpp"

namespace ldimrec::scenarios {

/// Electrical values shared by every stage of a built netlist.
struct Design {
    double fs_hz = 1e6;
    amp::StageMode mode = amp::StageMode::CS;
    double gm_s = 0.6e-3;
    double rds_ohm = 50e3;
    double gm2_s = 1e-3;       // cascode only
    double rds2_ohm = 50e3;    // cascode only
    double load_ohm = 2e3;     // drain (or source, for CD) resistor
    double load_pole_hz = 250e3;
    double coupling_corner_hz = 1e3;
    double bias_ohm = 100e3;   // shunt resistor after the coupling capacitor
};

namespace detail {

inline amp::RlcBlock load_block(const std::string& node, double r, double pole_hz) {
    amp::RlcBlock b;
    b.id = "B" + node;
    b.node = node;
    b.zo = amp::bypassed_resistor(r, 1.0 / (2.0 * std::numbers::pi * pole_hz * r));
    return b;
}

inline amp::ContinuousRational coupling(const Design& d) {
    const double c = 1.0 / (2.0 * std::numbers::pi * d.coupling_corner_hz * d.bias_ohm);
    return amp::highpass_coupling(c, d.bias_ohm);
}

inline amp::StageParams stage_params(const std::string& id, const Design& d) {
    amp::StageParams p;
    p.id = id;
    p.mode = d.mode;
    p.gm_s = d.gm_s;
    p.rds_ohm = d.rds_ohm;
    if (d.mode == amp::StageMode::CASCODE) {
        p.gm2_s = d.gm2_s;
        p.rds2_ohm = d.rds2_ohm;
    }
    return p;
}

}  // namespace detail

/// One block per node, one stage per edge, and one extra stage on every root
/// whose gate taps the source-only input block "IN".
inline amp::Netlist from_dag(const graph::DirectedGraph& g, const Design& d) {
    if (!g.is_acyclic()) throw Error(ErrorCode::CyclicTopology, "scenario graph must be acyclic");
    amp::Netlist nl;
    nl.fs_hz = d.fs_hz;
    nl.nodes = g.labels();

    amp::RlcBlock in;
    in.id = "IN";
    for (graph::Vertex v = 0; v < g.size(); ++v) {
        const std::string& node = g.labels()[v];
        auto block = detail::load_block(node, d.load_ohm, d.load_pole_hz);
        for (graph::Vertex c : g.children(v)) block.taps.emplace("to" + g.labels()[c], detail::coupling(d));
        nl.blocks.push_back(std::move(block));

        if (g.parents(v).empty()) {
            in.taps.emplace("g" + node, amp::ContinuousRational(1.0));
            nl.stages.push_back({detail::stage_params("M" + node, d), node, amp::TapRef{"IN", "g" + node}});
        }
        for (graph::Vertex p : g.parents(v)) {
            const std::string& from = g.labels()[p];
            nl.stages.push_back({detail::stage_params("M" + node + "_" + from, d), node, amp::TapRef{"B" + from, "to" + node}});
        }
    }
    nl.blocks.push_back(std::move(in));
    return nl;
}

inline graph::DirectedGraph chain_graph(std::size_t n) {
    std::set<graph::Arc> e;
    for (std::size_t i = 0; i + 1 < n; ++i) e.insert({i, i + 1});
    return graph::DirectedGraph::numbered(n, e);
}

/// Three common-source stages in series.
inline amp::Netlist chain3() { return from_dag(chain_graph(3), Design{}); }

inline Design cascode_design() {
    Design d;
    d.mode = amp::StageMode::CASCODE;
    return d;
}

/// Five cascode stages in series.
inline amp::Netlist cascode_chain5() { return from_dag(chain_graph(5), cascode_design()); }

/// Open circuit at the gate of stage 5: its tap is rerouted to the input
/// block, so node 5 no longer depends on node 4.
inline amp::Netlist cascode_chain5_open() {
    amp::Netlist nl = cascode_chain5();
    for (auto& b : nl.blocks) {
        if (b.id == "B4") b.taps.erase("to5");
        if (b.id == "IN") b.taps.emplace("open5", amp::ContinuousRational(1.0));
    }
    for (auto& st : nl.stages)
        if (st.output_node == "5") st.input_tap = amp::TapRef{"IN", "open5"};
    return nl;
}

/// 3x3 mesh: each vertex feeds its right and lower neighbour.
inline graph::DirectedGraph grid9_graph() {
    return graph::DirectedGraph::numbered(
        9, {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {6, 7}, {7, 8}, {0, 3}, {1, 4}, {2, 5}, {3, 6}, {4, 7}, {5, 8}});
}

inline amp::Netlist grid9() { return from_dag(grid9_graph(), Design{}); }

/// Generative graph of grid9 after dropping channels 3 and 7.
inline graph::DirectedGraph grid9_marginal_graph() {
    return graph::DirectedGraph::from_labels({"1", "2", "4", "5", "6", "8", "9"},
                                             {{"1", "2"}, {"1", "4"}, {"2", "5"}, {"2", "6"}, {"4", "5"}, {"4", "8"},
                                              {"5", "6"}, {"5", "8"}, {"6", "9"}, {"8", "9"}});
}

/// Erdos-Renyi DAG on labels "1".."n": edge i -> j (i < j) with probability p.
template <class Rng>
graph::DirectedGraph random_dag(std::size_t n, double p, Rng& rng) {
    std::bernoulli_distribution coin(p);
    std::set<graph::Arc> e;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (coin(rng)) e.insert({i, j});
    return graph::DirectedGraph::numbered(n, e);
}

/// Random netlist over `g` with per-stage values drawn around the defaults.
template <class Rng>
amp::Netlist random_netlist(const graph::DirectedGraph& g, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, u(rng)); };

    Design d;
    d.load_pole_hz = log_uniform(100e3, 400e3);
    amp::Netlist nl = from_dag(g, d);
    for (auto& b : nl.blocks) {
        if (!b.node) continue;
        b.zo = amp::bypassed_resistor(log_uniform(1e3, 3e3), 1.0 / (2.0 * std::numbers::pi * d.load_pole_hz * 2e3));
        for (auto& [name, tap] : b.taps) tap = tap * amp::ContinuousRational(0.5 + u(rng));
    }
    for (auto& st : nl.stages) {
        auto& p = st.params;
        p.gm_s = log_uniform(0.5e-3, 2e-3);
        p.rds_ohm = log_uniform(20e3, 100e3);
        const double pick = u(rng);
        if (pick < 0.2) {
            p.mode = amp::StageMode::CASCODE;
            p.gm2_s = log_uniform(0.5e-3, 2e-3);
            p.rds2_ohm = log_uniform(20e3, 100e3);
        } else if (pick < 0.35) {
            p.zs = amp::bypassed_resistor(log_uniform(50.0, 500.0), 1e-9);
        }
    }
    return nl;
}

}  // namespace ldimrec::scenarios
