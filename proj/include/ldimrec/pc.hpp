#pragma once

// Peter-Clark search: skeleton by separation tests, v-structure orientation,
// then orientation propagation.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "ldimrec/error.hpp"
#include "ldimrec/graph.hpp"
#include "ldimrec/ldim.hpp"
#include "ldimrec/spectral.hpp"

namespace ldimrec::pc {

using graph::MixedGraph;
using graph::SepSetMap;
using graph::Vertex;
using graph::VertexSet;

struct OracleAnswer {
    bool separated;
    std::optional<double> statistic;
};

/// Answers sep(x, Z, y). Implementations must be deterministic.
class SeparationOracle {
public:
    virtual ~SeparationOracle() = default;
    virtual std::vector<std::string> labels() const = 0;
    virtual OracleAnswer query(Vertex x, const VertexSet& z, Vertex y) const = 0;
};

/// Exact d-separation on a known DAG.
class DSeparationOracle final : public SeparationOracle {
public:
    explicit DSeparationOracle(graph::DirectedGraph g) : g_(std::move(g)) {
        if (!g_.is_acyclic()) throw Error(ErrorCode::CyclicGraph, "d-separation oracle needs an acyclic graph");
    }
    std::vector<std::string> labels() const override { return g_.labels(); }
    OracleAnswer query(Vertex x, const VertexSet& z, Vertex y) const override {
        return {graph::d_separated(g_, x, z, y), std::nullopt};
    }

private:
    graph::DirectedGraph g_;
};

/// Wiener separation over a spectral matrix.
class WienerOracle final : public SeparationOracle {
public:
    WienerOracle(spectral::SpectralMatrix s, spectral::WsepConfig cfg) : s_(std::move(s)), cfg_(cfg) {
        spectral::validate(cfg_);
    }
    std::vector<std::string> labels() const override { return s_.labels; }
    OracleAnswer query(Vertex x, const VertexSet& z, Vertex y) const override {
        const auto r = spectral::wsep(s_, x, y, z, cfg_);
        return {r.separated, r.statistic};
    }
    const spectral::SpectralMatrix& spectra() const { return s_; }

private:
    spectral::SpectralMatrix s_;
    spectral::WsepConfig cfg_;
};

struct PcConfig {
    std::optional<std::size_t> max_cond;  // default n - 2
    bool meek = false;                    // full Meek closure instead of the two printed rules
    spectral::WsepConfig wsep;
    spectral::WelchParams welch;
    unsigned threads = 1;
};

struct QueryRecord {
    Vertex x;
    Vertex y;
    VertexSet z;
    std::optional<double> statistic;
    bool separated;
    friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

struct ReconstructionResult {
    MixedGraph graph;
    SepSetMap sepsets;
    std::vector<QueryRecord> queries;
    std::vector<std::string> warnings;
    friend bool operator==(const ReconstructionResult&, const ReconstructionResult&) = default;
};

namespace detail {

inline std::string describe(const std::vector<std::string>& labels, Vertex x, const VertexSet& z, Vertex y) {
    std::string s = labels.at(x) + " _|_ " + labels.at(y) + " | {";
    for (std::size_t i = 0; i < z.size(); ++i) s += (i ? "," : "") + labels.at(z[i]);
    return s + "}";
}

/// Calls f(subset) for every size-k subset of `pool` in lexicographic order
/// until f returns true.
template <class F>
bool for_each_subset(const VertexSet& pool, std::size_t k, F&& f) {
    if (k > pool.size()) return false;
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        VertexSet subset;
        for (std::size_t i : idx) subset.push_back(pool[i]);
        if (f(subset)) return true;
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == pool.size() - k + (i - 1)) --i;
        if (i == 0) return false;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

inline VertexSet without(VertexSet s, Vertex v) {
    std::erase(s, v);
    return s;
}

}  // namespace detail

struct SkeletonResult {
    MixedGraph graph;
    SepSetMap sepsets;
};

/// Phase 1. Ordered pairs scanned in vertex order; conditioning sets of size
/// eta drawn from Adjacency(x) \ {y} in lexicographic order; removals apply
/// immediately.
inline SkeletonResult pc_skeleton(const std::vector<std::string>& labels, const SeparationOracle& oracle,
                                  const PcConfig& cfg, std::vector<QueryRecord>* log = nullptr) {
    if (labels.size() < 2) throw Error(ErrorCode::InvalidParams, "PC needs at least two vertices");
    SkeletonResult out{MixedGraph::complete_undirected(labels), {}};
    auto& g = out.graph;
    const std::size_t n = labels.size();
    const std::size_t max_cond = cfg.max_cond.value_or(n - 2);

    for (std::size_t eta = 0; eta <= max_cond; ++eta) {
        bool eligible = false;
        for (Vertex x = 0; x < n; ++x) {
            for (Vertex y = 0; y < n; ++y) {
                if (x == y || !g.adjacent(x, y)) continue;
                const VertexSet pool = detail::without(g.adjacency(x), y);
                if (pool.size() < eta) continue;
                eligible = true;
                detail::for_each_subset(pool, eta, [&](const VertexSet& z) {
                    OracleAnswer ans;
                    try {
                        ans = oracle.query(x, z, y);
                    } catch (const Error& e) {
                        throw Error(e.code(), std::string(e.what()) + " (while testing " + detail::describe(labels, x, z, y) + ")");
                    }
                    if (log) log->push_back({x, y, z, ans.statistic, ans.separated});
                    if (ans.separated) {
                        g.remove_edge(x, y);
                        out.sepsets.set(x, y, z);
                    }
                    return ans.separated;
                });
            }
        }
        if (!eligible) break;
        // Continue only while some adjacent pair still has enough neighbours.
        bool more = false;
        for (Vertex x = 0; x < n && !more; ++x)
            for (Vertex y = 0; y < n && !more; ++y)
                if (x != y && g.adjacent(x, y) && detail::without(g.adjacency(x), y).size() >= eta + 1) more = true;
        if (!more) break;
    }
    return out;
}

/// Phase 2. Unshielded triples a - c - b with c outside Z_ab vote for
/// a -> c <- b. Pairs voted both ways stay undirected and are reported.
inline MixedGraph orient_v_structures(const MixedGraph& skel, const SepSetMap& sepsets,
                                      std::vector<std::string>* warnings = nullptr,
                                      std::set<graph::Pair>* conflicts = nullptr) {
    MixedGraph g = skel;
    std::set<graph::Arc> votes;
    for (Vertex c = 0; c < g.size(); ++c) {
        const auto adj = g.adjacency(c);
        for (std::size_t i = 0; i < adj.size(); ++i)
            for (std::size_t j = i + 1; j < adj.size(); ++j) {
                const Vertex a = adj[i], b = adj[j];
                if (g.adjacent(a, b)) continue;
                const VertexSet* z = sepsets.find(a, b);
                if (!z) continue;
                if (std::binary_search(z->begin(), z->end(), c)) continue;
                votes.insert({a, c});
                votes.insert({b, c});
            }
    }
    for (const auto& [x, y] : votes) {
        if (votes.contains({y, x})) {
            if (x < y) {
                if (warnings)
                    warnings->push_back("conflicting v-structure orientation on " + g.vertices().label(x) + " - " +
                                        g.vertices().label(y) + "; left undirected");
                if (conflicts) conflicts->insert(graph::Pair(x, y));
            }
            continue;
        }
        if (g.has_undirected(x, y)) g.orient(x, y);
    }
    return g;
}

namespace detail {

/// Would orienting x -> y create an unshielded collider at y?
inline bool creates_v_structure(const MixedGraph& g, Vertex x, Vertex y) {
    for (Vertex p : g.parents(y))
        if (p != x && !g.adjacent(p, x)) return true;
    return false;
}

struct RuleContext {
    const std::set<graph::Pair>* conflicts;
    std::vector<std::string>* warnings;
};

inline bool try_orient(MixedGraph& g, Vertex x, Vertex y, const RuleContext& ctx) {
    if (!g.has_undirected(x, y)) return false;
    if (ctx.conflicts && ctx.conflicts->contains(graph::Pair(x, y))) return false;
    if (creates_v_structure(g, x, y)) {
        if (ctx.warnings) {
            const std::string msg = "skipped orientation " + g.vertices().label(x) + " -> " + g.vertices().label(y) +
                                    " (would create a new v-structure)";
            if (std::find(ctx.warnings->begin(), ctx.warnings->end(), msg) == ctx.warnings->end())
                ctx.warnings->push_back(msg);
        }
        return false;
    }
    g.orient(x, y);
    return true;
}

// a -> b, b - c, a and c nonadjacent, b has no parent other than a  =>  b -> c
inline bool rule_unchilded_chain(MixedGraph& g, const RuleContext& ctx) {
    bool changed = false;
    for (const auto& [a, b] : std::set<graph::Arc>(g.directed_edges())) {
        const auto pa = g.parents(b);
        if (!(pa.size() == 1 && pa.front() == a)) continue;
        for (Vertex c : g.undirected_neighbors(b))
            if (c != a && !g.adjacent(a, c)) changed |= try_orient(g, b, c, ctx);
    }
    return changed;
}

// Meek R1: a -> b, b - c, a and c nonadjacent  =>  b -> c
inline bool meek_r1(MixedGraph& g, const RuleContext& ctx) {
    bool changed = false;
    for (const auto& [a, b] : std::set<graph::Arc>(g.directed_edges()))
        for (Vertex c : g.undirected_neighbors(b))
            if (c != a && !g.adjacent(a, c)) changed |= try_orient(g, b, c, ctx);
    return changed;
}

// Directed path from a to b and a - b  =>  a -> b
inline bool rule_directed_path(MixedGraph& g, const RuleContext& ctx) {
    bool changed = false;
    for (const auto& p : std::set<graph::Pair>(g.undirected_edges())) {
        if (!g.has_undirected(p.a, p.b)) continue;
        if (g.has_directed_path(p.a, p.b))
            changed |= try_orient(g, p.a, p.b, ctx);
        else if (g.has_directed_path(p.b, p.a))
            changed |= try_orient(g, p.b, p.a, ctx);
    }
    return changed;
}

// Meek R3: a - b, a - c, a - d, c -> b, d -> b, c and d nonadjacent  =>  a -> b
inline bool meek_r3(MixedGraph& g, const RuleContext& ctx) {
    bool changed = false;
    for (const auto& p : std::set<graph::Pair>(g.undirected_edges())) {
        for (auto [a, b] : {std::pair{p.a, p.b}, std::pair{p.b, p.a}}) {
            if (!g.has_undirected(a, b)) break;
            std::vector<Vertex> cands;
            for (Vertex c : g.undirected_neighbors(a))
                if (g.has_directed(c, b)) cands.push_back(c);
            bool hit = false;
            for (std::size_t i = 0; i < cands.size() && !hit; ++i)
                for (std::size_t j = i + 1; j < cands.size() && !hit; ++j)
                    if (!g.adjacent(cands[i], cands[j])) hit = true;
            if (hit && try_orient(g, a, b, ctx)) {
                changed = true;
                break;
            }
        }
    }
    return changed;
}

// Meek R4: a - b, a - c, c -> d, d -> b, c and b nonadjacent, a adjacent d  =>  a -> b
inline bool meek_r4(MixedGraph& g, const RuleContext& ctx) {
    bool changed = false;
    for (const auto& p : std::set<graph::Pair>(g.undirected_edges())) {
        for (auto [a, b] : {std::pair{p.a, p.b}, std::pair{p.b, p.a}}) {
            if (!g.has_undirected(a, b)) break;
            bool hit = false;
            for (Vertex d : g.parents(b)) {
                if (!g.adjacent(a, d)) continue;
                for (Vertex c : g.parents(d))
                    if (c != b && g.has_undirected(a, c) && !g.adjacent(c, b)) hit = true;
            }
            if (hit && try_orient(g, a, b, ctx)) {
                changed = true;
                break;
            }
        }
    }
    return changed;
}

}  // namespace detail

/// Phase 3. Default: the two printed rules (unchilded-chain propagation and
/// the directed-path rule) to a fixed point. With `meek`, Meek's R1-R4.
/// Edges already directed are never changed.
inline MixedGraph apply_orientation_rules(const MixedGraph& in, bool meek = false,
                                          const std::set<graph::Pair>* conflicts = nullptr,
                                          std::vector<std::string>* warnings = nullptr) {
    MixedGraph g = in;
    const detail::RuleContext ctx{conflicts, warnings};
    bool changed = true;
    while (changed) {
        changed = false;
        if (meek) {
            changed |= detail::meek_r1(g, ctx);
            changed |= detail::rule_directed_path(g, ctx);
            changed |= detail::meek_r3(g, ctx);
            changed |= detail::meek_r4(g, ctx);
        } else {
            changed |= detail::rule_unchilded_chain(g, ctx);
            changed |= detail::rule_directed_path(g, ctx);
        }
    }
    return g;
}

/// Post-hoc check: every nonadjacent pair has a sepset, and no v-structure's
/// collider lies in that pair's sepset.
inline std::vector<std::string> sepset_violations(const ReconstructionResult& r) {
    std::vector<std::string> out;
    const auto& g = r.graph;
    for (Vertex a = 0; a < g.size(); ++a)
        for (Vertex b = a + 1; b < g.size(); ++b)
            if (!g.adjacent(a, b) && !r.sepsets.contains(a, b))
                out.push_back("pair " + g.vertices().label(a) + "," + g.vertices().label(b) + " removed without a sepset");
    for (const auto& v : graph::v_structures(g)) {
        const VertexSet* z = r.sepsets.find(v.a, v.b);
        if (z && std::binary_search(z->begin(), z->end(), v.c))
            out.push_back("collider " + g.vertices().label(v.c) + " lies in its parents' sepset");
    }
    return out;
}

inline ReconstructionResult reconstruct(const SeparationOracle& oracle, const PcConfig& cfg) {
    ReconstructionResult out;
    const auto labels = oracle.labels();
    auto skel = pc_skeleton(labels, oracle, cfg, &out.queries);
    out.sepsets = std::move(skel.sepsets);
    std::set<graph::Pair> conflicts;
    const MixedGraph phase2 = orient_v_structures(skel.graph, out.sepsets, &out.warnings, &conflicts);
    out.graph = apply_orientation_rules(phase2, cfg.meek, &conflicts, &out.warnings);
    if (!cfg.meek) {
        const MixedGraph closure = apply_orientation_rules(phase2, true, &conflicts, nullptr);
        for (const auto& [x, y] : closure.directed_edges())
            if (!out.graph.has_directed(x, y))
                out.warnings.push_back("full Meek closure would also orient " + labels[x] + " -> " + labels[y]);
    }
    for (auto& v : sepset_violations(out)) out.warnings.push_back(std::move(v));
    return out;
}

inline ReconstructionResult reconstruct(const spectral::SpectralMatrix& s, const PcConfig& cfg) {
    if (s.channels() < 2) throw Error(ErrorCode::InvalidParams, "reconstruction needs at least two channels");
    return reconstruct(WienerOracle(s, cfg.wsep), cfg);
}

inline ReconstructionResult reconstruct(const TimeSeriesSet& ts, const PcConfig& cfg) {
    if (ts.channels() < 2) throw Error(ErrorCode::InvalidParams, "reconstruction needs at least two channels");
    return reconstruct(spectral::welch_cross_psd(ts, cfg.welch, cfg.threads), cfg);
}

// --- serialization ----------------------------------------------------------

inline nlohmann::json graph_json(const MixedGraph& g) {
    nlohmann::json j;
    j["vertices"] = g.labels();
    j["directed"] = nlohmann::json::array();
    for (const auto& [x, y] : g.directed_edges()) j["directed"].push_back({g.vertices().label(x), g.vertices().label(y)});
    j["undirected"] = nlohmann::json::array();
    for (const auto& p : g.undirected_edges()) j["undirected"].push_back({g.vertices().label(p.a), g.vertices().label(p.b)});
    return j;
}

inline MixedGraph graph_from_json(const nlohmann::json& j) {
    try {
        MixedGraph g(j.at("vertices").get<std::vector<std::string>>());
        for (const auto& e : j.at("directed")) g.add_directed(g.vertex(e.at(0).get<std::string>()), g.vertex(e.at(1).get<std::string>()));
        for (const auto& e : j.at("undirected"))
            g.add_undirected(g.vertex(e.at(0).get<std::string>()), g.vertex(e.at(1).get<std::string>()));
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("graph JSON: ") + e.what());
    }
}

inline nlohmann::json to_json(const ReconstructionResult& r) {
    const auto& labels = r.graph.labels();
    auto names = [&](const VertexSet& z) {
        std::vector<std::string> out;
        for (Vertex v : z) out.push_back(labels[v]);
        return out;
    };
    nlohmann::json j;
    j["graph"] = graph_json(r.graph);
    j["queries"] = nlohmann::json::array();
    for (const auto& q : r.queries)
        j["queries"].push_back({{"x", labels[q.x]},
                                {"y", labels[q.y]},
                                {"Z", names(q.z)},
                                {"statistic", q.statistic ? nlohmann::json(*q.statistic) : nlohmann::json(nullptr)},
                                {"decision", q.separated ? "separated" : "dependent"}});
    j["sepsets"] = nlohmann::json::array();
    for (const auto& [pair, z] : r.sepsets.entries())
        j["sepsets"].push_back({{"x", labels[pair.a]}, {"y", labels[pair.b]}, {"Z", names(z)}});
    j["warnings"] = r.warnings;
    return j;
}

inline ReconstructionResult reconstruction_from_json(const nlohmann::json& j) {
    ReconstructionResult r;
    try {
        r.graph = graph_from_json(j.at("graph"));
        const auto& g = r.graph;
        auto ids = [&](const nlohmann::json& arr) {
            VertexSet out;
            for (const auto& v : arr) out.push_back(g.vertex(v.get<std::string>()));
            return out;
        };
        if (j.contains("sepsets"))
            for (const auto& s : j["sepsets"])
                r.sepsets.set(g.vertex(s.at("x").get<std::string>()), g.vertex(s.at("y").get<std::string>()), ids(s.at("Z")));
        if (j.contains("queries"))
            for (const auto& q : j["queries"]) {
                QueryRecord rec{g.vertex(q.at("x").get<std::string>()), g.vertex(q.at("y").get<std::string>()), ids(q.at("Z")),
                                q.at("statistic").is_null() ? std::nullopt : std::optional(q["statistic"].get<double>()),
                                q.at("decision").get<std::string>() == "separated"};
                r.queries.push_back(std::move(rec));
            }
        if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("reconstruction JSON: ") + e.what());
    }
    return r;
}

}  // namespace ldimrec::pc
