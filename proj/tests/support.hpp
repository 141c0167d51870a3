#pragma once

// Independent reference implementations and random generators for tests.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "ldimrec/graph.hpp"

namespace testsupport {

using ldimrec::graph::Arc;
using ldimrec::graph::DirectedGraph;
using ldimrec::graph::MixedGraph;
using ldimrec::graph::Pair;
using ldimrec::graph::Vertex;
using ldimrec::graph::VertexSet;

/// d-separation by enumerating every simple path in the skeleton and
/// checking the blocking rules one path at a time.
inline bool dsep_by_paths(const DirectedGraph& g, Vertex x, const VertexSet& z, Vertex y) {
    const std::size_t n = g.size();
    const std::set<Vertex> zset(z.begin(), z.end());
    std::vector<std::vector<bool>> desc(n);
    for (Vertex v = 0; v < n; ++v) desc[v] = g.descendants_of(v);

    auto blocked = [&](const std::vector<Vertex>& path) {
        for (std::size_t i = 1; i + 1 < path.size(); ++i) {
            const Vertex prev = path[i - 1], v = path[i], next = path[i + 1];
            const bool collider = g.has_edge(prev, v) && g.has_edge(next, v);
            if (collider) {
                bool opened = false;
                for (Vertex w : zset)
                    if (w == v || desc[v][w]) opened = true;
                if (!opened) return true;
            } else if (zset.contains(v)) {
                return true;
            }
        }
        return false;
    };

    std::vector<Vertex> path{x};
    std::vector<bool> on_path(n, false);
    on_path[x] = true;
    std::function<bool(Vertex)> open_path_exists = [&](Vertex v) {
        for (Vertex u = 0; u < n; ++u) {
            if (on_path[u] || !g.adjacent(v, u)) continue;
            path.push_back(u);
            if (u == y) {
                if (!blocked(path)) return true;
            } else {
                on_path[u] = true;
                if (open_path_exists(u)) return true;
                on_path[u] = false;
            }
            path.pop_back();
        }
        return false;
    };
    return !open_path_exists(x);
}

inline std::vector<VertexSet> subsets_without(std::size_t n, Vertex x, Vertex y) {
    std::vector<Vertex> pool;
    for (Vertex v = 0; v < n; ++v)
        if (v != x && v != y) pool.push_back(v);
    std::vector<VertexSet> out;
    for (std::uint32_t mask = 0; mask < (1u << pool.size()); ++mask) {
        VertexSet s;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (mask & (1u << i)) s.push_back(pool[i]);
        out.push_back(s);
    }
    return out;
}

/// Full independence model of a DAG: one bit per (x < y, Z).
inline std::vector<bool> independence_model(const DirectedGraph& g) {
    std::vector<bool> bits;
    for (Vertex x = 0; x < g.size(); ++x)
        for (Vertex y = x + 1; y < g.size(); ++y)
            for (const auto& z : subsets_without(g.size(), x, y)) bits.push_back(dsep_by_paths(g, x, z, y));
    return bits;
}

/// Brute-force CPDAG: enumerate every acyclic orientation of the skeleton,
/// keep the ones with the same independence model, and mark an edge directed
/// iff all of them agree on its direction.
inline MixedGraph cpdag_by_enumeration(const DirectedGraph& g) {
    const auto target = independence_model(g);
    std::vector<Arc> edges(g.edges().begin(), g.edges().end());
    std::map<Pair, std::set<Arc>> seen;
    for (std::uint32_t mask = 0; mask < (1u << edges.size()); ++mask) {
        std::set<Arc> oriented;
        for (std::size_t i = 0; i < edges.size(); ++i) {
            const auto [a, b] = edges[i];
            oriented.insert(mask & (1u << i) ? Arc{b, a} : Arc{a, b});
        }
        DirectedGraph candidate(g.labels(), oriented);
        if (!candidate.is_acyclic()) continue;
        if (independence_model(candidate) != target) continue;
        for (const auto& arc : oriented) seen[Pair(arc.first, arc.second)].insert(arc);
    }
    MixedGraph out(g.labels());
    for (const auto& [pair, dirs] : seen) {
        if (dirs.size() == 1)
            out.add_directed(dirs.begin()->first, dirs.begin()->second);
        else
            out.add_undirected(pair.a, pair.b);
    }
    return out;
}

inline DirectedGraph random_dag(std::size_t n, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(p);
    std::vector<Vertex> perm(n);
    for (Vertex i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::set<Arc> e;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (coin(rng)) e.insert({perm[i], perm[j]});
    return DirectedGraph::numbered(n, e);
}

inline VertexSet random_subset(std::size_t n, Vertex x, Vertex y, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.35);
    VertexSet z;
    for (Vertex v = 0; v < n; ++v)
        if (v != x && v != y && coin(rng)) z.push_back(v);
    return z;
}

inline std::set<Pair> skeleton_pairs(const DirectedGraph& g) {
    std::set<Pair> out;
    for (const auto& [a, b] : g.edges()) out.insert(Pair(a, b));
    return out;
}

}  // namespace testsupport
