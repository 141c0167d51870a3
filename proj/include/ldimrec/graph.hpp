#pragma once

// Directed and partially directed graphs over labelled vertices, exact
// d-separation, skeletons and DOT serialization.

#include <algorithm>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ldimrec/error.hpp"

namespace ldimrec::graph {

using Vertex = std::size_t;
using Arc = std::pair<Vertex, Vertex>;
using VertexSet = std::vector<Vertex>;  // kept sorted ascending

/// Unordered vertex pair stored as (min, max).
struct Pair {
    Vertex a;
    Vertex b;

    Pair(Vertex x, Vertex y) : a(std::min(x, y)), b(std::max(x, y)) {}

    friend auto operator<=>(const Pair&, const Pair&) = default;
};

namespace detail {

inline std::unordered_map<std::string, Vertex> index_labels(const std::vector<std::string>& labels) {
    std::unordered_map<std::string, Vertex> index;
    for (Vertex i = 0; i < labels.size(); ++i) {
        if (labels[i].empty()) throw Error(ErrorCode::InvalidGraph, "empty vertex label");
        if (!index.emplace(labels[i], i).second)
            throw Error(ErrorCode::InvalidGraph, "duplicate vertex label '" + labels[i] + "'");
    }
    return index;
}

}  // namespace detail

/// Shared vertex bookkeeping: labels in construction order plus a reverse index.
class VertexIndex {
public:
    VertexIndex() = default;
    explicit VertexIndex(std::vector<std::string> labels)
        : labels_(std::move(labels)), index_(detail::index_labels(labels_)) {}

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& label(Vertex v) const { return labels_.at(v); }

    Vertex at(const std::string& label) const {
        auto it = index_.find(label);
        if (it == index_.end()) throw Error(ErrorCode::UnknownVertex, "unknown vertex '" + label + "'");
        return it->second;
    }

    std::optional<Vertex> find(const std::string& label) const {
        auto it = index_.find(label);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    void check(Vertex v) const {
        if (v >= labels_.size())
            throw Error(ErrorCode::UnknownVertex, "vertex index " + std::to_string(v) + " out of range");
    }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, Vertex> index_;
};

class DirectedGraph {
public:
    DirectedGraph() = default;

    explicit DirectedGraph(std::vector<std::string> labels, const std::set<Arc>& edges = {})
        : vertices_(std::move(labels)), parents_(vertices_.size()), children_(vertices_.size()) {
        for (const auto& [x, y] : edges) add_edge(x, y);
    }

    static DirectedGraph from_labels(std::vector<std::string> labels,
                                     const std::vector<std::pair<std::string, std::string>>& edges) {
        DirectedGraph g(std::move(labels));
        for (const auto& [x, y] : edges) g.add_edge(g.vertex(x), g.vertex(y));
        return g;
    }

    /// Vertices labelled "1".."n".
    static DirectedGraph numbered(std::size_t n, const std::set<Arc>& edges = {}) {
        std::vector<std::string> labels;
        for (std::size_t i = 1; i <= n; ++i) labels.push_back(std::to_string(i));
        return DirectedGraph(std::move(labels), edges);
    }

    void add_edge(Vertex x, Vertex y) {
        vertices_.check(x);
        vertices_.check(y);
        if (x == y) throw Error(ErrorCode::InvalidGraph, "self-loop on '" + vertices_.label(x) + "'");
        if (edges_.insert({x, y}).second) {
            insert_sorted(children_[x], y);
            insert_sorted(parents_[y], x);
        }
    }

    void remove_edge(Vertex x, Vertex y) {
        if (edges_.erase({x, y}) == 0) return;
        std::erase(children_[x], y);
        std::erase(parents_[y], x);
    }

    std::size_t size() const { return vertices_.size(); }
    const VertexIndex& vertices() const { return vertices_; }
    const std::vector<std::string>& labels() const { return vertices_.labels(); }
    Vertex vertex(const std::string& label) const { return vertices_.at(label); }

    const std::set<Arc>& edges() const { return edges_; }
    bool has_edge(Vertex x, Vertex y) const { return edges_.contains({x, y}); }
    bool adjacent(Vertex x, Vertex y) const { return has_edge(x, y) || has_edge(y, x); }
    const VertexSet& parents(Vertex v) const { return parents_.at(v); }
    const VertexSet& children(Vertex v) const { return children_.at(v); }

    /// Kahn topological order with ties broken by vertex index; nullopt on a cycle.
    std::optional<std::vector<Vertex>> topological_order() const {
        std::vector<std::size_t> indegree(size());
        for (Vertex v = 0; v < size(); ++v) indegree[v] = parents_[v].size();
        std::set<Vertex> ready;
        for (Vertex v = 0; v < size(); ++v)
            if (indegree[v] == 0) ready.insert(v);
        std::vector<Vertex> order;
        while (!ready.empty()) {
            Vertex v = *ready.begin();
            ready.erase(ready.begin());
            order.push_back(v);
            for (Vertex c : children_[v])
                if (--indegree[c] == 0) ready.insert(c);
        }
        if (order.size() != size()) return std::nullopt;
        return order;
    }

    bool is_acyclic() const { return topological_order().has_value(); }

    /// Ancestors of `seeds`, each seed included (ancestor relation is reflexive).
    std::vector<bool> ancestors_of(const VertexSet& seeds) const {
        std::vector<bool> mark(size(), false);
        std::vector<Vertex> stack(seeds.begin(), seeds.end());
        while (!stack.empty()) {
            Vertex v = stack.back();
            stack.pop_back();
            if (mark[v]) continue;
            mark[v] = true;
            for (Vertex p : parents_[v])
                if (!mark[p]) stack.push_back(p);
        }
        return mark;
    }

    std::vector<bool> descendants_of(Vertex v) const {
        std::vector<bool> mark(size(), false);
        std::vector<Vertex> stack{v};
        while (!stack.empty()) {
            Vertex u = stack.back();
            stack.pop_back();
            if (mark[u]) continue;
            mark[u] = true;
            for (Vertex c : children_[u])
                if (!mark[c]) stack.push_back(c);
        }
        return mark;
    }

    friend bool operator==(const DirectedGraph& lhs, const DirectedGraph& rhs) {
        return lhs.labels() == rhs.labels() && lhs.edges_ == rhs.edges_;
    }

private:
    static void insert_sorted(VertexSet& set, Vertex v) {
        set.insert(std::lower_bound(set.begin(), set.end(), v), v);
    }

    VertexIndex vertices_;
    std::set<Arc> edges_;
    std::vector<VertexSet> parents_;
    std::vector<VertexSet> children_;
};

/// Partially directed graph. A vertex pair carries at most one edge, either
/// directed one way or undirected.
class MixedGraph {
public:
    MixedGraph() = default;
    explicit MixedGraph(std::vector<std::string> labels) : vertices_(std::move(labels)) {}

    static MixedGraph complete_undirected(std::vector<std::string> labels) {
        MixedGraph g(std::move(labels));
        for (Vertex a = 0; a < g.size(); ++a)
            for (Vertex b = a + 1; b < g.size(); ++b) g.add_undirected(a, b);
        return g;
    }

    std::size_t size() const { return vertices_.size(); }
    const VertexIndex& vertices() const { return vertices_; }
    const std::vector<std::string>& labels() const { return vertices_.labels(); }
    Vertex vertex(const std::string& label) const { return vertices_.at(label); }

    const std::set<Arc>& directed_edges() const { return directed_; }
    const std::set<Pair>& undirected_edges() const { return undirected_; }

    bool has_directed(Vertex x, Vertex y) const { return directed_.contains({x, y}); }
    bool has_undirected(Vertex x, Vertex y) const { return x != y && undirected_.contains(Pair(x, y)); }
    bool adjacent(Vertex x, Vertex y) const {
        return has_directed(x, y) || has_directed(y, x) || has_undirected(x, y);
    }

    void add_undirected(Vertex x, Vertex y) {
        check_pair(x, y);
        if (has_directed(x, y) || has_directed(y, x))
            throw Error(ErrorCode::InvalidGraph, "pair already carries a directed edge");
        undirected_.insert(Pair(x, y));
    }

    void add_directed(Vertex x, Vertex y) {
        check_pair(x, y);
        if (has_undirected(x, y) || has_directed(y, x))
            throw Error(ErrorCode::InvalidGraph, "pair already carries an edge");
        directed_.insert({x, y});
    }

    /// Turn x - y into x -> y. No-op if already x -> y.
    void orient(Vertex x, Vertex y) {
        if (has_directed(x, y)) return;
        if (!has_undirected(x, y))
            throw Error(ErrorCode::InvalidGraph, "cannot orient a non-existent undirected edge");
        undirected_.erase(Pair(x, y));
        directed_.insert({x, y});
    }

    void remove_edge(Vertex x, Vertex y) {
        if (x == y) return;
        undirected_.erase(Pair(x, y));
        directed_.erase({x, y});
        directed_.erase({y, x});
    }

    VertexSet adjacency(Vertex x) const {
        VertexSet out;
        for (Vertex v = 0; v < size(); ++v)
            if (v != x && adjacent(x, v)) out.push_back(v);
        return out;
    }

    VertexSet parents(Vertex x) const {
        VertexSet out;
        for (Vertex v = 0; v < size(); ++v)
            if (has_directed(v, x)) out.push_back(v);
        return out;
    }

    VertexSet children(Vertex x) const {
        VertexSet out;
        for (Vertex v = 0; v < size(); ++v)
            if (has_directed(x, v)) out.push_back(v);
        return out;
    }

    VertexSet undirected_neighbors(Vertex x) const {
        VertexSet out;
        for (Vertex v = 0; v < size(); ++v)
            if (has_undirected(x, v)) out.push_back(v);
        return out;
    }

    /// All adjacent pairs regardless of marks.
    std::set<Pair> skeleton_pairs() const {
        std::set<Pair> out(undirected_.begin(), undirected_.end());
        for (const auto& [x, y] : directed_) out.insert(Pair(x, y));
        return out;
    }

    /// Is there a directed path from `from` to `to` using directed edges only?
    bool has_directed_path(Vertex from, Vertex to) const {
        std::vector<bool> seen(size(), false);
        std::vector<Vertex> stack{from};
        while (!stack.empty()) {
            Vertex v = stack.back();
            stack.pop_back();
            for (Vertex c : children(v)) {
                if (c == to) return true;
                if (!seen[c]) {
                    seen[c] = true;
                    stack.push_back(c);
                }
            }
        }
        return false;
    }

    friend bool operator==(const MixedGraph& lhs, const MixedGraph& rhs) {
        return lhs.labels() == rhs.labels() && lhs.directed_ == rhs.directed_ &&
               lhs.undirected_ == rhs.undirected_;
    }

private:
    void check_pair(Vertex x, Vertex y) const {
        vertices_.check(x);
        vertices_.check(y);
        if (x == y) throw Error(ErrorCode::InvalidGraph, "self-loop on '" + vertices_.label(x) + "'");
    }

    VertexIndex vertices_;
    std::set<Arc> directed_;
    std::set<Pair> undirected_;
};

/// Separating sets Z_xy keyed by unordered pair.
class SepSetMap {
public:
    void set(Vertex x, Vertex y, VertexSet z) {
        if (x == y) throw Error(ErrorCode::InvalidGraph, "sepset for identical endpoints");
        std::sort(z.begin(), z.end());
        if (std::binary_search(z.begin(), z.end(), x) || std::binary_search(z.begin(), z.end(), y))
            throw Error(ErrorCode::InvalidGraph, "separating set contains an endpoint");
        sets_[Pair(x, y)] = std::move(z);
    }

    const VertexSet* find(Vertex x, Vertex y) const {
        auto it = sets_.find(Pair(x, y));
        return it == sets_.end() ? nullptr : &it->second;
    }

    bool contains(Vertex x, Vertex y) const { return find(x, y) != nullptr; }
    std::size_t size() const { return sets_.size(); }
    const std::map<Pair, VertexSet>& entries() const { return sets_; }

    friend bool operator==(const SepSetMap&, const SepSetMap&) = default;

private:
    std::map<Pair, VertexSet> sets_;
};

inline MixedGraph skeleton(const DirectedGraph& g) {
    MixedGraph out(g.labels());
    for (const auto& [x, y] : g.edges()) out.add_undirected(x, y);
    return out;
}

/// Skeleton of a partially directed graph: every edge made undirected.
inline MixedGraph skeleton(const MixedGraph& g) {
    MixedGraph out(g.labels());
    for (const auto& p : g.skeleton_pairs()) out.add_undirected(p.a, p.b);
    return out;
}

/// d-separation of x and y given z, via reachability in the moralized
/// ancestral graph of {x, y} ∪ z.
inline bool d_separated(const DirectedGraph& g, Vertex x, const VertexSet& z, Vertex y) {
    g.vertices().check(x);
    g.vertices().check(y);
    for (Vertex v : z) g.vertices().check(v);
    if (x == y) throw Error(ErrorCode::InvalidGraph, "d-separation query with x == y");
    if (std::find(z.begin(), z.end(), x) != z.end() || std::find(z.begin(), z.end(), y) != z.end())
        throw Error(ErrorCode::InvalidGraph, "conditioning set contains a query endpoint");
    if (!g.is_acyclic()) throw Error(ErrorCode::CyclicGraph, "d-separation requires an acyclic graph");

    VertexSet seeds(z);
    seeds.push_back(x);
    seeds.push_back(y);
    const auto keep = g.ancestors_of(seeds);

    const std::size_t n = g.size();
    std::vector<std::vector<bool>> moral(n, std::vector<bool>(n, false));
    for (Vertex v = 0; v < n; ++v) {
        if (!keep[v]) continue;
        const auto& pa = g.parents(v);
        for (std::size_t i = 0; i < pa.size(); ++i) {
            moral[pa[i]][v] = moral[v][pa[i]] = true;
            for (std::size_t j = i + 1; j < pa.size(); ++j) moral[pa[i]][pa[j]] = moral[pa[j]][pa[i]] = true;
        }
    }

    std::vector<bool> blocked(n, false);
    for (Vertex v : z) blocked[v] = true;
    std::vector<bool> seen(n, false);
    std::vector<Vertex> stack{x};
    seen[x] = true;
    while (!stack.empty()) {
        Vertex v = stack.back();
        stack.pop_back();
        for (Vertex u = 0; u < n; ++u) {
            if (!moral[v][u] || seen[u] || blocked[u] || !keep[u]) continue;
            if (u == y) return false;
            seen[u] = true;
            stack.push_back(u);
        }
    }
    return true;
}

inline bool d_separated(const DirectedGraph& g, const std::string& x, const std::vector<std::string>& z,
                        const std::string& y) {
    VertexSet zs;
    for (const auto& label : z) zs.push_back(g.vertex(label));
    return d_separated(g, g.vertex(x), zs, g.vertex(y));
}

/// Unshielded colliders a -> c <- b (a < b) with both edges directed.
struct VStructure {
    Vertex a;
    Vertex c;
    Vertex b;
    friend auto operator<=>(const VStructure&, const VStructure&) = default;
};

inline std::set<VStructure> v_structures(const MixedGraph& g) {
    std::set<VStructure> out;
    for (Vertex c = 0; c < g.size(); ++c) {
        const auto pa = g.parents(c);
        for (std::size_t i = 0; i < pa.size(); ++i)
            for (std::size_t j = i + 1; j < pa.size(); ++j)
                if (!g.adjacent(pa[i], pa[j])) out.insert({pa[i], c, pa[j]});
    }
    return out;
}

inline std::set<VStructure> v_structures(const DirectedGraph& g) {
    MixedGraph m(g.labels());
    for (const auto& [x, y] : g.edges()) m.add_directed(x, y);
    return v_structures(m);
}

// --- DOT ------------------------------------------------------------------

namespace detail {

inline bool is_plain_dot_id(const std::string& s) {
    static const std::regex ident("[A-Za-z_][A-Za-z0-9_]*");
    static const std::regex numeral("-?(\\.[0-9]+|[0-9]+(\\.[0-9]*)?)");
    return std::regex_match(s, ident) || std::regex_match(s, numeral);
}

inline std::string dot_id(const std::string& s) {
    if (is_plain_dot_id(s)) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

inline std::string dot_unquote(const std::string& s) {
    if (s.size() < 2 || s.front() != '"') return s;
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        if (s[i] == '\\' && i + 2 < s.size()) ++i;
        out += s[i];
    }
    return out;
}

}  // namespace detail

/// Writes vertices in construction order, then edges ordered by
/// (lower endpoint index, higher endpoint index). Undirected edges are
/// emitted as `a -> b [dir=none];` with a before b in vertex order.
inline void write_dot(std::ostream& os, const MixedGraph& g, const std::string& name = "G") {
    os << "digraph " << detail::dot_id(name) << " {\n";
    for (const auto& label : g.labels()) os << "  " << detail::dot_id(label) << ";\n";
    std::map<Pair, std::string> lines;
    for (const auto& [x, y] : g.directed_edges())
        lines[Pair(x, y)] = detail::dot_id(g.vertices().label(x)) + " -> " + detail::dot_id(g.vertices().label(y)) + ";";
    for (const auto& p : g.undirected_edges())
        lines[p] = detail::dot_id(g.vertices().label(p.a)) + " -> " + detail::dot_id(g.vertices().label(p.b)) +
                   " [dir=none];";
    for (const auto& [pair, line] : lines) os << "  " << line << "\n";
    os << "}\n";
}

inline void write_dot(std::ostream& os, const DirectedGraph& g, const std::string& name = "G") {
    MixedGraph m(g.labels());
    for (const auto& [x, y] : g.edges()) m.add_directed(x, y);
    write_dot(os, m, name);
}

template <class Graph>
std::string to_dot(const Graph& g, const std::string& name = "G") {
    std::ostringstream os;
    write_dot(os, g, name);
    return os.str();
}

/// Reads the subset of DOT produced by write_dot: vertex statements and
/// `a -> b;` / `a -> b [dir=none];` edge statements.
inline MixedGraph read_dot(std::istream& is) {
    static const std::string id = R"(("(?:[^"\\]|\\.)*"|[A-Za-z0-9_.\-]+))";
    static const std::regex header(R"(^\s*(?:strict\s+)?digraph\s*)" + id + R"(?\s*\{\s*$)");
    static const std::regex vertex_stmt(R"(^\s*)" + id + R"(\s*;?\s*$)");
    static const std::regex edge_stmt(R"(^\s*)" + id + R"(\s*->\s*)" + id + R"(\s*(\[\s*dir\s*=\s*none\s*\])?\s*;?\s*$)");
    static const std::regex closing(R"(^\s*\}\s*$)");

    std::vector<std::string> labels;
    std::set<std::string> seen;
    std::vector<std::tuple<std::string, std::string, bool>> edges;
    auto note_vertex = [&](const std::string& label) {
        if (seen.insert(label).second) labels.push_back(label);
    };

    std::string line;
    int lineno = 0;
    bool opened = false, closed = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (!opened) {
            if (!std::regex_match(line, header))
                throw Error(ErrorCode::ParseError, "DOT line " + std::to_string(lineno) + ": expected 'digraph NAME {'");
            opened = true;
        } else if (std::regex_match(line, closing)) {
            closed = true;
            break;
        } else if (std::regex_match(line, m, edge_stmt)) {
            auto a = detail::dot_unquote(m[1]);
            auto b = detail::dot_unquote(m[2]);
            note_vertex(a);
            note_vertex(b);
            edges.emplace_back(a, b, m[3].matched);
        } else if (std::regex_match(line, m, vertex_stmt)) {
            note_vertex(detail::dot_unquote(m[1]));
        } else {
            throw Error(ErrorCode::ParseError, "DOT line " + std::to_string(lineno) + ": unsupported statement");
        }
    }
    if (!opened || !closed) throw Error(ErrorCode::ParseError, "DOT input is not a complete digraph block");

    MixedGraph g(labels);
    for (const auto& [a, b, undirected] : edges) {
        if (undirected)
            g.add_undirected(g.vertex(a), g.vertex(b));
        else
            g.add_directed(g.vertex(a), g.vertex(b));
    }
    return g;
}

inline MixedGraph parse_dot(const std::string& text) {
    std::istringstream is(text);
    return read_dot(is);
}

}  // namespace ldimrec::graph
