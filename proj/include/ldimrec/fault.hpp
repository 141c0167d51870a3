#pragma once

// Open-circuit diagnosis: compare a reference generative graph with a
// reconstructed one. Only edge presence decides the verdict.

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ldimrec/error.hpp"
#include "ldimrec/graph.hpp"

namespace ldimrec::fault {

using graph::Pair;

enum class Mode { Skeleton, Directed };
enum class Verdict { Healthy, FaultSuspected };

inline Mode mode_from_string(const std::string& s) {
    if (s == "skeleton") return Mode::Skeleton;
    if (s == "directed") return Mode::Directed;
    throw Error(ErrorCode::InvalidParams, "mode must be 'skeleton' or 'directed', got '" + s + "'");
}

inline const char* to_string(Verdict v) { return v == Verdict::Healthy ? "HEALTHY" : "FAULT_SUSPECTED"; }

struct OrientationDisagreement {
    Pair pair;
    std::string reference;  // "a -> b"
    std::string observed;   // "a -> b", "b -> a" or "a - b"
    friend bool operator==(const OrientationDisagreement&, const OrientationDisagreement&) = default;
};

struct FaultReport {
    std::vector<std::string> labels;
    std::set<Pair> missing;
    std::set<Pair> extra;
    std::vector<OrientationDisagreement> orientation;
    Verdict verdict = Verdict::Healthy;
};

inline FaultReport diagnose(const graph::DirectedGraph& reference, const graph::MixedGraph& observed, Mode mode) {
    if (reference.labels() != observed.labels()) {
        const std::set<std::string> a(reference.labels().begin(), reference.labels().end());
        const std::set<std::string> b(observed.labels().begin(), observed.labels().end());
        if (a != b) throw Error(ErrorCode::VertexMismatch, "reference and observed graphs have different vertex sets");
        // Same names, different order: remap observed onto the reference order.
        graph::MixedGraph remapped(reference.labels());
        for (const auto& [x, y] : observed.directed_edges())
            remapped.add_directed(remapped.vertex(observed.labels()[x]), remapped.vertex(observed.labels()[y]));
        for (const auto& p : observed.undirected_edges())
            remapped.add_undirected(remapped.vertex(observed.labels()[p.a]), remapped.vertex(observed.labels()[p.b]));
        return diagnose(reference, remapped, mode);
    }

    FaultReport r;
    r.labels = reference.labels();
    std::set<Pair> ref;
    for (const auto& [x, y] : reference.edges()) ref.insert(Pair(x, y));
    const std::set<Pair> obs = observed.skeleton_pairs();
    for (const auto& p : ref)
        if (!obs.contains(p)) r.missing.insert(p);
    for (const auto& p : obs)
        if (!ref.contains(p)) r.extra.insert(p);

    if (mode == Mode::Directed) {
        const auto& L = r.labels;
        for (const auto& [x, y] : reference.edges()) {
            if (!obs.contains(Pair(x, y)) || observed.has_directed(x, y)) continue;
            const std::string seen = observed.has_directed(y, x) ? L[y] + " -> " + L[x] : L[x] + " - " + L[y];
            r.orientation.push_back({Pair(x, y), L[x] + " -> " + L[y], seen});
        }
    }
    r.verdict = r.missing.empty() && r.extra.empty() ? Verdict::Healthy : Verdict::FaultSuspected;
    return r;
}

inline nlohmann::json to_json(const FaultReport& r) {
    auto pairs = [&](const std::set<Pair>& s) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : s) arr.push_back({r.labels[p.a], r.labels[p.b]});
        return arr;
    };
    nlohmann::json j;
    j["verdict"] = to_string(r.verdict);
    j["missing"] = pairs(r.missing);
    j["extra"] = pairs(r.extra);
    j["orientation_disagreements"] = nlohmann::json::array();
    for (const auto& d : r.orientation)
        j["orientation_disagreements"].push_back({{"reference", d.reference}, {"observed", d.observed}});
    return j;
}

inline std::string to_text(const FaultReport& r) {
    std::ostringstream os;
    os << "verdict: " << to_string(r.verdict) << "\n";
    auto list = [&](const char* name, const std::set<Pair>& s) {
        os << name << ":";
        if (s.empty()) os << " none";
        for (const auto& p : s) os << " {" << r.labels[p.a] << "," << r.labels[p.b] << "}";
        os << "\n";
    };
    list("missing edges", r.missing);
    list("extra edges", r.extra);
    for (const auto& d : r.orientation)
        os << "orientation: expected " << d.reference << ", observed " << d.observed << "\n";
    for (const auto& p : r.missing)
        os << "possible open circuit between " << r.labels[p.a] << " and " << r.labels[p.b] << "\n";
    return os.str();
}

}  // namespace ldimrec::fault
