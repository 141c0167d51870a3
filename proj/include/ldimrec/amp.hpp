#pragma once

// Small-signal compiler from multistage amplifier netlists (CS, CD and
// cascode stages joined by RLC blocks) to an LDIM.

#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ldimrec/error.hpp"
#include "ldimrec/filter.hpp"
#include "ldimrec/graph.hpp"
#include "ldimrec/ldim.hpp"
#include "ldimrec/poly.hpp"

namespace ldimrec::amp {

/// Rational function of s, coefficients ascending in s.
class ContinuousRational {
public:
    ContinuousRational() : num_{0.0}, den_{1.0} {}
    ContinuousRational(double k) : num_{k}, den_{1.0} {}  // NOLINT: constants convert implicitly
    ContinuousRational(poly::Coeffs num, poly::Coeffs den)
        : num_(poly::trimmed(std::move(num))), den_(poly::trimmed(std::move(den))) {
        if (poly::is_zero(den_)) throw Error(ErrorCode::InvalidNetlist, "rational with zero denominator");
        for (double c : num_)
            if (!std::isfinite(c)) throw Error(ErrorCode::InvalidNetlist, "non-finite rational coefficient");
        for (double c : den_)
            if (!std::isfinite(c)) throw Error(ErrorCode::InvalidNetlist, "non-finite rational coefficient");
        normalize();
    }

    /// s^1 / 1
    static ContinuousRational s() { return {{0.0, 1.0}, {1.0}}; }
    static ContinuousRational resistor(double r) { return {r}; }
    static ContinuousRational capacitor(double c) { return {{1.0}, {0.0, c}}; }
    static ContinuousRational inductor(double l) { return {{0.0, l}, {1.0}}; }

    const poly::Coeffs& num() const { return num_; }
    const poly::Coeffs& den() const { return den_; }

    bool is_zero() const { return poly::is_zero(num_); }
    cplx eval(cplx s) const { return poly::eval(num_, s) / poly::eval(den_, s); }
    cplx at_frequency_hz(double f) const { return eval(cplx(0.0, 2.0 * std::numbers::pi * f)); }

    std::vector<cplx> poles() const { return poly::roots(den_); }
    std::vector<cplx> zeros() const { return poly::roots(num_); }

    /// Removes numerator/denominator roots that coincide within a relative 1e-8.
    ContinuousRational simplified(double tol = 1e-8) const {
        if (is_zero()) return {0.0};
        poly::Coeffs n = num_, d = den_;
        std::size_t zn = 0, zd = 0;
        while (zn + 1 < n.size() && n[zn] == 0.0) ++zn;
        while (zd + 1 < d.size() && d[zd] == 0.0) ++zd;
        const std::size_t common = std::min(zn, zd);
        n.erase(n.begin(), n.begin() + static_cast<std::ptrdiff_t>(common));
        d.erase(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(common));
        if (n.size() == 1 || d.size() == 1) return {n, d};

        auto rn = poly::roots(n);
        auto rd = poly::roots(d);
        std::vector<bool> used(rn.size(), false);
        std::vector<cplx> keep_d;
        bool cancelled = false;
        for (const auto& p : rd) {
            bool hit = false;
            for (std::size_t i = 0; i < rn.size(); ++i) {
                if (used[i]) continue;
                if (std::abs(rn[i] - p) <= tol * std::max({std::abs(p), std::abs(rn[i]), 1e-300})) {
                    used[i] = hit = cancelled = true;
                    break;
                }
            }
            if (!hit) keep_d.push_back(p);
        }
        if (!cancelled) return {n, d};
        std::vector<cplx> keep_n;
        for (std::size_t i = 0; i < rn.size(); ++i)
            if (!used[i]) keep_n.push_back(rn[i]);
        return {poly::from_roots(keep_n, n.back()), poly::from_roots(keep_d, d.back())};
    }

    friend ContinuousRational operator+(const ContinuousRational& a, const ContinuousRational& b) {
        if (a.den_ == b.den_) return {poly::add(a.num_, b.num_), a.den_};
        return {poly::add(poly::mul(a.num_, b.den_), poly::mul(b.num_, a.den_)), poly::mul(a.den_, b.den_)};
    }
    friend ContinuousRational operator-(const ContinuousRational& a) { return {poly::scale(a.num_, -1.0), a.den_}; }
    friend ContinuousRational operator-(const ContinuousRational& a, const ContinuousRational& b) { return a + (-b); }
    friend ContinuousRational operator*(const ContinuousRational& a, const ContinuousRational& b) {
        return {poly::mul(a.num_, b.num_), poly::mul(a.den_, b.den_)};
    }
    friend ContinuousRational operator/(const ContinuousRational& a, const ContinuousRational& b) {
        if (b.is_zero()) throw Error(ErrorCode::NumericalSingularity, "division by the zero rational");
        return {poly::mul(a.num_, b.den_), poly::mul(a.den_, b.num_)};
    }

    friend bool operator==(const ContinuousRational&, const ContinuousRational&) = default;

private:
    // Monic denominator: highest-power coefficient equal to one.
    void normalize() {
        const double lead = den_.back();
        for (double& c : num_) c /= lead;
        for (double& c : den_) c /= lead;
        num_ = poly::trimmed(std::move(num_));
    }

    poly::Coeffs num_;
    poly::Coeffs den_;
};

/// Parallel combination a*b/(a+b).
inline ContinuousRational parallel(const ContinuousRational& a, const ContinuousRational& b) {
    return ((a * b) / (a + b)).simplified();
}

// --- netlist ----------------------------------------------------------------

enum class StageMode { CS, CD, CASCODE };

inline std::string to_string(StageMode m) {
    switch (m) {
        case StageMode::CS: return "CS";
        case StageMode::CD: return "CD";
        case StageMode::CASCODE: return "CASCODE";
    }
    return "?";
}

struct StageNoise {
    std::optional<double> white_a2;           // current variance per sample (A^2)
    std::optional<double> flicker_corner_hz;  // nullopt -> default, <= 0 -> no flicker
    int flicker_order = 3;
};

struct StageParams {
    std::string id;
    StageMode mode = StageMode::CS;
    double gm_s = 1e-3;
    double rds_ohm = 50e3;
    ContinuousRational zs = 0.0;  // source impedance
    double gm2_s = 0.0;           // cascode common-gate device
    double rds2_ohm = 0.0;
    StageNoise noise;
};

struct TapRef {
    std::string block;
    std::string tap;
};

struct Stage {
    StageParams params;
    std::string output_node;
    std::optional<TapRef> input_tap;
};

struct RlcBlock {
    std::string id;
    std::optional<std::string> node;  // owning output node; nullopt for source-only blocks
    ContinuousRational zo = 0.0;      // load impedance seen at the owning node
    std::map<std::string, ContinuousRational> taps;  // tap name -> open-circuit voltage transfer
};

struct Netlist {
    double fs_hz = 1e6;
    std::vector<std::string> nodes;
    std::vector<Stage> stages;
    std::vector<RlcBlock> blocks;
    std::optional<double> prewarp_hz;

    const RlcBlock* block(const std::string& id) const {
        for (const auto& b : blocks)
            if (b.id == id) return &b;
        return nullptr;
    }

    const RlcBlock* block_at(const std::string& node) const {
        for (const auto& b : blocks)
            if (b.node && *b.node == node) return &b;
        return nullptr;
    }

    /// The node whose block feeds the stage's gate, if any.
    std::optional<std::string> driving_node(const Stage& st) const {
        if (!st.input_tap) return std::nullopt;
        const RlcBlock* b = block(st.input_tap->block);
        return b ? b->node : std::nullopt;
    }
};

// Block conveniences for the two canonical coupling networks.

/// Series capacitor into a shunt bias resistor: s R C / (1 + s R C).
inline ContinuousRational highpass_coupling(double c_series, double r_shunt) {
    return {{0.0, r_shunt * c_series}, {1.0, r_shunt * c_series}};
}

/// Unloaded resistive divider: r_bottom / (r_top + r_bottom).
inline ContinuousRational resistive_divider(double r_top, double r_bottom) {
    return {r_bottom / (r_top + r_bottom)};
}

/// Resistor bypassed by a capacitor: R / (1 + s R C).
inline ContinuousRational bypassed_resistor(double r, double c) { return {{r}, {1.0, r * c}}; }

// --- stage formulas ---------------------------------------------------------

/// Output resistance of a cascode: r_ds1 + r_ds2 + g_m2 r_ds1 r_ds2.
inline double cascode_output_resistance(const StageParams& st) {
    return st.rds_ohm + st.rds2_ohm + st.gm2_s * st.rds_ohm * st.rds2_ohm;
}

/// Cascode stages are handled as a CS device with the boosted output resistance.
inline StageParams equivalent_stage(const StageParams& st) {
    if (st.mode != StageMode::CASCODE) return st;
    StageParams eq = st;
    eq.mode = StageMode::CS;
    eq.rds_ohm = cascode_output_resistance(st);
    return eq;
}

/// M_alpha = 1 + g_m Z_s + Z_s / r_ds (common source).
inline ContinuousRational m_alpha(const StageParams& st) {
    return ContinuousRational(1.0) + ContinuousRational(st.gm_s) * st.zs + st.zs / ContinuousRational(st.rds_ohm);
}

/// M_beta = 1 + Z_s / r_ds (common drain).
inline ContinuousRational m_beta(const StageParams& st) {
    return ContinuousRational(1.0) + st.zs / ContinuousRational(st.rds_ohm);
}

struct NodeModel {
    std::map<std::string, ContinuousRational> gain;   // H_k: gate voltage -> node voltage
    std::map<std::string, ContinuousRational> noise;  // P_k: stage noise current -> node voltage
    poly::Coeffs shared_denominator;                  // monic, common to every H_k and P_k
};

inline std::vector<const Stage*> stages_at(const Netlist& nl, const std::string& node) {
    std::vector<const Stage*> out;
    for (const auto& st : nl.stages)
        if (st.output_node == node) out.push_back(&st);
    return out;
}

/// Node voltage in terms of gate voltages and stage noise currents:
///   V = sum_k H_k V_gk + sum_k P_k (I_fk + I_wk)
/// with H_k = C_k / (1 + sum T_j + sum S_j) and P_k = D_k / (same).
/// Writing Z_o = n_o/d_o and M_k = a_k/b_k, every H_k and P_k share the
/// denominator d_o prod(a) + n_o sum_j y_j b_j prod_{i!=j} a_i, where y_j is
/// 1/r_ds (CS) or g_m + 1/r_ds (CD).
inline NodeModel node_voltage_model(const std::string& node, const Netlist& nl) {
    if (std::find(nl.nodes.begin(), nl.nodes.end(), node) == nl.nodes.end())
        throw Error(ErrorCode::UnknownVertex, "unknown node '" + node + "'");
    const RlcBlock* load = nl.block_at(node);
    if (!load || load->zo.is_zero()) throw Error(ErrorCode::MissingImpedance, "node '" + node + "' has no load impedance");

    const auto stages = stages_at(nl, node);
    std::vector<StageParams> eq;
    std::vector<poly::Coeffs> a, b;
    std::vector<double> y;
    for (const Stage* st : stages) {
        eq.push_back(equivalent_stage(st->params));
        const auto& p = eq.back();
        const auto m = p.mode == StageMode::CD ? m_beta(p) : m_alpha(p);
        a.push_back(m.num());
        b.push_back(m.den());
        y.push_back(p.mode == StageMode::CD ? p.gm_s + 1.0 / p.rds_ohm : 1.0 / p.rds_ohm);
    }

    auto product_except = [&](std::size_t skip) {
        poly::Coeffs acc{1.0};
        for (std::size_t i = 0; i < a.size(); ++i)
            if (i != skip) acc = poly::mul(acc, a[i]);
        return acc;
    };

    const poly::Coeffs& n_o = load->zo.num();
    const poly::Coeffs& d_o = load->zo.den();
    poly::Coeffs admittance_num{0.0};
    for (std::size_t j = 0; j < a.size(); ++j)
        admittance_num = poly::add(admittance_num, poly::scale(poly::mul(b[j], product_except(j)), y[j]));
    poly::Coeffs shared = poly::add(poly::mul(d_o, product_except(a.size())), poly::mul(n_o, admittance_num));
    if (poly::is_zero(shared)) throw Error(ErrorCode::NumericalSingularity, "node '" + node + "' has a vanishing denominator");
    const double lead = shared.back();
    shared = poly::scale(shared, 1.0 / lead);

    NodeModel out;
    out.shared_denominator = shared;
    for (std::size_t k = 0; k < stages.size(); ++k) {
        const poly::Coeffs d_k = poly::scale(poly::mul(n_o, poly::mul(b[k], product_except(k))), -1.0 / lead);
        out.noise.emplace(stages[k]->params.id, ContinuousRational(d_k, shared));
        out.gain.emplace(stages[k]->params.id, ContinuousRational(poly::scale(d_k, eq[k].gm_s), shared));
    }
    return out;
}

// --- discretization ---------------------------------------------------------

/// s = c (1 - z^-1)/(1 + z^-1) with c = 2 fs, or c = w_p / tan(w_p / (2 fs))
/// when prewarped at w_p = 2 pi prewarp_hz.
inline RationalFilter bilinear(const ContinuousRational& f, double fs_hz, std::optional<double> prewarp_hz = std::nullopt) {
    if (!(fs_hz > 0.0)) throw Error(ErrorCode::InvalidParams, "sample rate must be positive");
    double c = 2.0 * fs_hz;
    if (prewarp_hz) {
        if (!(*prewarp_hz > 0.0 && *prewarp_hz < fs_hz / 2.0))
            throw Error(ErrorCode::InvalidParams, "prewarp frequency must lie in (0, Nyquist)");
        const double wp = 2.0 * std::numbers::pi * *prewarp_hz;
        c = wp / std::tan(wp / (2.0 * fs_hz));
    }
    const std::size_t order = std::max(poly::degree(f.num()), poly::degree(f.den()));
    auto map = [&](const poly::Coeffs& p) {
        poly::Coeffs out(order + 1, 0.0);
        double ck = 1.0;
        for (std::size_t k = 0; k < p.size(); ++k, ck *= c) {
            if (p[k] == 0.0) continue;
            const auto term = poly::mul(poly::pow({1.0, -1.0}, k), poly::pow({1.0, 1.0}, order - k));
            for (std::size_t i = 0; i < term.size(); ++i) out[i] += p[k] * ck * term[i];
        }
        return out;
    };
    auto num = map(f.num());
    auto den = map(f.den());
    double scale = 0.0, ck = 1.0;
    for (std::size_t k = 0; k < f.den().size(); ++k, ck *= c) scale += std::abs(f.den()[k]) * ck;
    if (std::abs(den[0]) <= 1e-12 * scale)
        throw Error(ErrorCode::SingularMapping, "pole at the bilinear singular point s = c");
    return RationalFilter(std::move(num), std::move(den));
}

// --- compilation ------------------------------------------------------------

inline constexpr double kBoltzmann = 1.380649e-23;
inline constexpr double kTemperatureK = 300.0;

/// Channel thermal noise 4kT(2/3)g_m (one-sided A^2/Hz) as a per-sample variance.
inline double default_white_variance(const StageParams& st, double fs_hz) {
    return 4.0 * kBoltzmann * kTemperatureK * (2.0 / 3.0) * st.gm_s * fs_hz / 2.0;
}

inline double default_flicker_corner(double fs_hz) { return fs_hz / 100.0; }

inline void validate(const Netlist& nl) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidNetlist, msg); };
    if (!(nl.fs_hz > 0.0)) fail("fs_hz must be positive");
    if (nl.nodes.empty()) fail("netlist has no output nodes");
    graph::VertexIndex node_index(nl.nodes);
    if (nl.stages.empty()) fail("netlist has no stages");

    std::set<std::string> block_ids;
    std::set<std::string> owned;
    for (const auto& b : nl.blocks) {
        if (b.id.empty() || !block_ids.insert(b.id).second) fail("duplicate or empty block id '" + b.id + "'");
        if (b.node) {
            if (!node_index.find(*b.node)) fail("block '" + b.id + "' references unknown node '" + *b.node + "'");
            if (!owned.insert(*b.node).second) fail("node '" + *b.node + "' is owned by more than one block");
        }
    }

    std::set<std::string> stage_ids;
    std::set<std::pair<std::string, std::string>> used_taps;
    for (const auto& st : nl.stages) {
        const auto& p = st.params;
        const std::string where = "stage '" + p.id + "'";
        if (p.id.empty() || !stage_ids.insert(p.id).second) fail("duplicate or empty stage id '" + p.id + "'");
        if (!(p.gm_s > 0.0)) fail(where + ": gm_s must be positive");
        if (!(p.rds_ohm > 0.0)) fail(where + ": rds_ohm must be positive");
        if (p.mode == StageMode::CASCODE && !(p.gm2_s > 0.0 && p.rds2_ohm > 0.0))
            fail(where + ": cascode stages need positive gm2_s and rds2_ohm");
        if (p.noise.white_a2 && !(*p.noise.white_a2 > 0.0)) fail(where + ": noise white_a2 must be positive");
        if (p.noise.flicker_corner_hz && *p.noise.flicker_corner_hz >= nl.fs_hz / 2.0)
            fail(where + ": flicker corner must be below Nyquist");
        if (!node_index.find(st.output_node)) fail(where + ": unknown output node '" + st.output_node + "'");
        if (st.input_tap) {
            const RlcBlock* b = nl.block(st.input_tap->block);
            if (!b) fail(where + ": unknown block '" + st.input_tap->block + "'");
            if (!b->taps.contains(st.input_tap->tap))
                fail(where + ": block '" + b->id + "' has no tap '" + st.input_tap->tap + "'");
            if (b->node && *b->node == st.output_node)
                fail(where + ": gate taps the block of its own output node");
            if (!used_taps.insert({st.input_tap->block, st.input_tap->tap}).second)
                fail(where + ": tap '" + st.input_tap->tap + "' already drives another stage");
        }
    }
    for (const auto& node : nl.nodes)
        if (stages_at(nl, node).empty()) fail("node '" + node + "' has no stage attached");
}

/// Edge (l_m -> l_0) iff some stage on l_0 taps the block owned by l_m.
inline graph::DirectedGraph generative_graph_of_netlist(const Netlist& nl) {
    graph::DirectedGraph g(nl.nodes);
    for (const auto& st : nl.stages)
        if (auto from = nl.driving_node(st)) g.add_edge(g.vertex(*from), g.vertex(st.output_node));
    return g;
}

inline Ldim compile(const Netlist& nl) {
    validate(nl);
    const auto topology = generative_graph_of_netlist(nl);
    if (!topology.is_acyclic()) throw Error(ErrorCode::CyclicTopology, "stage taps form a feedback cycle");

    Ldim m(nl.nodes, nl.fs_hz);
    auto discretize = [&](const ContinuousRational& f, const std::string& what) {
        RationalFilter d = bilinear(f, nl.fs_hz, nl.prewarp_hz);
        if (!d.is_stable()) throw Error(ErrorCode::UnstableDiscretization, what + " is unstable after discretization");
        return d;
    };

    for (std::size_t to = 0; to < nl.nodes.size(); ++to) {
        const std::string& node = nl.nodes[to];
        const NodeModel model = node_voltage_model(node, nl);
        std::map<std::size_t, ContinuousRational> incoming;
        for (const Stage* st : stages_at(nl, node)) {
            const auto& p = st->params;
            if (p.mode == StageMode::CASCODE) {
                std::ostringstream note;
                note.precision(17);
                note << "stage " << p.id << ": cascode compiled as common-source equivalent with r_out = "
                     << cascode_output_resistance(p) << " ohm";
                m.add_note(note.str());
            }
            if (auto from = nl.driving_node(*st)) {
                const auto& tap = nl.block(st->input_tap->block)->taps.at(st->input_tap->tap);
                const std::size_t j = m.channel(*from);
                const ContinuousRational term = model.gain.at(p.id) * tap;
                auto it = incoming.find(j);
                if (it == incoming.end())
                    incoming.emplace(j, term);
                else
                    it->second = it->second + term;
            }

            NoiseSpec spec;
            spec.white_variance = p.noise.white_a2.value_or(default_white_variance(p, nl.fs_hz));
            const double corner = p.noise.flicker_corner_hz.value_or(default_flicker_corner(nl.fs_hz));
            if (corner > 0.0) spec.flicker = FlickerSpec{corner, p.noise.flicker_order};
            spec.shaping = discretize(model.noise.at(p.id), "noise transfer of stage " + p.id);
            m.add_noise(to, std::move(spec));
        }
        for (const auto& [from, h] : incoming)
            m.set_entry(to, from, discretize(h.simplified(), "H(" + node + "," + nl.nodes[from] + ")"));
    }
    m.validate();
    return m;
}

// --- netlist JSON -----------------------------------------------------------

inline constexpr const char* kNetlistSchema = "ldim_netlist_v1";

namespace detail {

[[noreturn]] inline void field_error(const std::string& path, const std::string& msg) {
    throw Error(ErrorCode::InvalidNetlist, "field '" + path + "': " + msg);
}

inline const nlohmann::json& require(const nlohmann::json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) field_error(path.empty() ? key : path + "." + key, "missing");
    return j.at(key);
}

inline double number(const nlohmann::json& j, const std::string& path) {
    if (!j.is_number()) field_error(path, "expected a number");
    return j.get<double>();
}

inline std::string text(const nlohmann::json& j, const std::string& path) {
    if (!j.is_string()) field_error(path, "expected a string");
    return j.get<std::string>();
}

inline ContinuousRational rational(const nlohmann::json& j, const std::string& path) {
    auto coeffs = [&](const char* key) {
        const auto& arr = require(j, key, path);
        if (!arr.is_array() || arr.empty()) field_error(path + "." + key, "expected a non-empty coefficient array");
        poly::Coeffs out;
        for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(number(arr[i], path + "." + key + "[" + std::to_string(i) + "]"));
        return out;
    };
    auto num = coeffs("num");
    auto den = coeffs("den");
    if (poly::is_zero(den)) field_error(path + ".den", "denominator is identically zero");
    return {num, den};
}

inline nlohmann::json rational_json(const ContinuousRational& r) { return {{"num", r.num()}, {"den", r.den()}}; }

}  // namespace detail

inline Netlist netlist_from_json(const nlohmann::json& j) {
    using namespace detail;
    if (!j.is_object()) field_error("$", "expected a JSON object");
    if (!j.contains("schema") || !j["schema"].is_string() || j["schema"].get<std::string>() != kNetlistSchema)
        field_error("schema", std::string("expected \"") + kNetlistSchema + "\"");
    Netlist nl;
    nl.fs_hz = number(require(j, "fs_hz", ""), "fs_hz");
    if (j.contains("prewarp_hz") && !j["prewarp_hz"].is_null()) nl.prewarp_hz = number(j["prewarp_hz"], "prewarp_hz");

    const auto& nodes = require(j, "nodes", "");
    if (!nodes.is_array()) field_error("nodes", "expected an array");
    for (std::size_t i = 0; i < nodes.size(); ++i) nl.nodes.push_back(text(nodes[i], "nodes[" + std::to_string(i) + "]"));

    const auto& blocks = require(j, "blocks", "");
    if (!blocks.is_array()) field_error("blocks", "expected an array");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string path = "blocks[" + std::to_string(i) + "]";
        const auto& bj = blocks[i];
        RlcBlock b;
        b.id = text(require(bj, "id", path), path + ".id");
        if (bj.contains("node") && !bj["node"].is_null()) b.node = text(bj["node"], path + ".node");
        if (bj.contains("zo") && !bj["zo"].is_null()) b.zo = rational(bj["zo"], path + ".zo");
        if (bj.contains("taps")) {
            if (!bj["taps"].is_object()) field_error(path + ".taps", "expected an object");
            for (const auto& [name, tj] : bj["taps"].items()) b.taps.emplace(name, rational(tj, path + ".taps." + name));
        }
        nl.blocks.push_back(std::move(b));
    }

    const auto& stages = require(j, "stages", "");
    if (!stages.is_array()) field_error("stages", "expected an array");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const std::string path = "stages[" + std::to_string(i) + "]";
        const auto& sj = stages[i];
        Stage st;
        auto& p = st.params;
        p.id = text(require(sj, "id", path), path + ".id");
        const std::string mode = text(require(sj, "mode", path), path + ".mode");
        if (mode == "CS")
            p.mode = StageMode::CS;
        else if (mode == "CD")
            p.mode = StageMode::CD;
        else if (mode == "CASCODE")
            p.mode = StageMode::CASCODE;
        else
            field_error(path + ".mode", "expected CS, CD or CASCODE");
        p.gm_s = number(require(sj, "gm_s", path), path + ".gm_s");
        p.rds_ohm = number(require(sj, "rds_ohm", path), path + ".rds_ohm");
        p.zs = sj.contains("zs") && !sj["zs"].is_null() ? rational(sj["zs"], path + ".zs") : ContinuousRational(0.0);
        if (sj.contains("gm2_s")) p.gm2_s = number(sj["gm2_s"], path + ".gm2_s");
        if (sj.contains("rds2_ohm")) p.rds2_ohm = number(sj["rds2_ohm"], path + ".rds2_ohm");
        if (sj.contains("noise") && sj["noise"].is_object()) {
            const auto& nj = sj["noise"];
            if (nj.contains("white_a2")) p.noise.white_a2 = number(nj["white_a2"], path + ".noise.white_a2");
            if (nj.contains("flicker_corner_hz"))
                p.noise.flicker_corner_hz = number(nj["flicker_corner_hz"], path + ".noise.flicker_corner_hz");
            if (nj.contains("flicker_order"))
                p.noise.flicker_order = static_cast<int>(number(nj["flicker_order"], path + ".noise.flicker_order"));
        }
        st.output_node = text(require(sj, "output_node", path), path + ".output_node");
        if (sj.contains("input_tap") && !sj["input_tap"].is_null()) {
            const auto& tj = sj["input_tap"];
            st.input_tap = TapRef{text(require(tj, "block", path + ".input_tap"), path + ".input_tap.block"),
                                  text(require(tj, "tap", path + ".input_tap"), path + ".input_tap.tap")};
        }
        nl.stages.push_back(std::move(st));
    }
    validate(nl);
    return nl;
}

inline nlohmann::json to_json(const Netlist& nl) {
    using detail::rational_json;
    nlohmann::json j;
    j["schema"] = kNetlistSchema;
    j["fs_hz"] = nl.fs_hz;
    if (nl.prewarp_hz) j["prewarp_hz"] = *nl.prewarp_hz;
    j["nodes"] = nl.nodes;
    j["stages"] = nlohmann::json::array();
    for (const auto& st : nl.stages) {
        const auto& p = st.params;
        nlohmann::json sj{{"id", p.id},       {"mode", to_string(p.mode)},   {"gm_s", p.gm_s},
                          {"rds_ohm", p.rds_ohm}, {"zs", rational_json(p.zs)}, {"output_node", st.output_node}};
        if (p.mode == StageMode::CASCODE) {
            sj["gm2_s"] = p.gm2_s;
            sj["rds2_ohm"] = p.rds2_ohm;
        }
        nlohmann::json noise = nlohmann::json::object();
        if (p.noise.white_a2) noise["white_a2"] = *p.noise.white_a2;
        if (p.noise.flicker_corner_hz) noise["flicker_corner_hz"] = *p.noise.flicker_corner_hz;
        if (p.noise.flicker_order != 3) noise["flicker_order"] = p.noise.flicker_order;
        if (!noise.empty()) sj["noise"] = noise;
        sj["input_tap"] = st.input_tap ? nlohmann::json{{"block", st.input_tap->block}, {"tap", st.input_tap->tap}}
                                       : nlohmann::json(nullptr);
        j["stages"].push_back(std::move(sj));
    }
    j["blocks"] = nlohmann::json::array();
    for (const auto& b : nl.blocks) {
        nlohmann::json bj{{"id", b.id}, {"node", b.node ? nlohmann::json(*b.node) : nlohmann::json(nullptr)}};
        bj["zo"] = rational_json(b.zo);
        bj["taps"] = nlohmann::json::object();
        for (const auto& [name, z] : b.taps) bj["taps"][name] = rational_json(z);
        j["blocks"].push_back(std::move(bj));
    }
    return j;
}

inline Netlist load_netlist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
    return netlist_from_json(j);
}

}  // namespace ldimrec::amp
