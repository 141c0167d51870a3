#pragma once

// Linear Dynamic Influence Models: Y = H Y + e with a stable transfer
// matrix H (zero diagonal) and mutually independent channel noises.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "ldimrec/error.hpp"
#include "ldimrec/filter.hpp"
#include "ldimrec/graph.hpp"
#include "ldimrec/noise.hpp"

namespace ldimrec {

using CMatrix = Eigen::MatrixXcd;

class Ldim {
public:
    Ldim() = default;

    Ldim(std::vector<std::string> labels, double fs_hz)
        : labels_(std::move(labels)),
          fs_hz_(fs_hz),
          entries_(labels_.size(), std::vector<std::optional<RationalFilter>>(labels_.size())),
          noise_(labels_.size()) {
        graph::VertexIndex check(labels_);
        if (!(fs_hz_ > 0.0)) throw Error(ErrorCode::InvalidModel, "sample rate must be positive");
    }

    std::size_t size() const { return labels_.size(); }
    const std::vector<std::string>& labels() const { return labels_; }
    double fs_hz() const { return fs_hz_; }

    std::size_t channel(const std::string& label) const {
        auto it = std::find(labels_.begin(), labels_.end(), label);
        if (it == labels_.end()) throw Error(ErrorCode::UnknownVertex, "unknown channel '" + label + "'");
        return static_cast<std::size_t>(it - labels_.begin());
    }

    /// H_{to,from}: influence of channel `from` on channel `to`.
    const std::optional<RationalFilter>& entry(std::size_t to, std::size_t from) const { return entries_.at(to).at(from); }

    void set_entry(std::size_t to, std::size_t from, std::optional<RationalFilter> f) {
        if (to == from && f) throw Error(ErrorCode::InvalidModel, "diagonal LDIM entries must be absent");
        if (f && f->is_zero()) f.reset();
        entries_.at(to).at(from) = std::move(f);
    }

    const std::vector<NoiseSpec>& noise(std::size_t ch) const { return noise_.at(ch); }
    void add_noise(std::size_t ch, NoiseSpec spec) { noise_.at(ch).push_back(std::move(spec)); }
    void set_noise(std::size_t ch, std::vector<NoiseSpec> specs) { noise_.at(ch) = std::move(specs); }

    const std::vector<std::string>& notes() const { return notes_; }
    void add_note(std::string note) { notes_.push_back(std::move(note)); }

    /// Structural checks plus acyclicity of the generative graph.
    void validate() const;

    friend bool operator==(const Ldim&, const Ldim&) = default;

private:
    std::vector<std::string> labels_;
    double fs_hz_ = 1.0;
    std::vector<std::vector<std::optional<RationalFilter>>> entries_;
    std::vector<std::vector<NoiseSpec>> noise_;
    std::vector<std::string> notes_;
};

/// Edge (j -> i) iff H_ij is present.
inline graph::DirectedGraph generative_graph(const Ldim& m) {
    graph::DirectedGraph g(m.labels());
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j)
            if (m.entry(i, j)) g.add_edge(j, i);
    return g;
}

inline void Ldim::validate() const {
    if (labels_.empty()) throw Error(ErrorCode::InvalidModel, "LDIM has no channels");
    for (std::size_t i = 0; i < size(); ++i) {
        if (entries_[i][i]) throw Error(ErrorCode::InvalidModel, "diagonal LDIM entries must be absent");
        for (std::size_t j = 0; j < size(); ++j)
            if (entries_[i][j] && !entries_[i][j]->is_stable())
                throw Error(ErrorCode::InvalidModel, "unstable transfer H(" + labels_[i] + "," + labels_[j] + ")");
        if (noise_[i].empty()) throw Error(ErrorCode::InvalidNoise, "channel '" + labels_[i] + "' has no noise source");
        for (const auto& spec : noise_[i]) ldimrec::validate(spec, fs_hz_);
    }
    if (!generative_graph(*this).is_acyclic()) throw Error(ErrorCode::CyclicModel, "generative graph has a cycle");
}

/// Precomputed per-channel noise spectral evaluator (flicker filters designed once).
class NoiseSpectrum {
public:
    explicit NoiseSpectrum(const Ldim& m) : fs_(m.fs_hz()), specs_(m.size()) {
        for (std::size_t c = 0; c < m.size(); ++c)
            for (const auto& s : m.noise(c))
                specs_[c].push_back({s, s.flicker ? std::optional(design_flicker_filter(*s.flicker, fs_)) : std::nullopt});
    }

    double channel_psd(std::size_t c, double omega) const {
        double total = 0.0;
        for (const auto& [spec, flicker] : specs_[c]) {
            double level = 1.0;
            if (flicker) level += std::norm(frequency_response(*flicker, omega));
            total += spec.white_variance * level * std::norm(frequency_response(spec.shaping, omega));
        }
        return total;
    }

private:
    struct Source {
        NoiseSpec spec;
        std::optional<FilterCascade> flicker;
    };
    double fs_;
    std::vector<std::vector<Source>> specs_;
};

inline CMatrix transfer_matrix(const Ldim& m, double omega) {
    const auto n = static_cast<Eigen::Index>(m.size());
    CMatrix h = CMatrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (const auto& f = m.entry(static_cast<std::size_t>(i), static_cast<std::size_t>(j)))
                h(i, j) = frequency_response(*f, omega);
    return h;
}

/// S(w) = (I - H)^-1 diag(noise psd) (I - H)^-H, entries S_ij = E[Y_i conj(Y_j)].
inline CMatrix analytic_output_psd(const Ldim& m, const NoiseSpectrum& noise, double omega) {
    const auto n = static_cast<Eigen::Index>(m.size());
    const CMatrix a = CMatrix::Identity(n, n) - transfer_matrix(m, omega);
    Eigen::JacobiSVD<CMatrix> svd(a);
    const auto& sv = svd.singularValues();
    if (sv(n - 1) <= 0.0 || sv(0) / sv(n - 1) > 1e12)
        throw Error(ErrorCode::NumericalSingularity, "(I - H) is ill-conditioned");
    const CMatrix t = a.partialPivLu().inverse();
    Eigen::VectorXd lambda(n);
    for (Eigen::Index c = 0; c < n; ++c) lambda(c) = noise.channel_psd(static_cast<std::size_t>(c), omega);
    CMatrix s = t * lambda.asDiagonal() * t.adjoint();
    s = 0.5 * (s + s.adjoint()).eval();
    return s;
}

inline CMatrix analytic_output_psd(const Ldim& m, double omega) {
    return analytic_output_psd(m, NoiseSpectrum(m), omega);
}

/// Diagonal noise spectral matrix; off-diagonal entries are zero by construction.
inline CMatrix analytic_noise_psd(const Ldim& m, const NoiseSpectrum& noise, double omega) {
    const auto n = static_cast<Eigen::Index>(m.size());
    CMatrix s = CMatrix::Zero(n, n);
    for (Eigen::Index c = 0; c < n; ++c) s(c, c) = noise.channel_psd(static_cast<std::size_t>(c), omega);
    return s;
}

/// Remove a channel whose influence reaches the rest of the network through
/// at most one child: its parents feed the child through H_cv*H_vp and its
/// noise is folded into the child's noise, so the result is again an LDIM.
inline Ldim marginalize(const Ldim& m, const std::string& label) {
    const std::size_t v = m.channel(label);
    std::vector<std::size_t> children;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m.entry(i, v)) children.push_back(i);
    if (children.size() > 1)
        throw Error(ErrorCode::InvalidModel,
                    "channel '" + label + "' has several children; its noise would correlate the remaining channels");

    std::vector<std::string> kept;
    std::vector<std::size_t> map;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (i != v) {
            kept.push_back(m.labels()[i]);
            map.push_back(i);
        }
    Ldim out(kept, m.fs_hz());
    for (const auto& note : m.notes()) out.add_note(note);
    for (std::size_t a = 0; a < map.size(); ++a) {
        for (std::size_t b = 0; b < map.size(); ++b)
            if (const auto& f = m.entry(map[a], map[b])) out.set_entry(a, b, *f);
        out.set_noise(a, m.noise(map[a]));
    }
    if (!children.empty()) {
        const std::size_t c = children.front();
        const std::size_t c_new = c > v ? c - 1 : c;
        const RationalFilter& through = *m.entry(c, v);
        for (std::size_t p = 0; p < m.size(); ++p) {
            if (!m.entry(v, p)) continue;
            const std::size_t p_new = p > v ? p - 1 : p;
            RationalFilter composed = through * *m.entry(v, p);
            if (const auto& direct = out.entry(c_new, p_new)) composed = *direct + composed;
            out.set_entry(c_new, p_new, composed);
        }
        for (auto spec : m.noise(v)) {
            spec.shaping = through * spec.shaping;
            out.add_noise(c_new, std::move(spec));
        }
    }
    out.add_note("marginalized channel " + label);
    return out;
}

// --- time series ------------------------------------------------------------

struct TimeSeriesSet {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> data;  // one vector per channel
    double fs_hz = 1.0;

    std::size_t channels() const { return labels.size(); }
    std::size_t length() const { return data.empty() ? 0 : data.front().size(); }

    std::size_t channel(const std::string& label) const {
        auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end()) throw Error(ErrorCode::UnknownVertex, "unknown channel '" + label + "'");
        return static_cast<std::size_t>(it - labels.begin());
    }

    void validate() const {
        graph::VertexIndex check(labels);
        if (labels.size() != data.size()) throw Error(ErrorCode::InvalidParams, "label/data channel count mismatch");
        if (data.empty() || data.front().empty()) throw Error(ErrorCode::InsufficientData, "time series is empty");
        for (const auto& ch : data) {
            if (ch.size() != data.front().size()) throw Error(ErrorCode::InvalidParams, "channels differ in length");
            for (double v : ch)
                if (!std::isfinite(v)) throw Error(ErrorCode::InvalidParams, "non-finite sample");
        }
        if (!(fs_hz > 0.0)) throw Error(ErrorCode::InvalidParams, "sample rate must be positive");
    }

    /// Keep only the named channels, in the given order.
    TimeSeriesSet select(const std::vector<std::string>& keep) const {
        TimeSeriesSet out;
        out.fs_hz = fs_hz;
        for (const auto& label : keep) {
            out.labels.push_back(label);
            out.data.push_back(data[channel(label)]);
        }
        return out;
    }

    friend bool operator==(const TimeSeriesSet&, const TimeSeriesSet&) = default;
};

/// Default transient allowance: 4x the longest 99%-energy impulse length.
inline std::size_t default_burn_in(const Ldim& m) {
    std::size_t longest = 1;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j)
            if (const auto& f = m.entry(i, j)) longest = std::max(longest, f->energy_length());
        for (const auto& s : m.noise(i)) {
            longest = std::max(longest, s.shaping.energy_length());
            if (s.flicker) longest = std::max(longest, design_flicker_filter(*s.flicker, m.fs_hz()).energy_length());
        }
    }
    return 4 * longest;
}

namespace detail {

/// Independent Gaussian stream keyed by (seed, channel, source, part).
inline std::vector<double> gaussian_stream(std::uint64_t seed, std::size_t channel, std::size_t source, unsigned part,
                                           std::size_t n, double stddev) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(channel), static_cast<std::uint32_t>(source), part};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, stddev);
    std::vector<double> out(n);
    for (double& v : out) v = normal(rng);
    return out;
}

inline std::vector<double> channel_noise(const Ldim& m, std::size_t c, std::uint64_t seed, std::size_t n) {
    std::vector<double> total(n, 0.0);
    const auto& specs = m.noise(c);
    for (std::size_t s = 0; s < specs.size(); ++s) {
        const double sd = std::sqrt(specs[s].white_variance);
        auto drive = gaussian_stream(seed, c, s, 0, n, sd);
        if (specs[s].flicker) {
            const auto pink = design_flicker_filter(*specs[s].flicker, m.fs_hz()).apply(gaussian_stream(seed, c, s, 1, n, sd));
            for (std::size_t t = 0; t < n; ++t) drive[t] += pink[t];
        }
        const auto shaped = specs[s].shaping.apply(drive);
        for (std::size_t t = 0; t < n; ++t) total[t] += shaped[t];
    }
    return total;
}

}  // namespace detail

/// Noise-driven simulation in topological order. Per-channel noise synthesis
/// may run on up to `threads` workers; the output does not depend on it.
inline TimeSeriesSet simulate(const Ldim& m, std::size_t n_samples, std::uint64_t seed,
                              std::optional<std::size_t> burn_in = std::nullopt, unsigned threads = 1) {
    m.validate();
    if (n_samples == 0) throw Error(ErrorCode::InvalidParams, "sample count must be at least 1");
    const auto order = *generative_graph(m).topological_order();
    const std::size_t burn = burn_in.value_or(default_burn_in(m));
    const std::size_t total = n_samples + burn;

    std::vector<std::vector<double>> series(m.size());
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(m.size())));
    if (threads == 1) {
        for (std::size_t c = 0; c < m.size(); ++c) series[c] = detail::channel_noise(m, c, seed, total);
    } else {
        std::vector<std::thread> workers;
        for (unsigned w = 0; w < threads; ++w)
            workers.emplace_back([&, w] {
                for (std::size_t c = w; c < m.size(); c += threads) series[c] = detail::channel_noise(m, c, seed, total);
            });
        for (auto& t : workers) t.join();
    }

    for (std::size_t v : order) {
        for (std::size_t p = 0; p < m.size(); ++p) {
            const auto& f = m.entry(v, p);
            if (!f) continue;
            const auto contribution = f->apply(series[p]);
            for (std::size_t t = 0; t < total; ++t) series[v][t] += contribution[t];
        }
    }

    TimeSeriesSet out;
    out.labels = m.labels();
    out.fs_hz = m.fs_hz();
    for (auto& ch : series) out.data.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(burn), ch.end());
    return out;
}

// --- serialization ----------------------------------------------------------

inline constexpr const char* kLdimSchema = "ldim_model_v1";

namespace detail {

inline nlohmann::json filter_json(const RationalFilter& f) { return {{"num", f.num()}, {"den", f.den()}}; }

inline RationalFilter filter_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("num") || !j.contains("den"))
        throw Error(ErrorCode::ParseError, where + ": expected {num, den}");
    try {
        return RationalFilter(j.at("num").get<std::vector<double>>(), j.at("den").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
}

}  // namespace detail

inline nlohmann::json to_json(const Ldim& m) {
    nlohmann::json j;
    j["schema"] = kLdimSchema;
    j["fs_hz"] = m.fs_hz();
    j["channels"] = m.labels();
    j["entries"] = nlohmann::json::array();
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t k = 0; k < m.size(); ++k)
            if (const auto& f = m.entry(i, k)) {
                auto e = detail::filter_json(*f);
                e["to"] = m.labels()[i];
                e["from"] = m.labels()[k];
                j["entries"].push_back(std::move(e));
            }
    j["noise"] = nlohmann::json::array();
    for (std::size_t c = 0; c < m.size(); ++c) {
        auto arr = nlohmann::json::array();
        for (const auto& s : m.noise(c)) {
            nlohmann::json sj{{"white_variance", s.white_variance}, {"shaping", detail::filter_json(s.shaping)}};
            if (s.flicker) sj["flicker"] = {{"corner_hz", s.flicker->corner_hz}, {"order", s.flicker->order}};
            arr.push_back(std::move(sj));
        }
        j["noise"].push_back(std::move(arr));
    }
    j["notes"] = m.notes();
    return j;
}

inline Ldim ldim_from_json(const nlohmann::json& j) {
    try {
        if (j.value("schema", std::string{}) != kLdimSchema)
            throw Error(ErrorCode::ParseError, std::string("field 'schema': expected \"") + kLdimSchema + "\"");
        Ldim m(j.at("channels").get<std::vector<std::string>>(), j.at("fs_hz").get<double>());
        for (std::size_t k = 0; k < j.at("entries").size(); ++k) {
            const auto& e = j["entries"][k];
            const std::string where = "entries[" + std::to_string(k) + "]";
            m.set_entry(m.channel(e.at("to").get<std::string>()), m.channel(e.at("from").get<std::string>()),
                        detail::filter_from_json(e, where));
        }
        const auto& noise = j.at("noise");
        if (noise.size() != m.size()) throw Error(ErrorCode::ParseError, "field 'noise': one array per channel expected");
        for (std::size_t c = 0; c < m.size(); ++c)
            for (std::size_t s = 0; s < noise[c].size(); ++s) {
                const auto& sj = noise[c][s];
                const std::string where = "noise[" + std::to_string(c) + "][" + std::to_string(s) + "]";
                NoiseSpec spec;
                spec.white_variance = sj.at("white_variance").get<double>();
                if (sj.contains("shaping")) spec.shaping = detail::filter_from_json(sj["shaping"], where + ".shaping");
                if (sj.contains("flicker") && !sj["flicker"].is_null())
                    spec.flicker = FlickerSpec{sj["flicker"].at("corner_hz").get<double>(), sj["flicker"].value("order", 3)};
                m.add_noise(c, std::move(spec));
            }
        if (j.contains("notes"))
            for (const auto& note : j["notes"]) m.add_note(note.get<std::string>());
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("LDIM JSON: ") + e.what());
    }
}

/// CSV layout: `# fs_hz=<value>`, a header of channel labels, then one row
/// per sample with 17 significant digits.
inline void write_csv(std::ostream& os, const TimeSeriesSet& ts) {
    ts.validate();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", ts.fs_hz);
    os << "# fs_hz=" << buf << "\n";
    for (std::size_t c = 0; c < ts.channels(); ++c) os << (c ? "," : "") << ts.labels[c];
    os << "\n";
    std::string row;
    for (std::size_t t = 0; t < ts.length(); ++t) {
        row.clear();
        for (std::size_t c = 0; c < ts.channels(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", ts.data[c][t]);
            if (c) row += ',';
            row += buf;
        }
        row += '\n';
        os << row;
    }
}

inline TimeSeriesSet read_csv(std::istream& is) {
    TimeSeriesSet ts;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# fs_hz=", 0) != 0)
        throw Error(ErrorCode::ParseError, "CSV line 1: expected '# fs_hz=<value>'");
    try {
        std::size_t used = 0;
        ts.fs_hz = std::stod(line.substr(8), &used);
    } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "CSV line 1: invalid sample rate");
    }
    if (!std::getline(is, line)) throw Error(ErrorCode::ParseError, "CSV line 2: missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) ts.labels.push_back(cell);
    }
    ts.data.assign(ts.labels.size(), {});
    std::size_t lineno = 2;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const char* p = line.c_str();
        for (std::size_t c = 0; c < ts.labels.size(); ++c) {
            char* end = nullptr;
            const double v = std::strtod(p, &end);
            if (end == p) throw Error(ErrorCode::ParseError, "CSV line " + std::to_string(lineno) + ": bad number");
            ts.data[c].push_back(v);
            p = end;
            if (c + 1 < ts.labels.size()) {
                if (*p != ',')
                    throw Error(ErrorCode::ParseError, "CSV line " + std::to_string(lineno) + ": expected " +
                                                           std::to_string(ts.labels.size()) + " columns");
                ++p;
            }
        }
        if (*p != '\0' && *p != '\r')
            throw Error(ErrorCode::ParseError, "CSV line " + std::to_string(lineno) + ": trailing data");
    }
    ts.validate();
    return ts;
}

inline TimeSeriesSet load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    return read_csv(in);
}

inline void save_csv(const std::string& path, const TimeSeriesSet& ts) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
    write_csv(out, ts);
}

}  // namespace ldimrec
