// ldimrec: compile -> simulate -> reconstruct -> diagnose.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ldimrec/ldimrec.hpp"

using namespace ldimrec;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
}

json parse_json(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

bool looks_like_json(const std::string& text) {
    const auto pos = text.find_first_not_of(" \t\r\n");
    return pos != std::string::npos && text[pos] == '{';
}

Ldim load_model(const std::string& path) { return ldim_from_json(parse_json(path)); }

graph::DirectedGraph to_directed(const graph::MixedGraph& g, const std::string& what) {
    if (!g.undirected_edges().empty()) throw Error(ErrorCode::InvalidGraph, what + " must contain only directed edges");
    return graph::DirectedGraph(g.labels(), g.directed_edges());
}

/// Reference graph from a DOT file, a netlist or a compiled model.
graph::DirectedGraph load_reference(const std::string& path) {
    const std::string text = read_file(path);
    if (!looks_like_json(text)) return to_directed(graph::parse_dot(text), "reference graph");
    const json j = parse_json(path);
    const std::string schema = j.value("schema", "");
    if (schema == amp::kNetlistSchema) return amp::generative_graph_of_netlist(amp::netlist_from_json(j));
    if (schema == kLdimSchema) return generative_graph(ldim_from_json(j));
    throw Error(ErrorCode::ParseError, path + ": expected a DOT graph, a netlist or an LDIM model");
}

/// Observed graph from a reconstruction log or a DOT file.
graph::MixedGraph load_observed(const std::string& path) {
    const std::string text = read_file(path);
    if (!looks_like_json(text)) return graph::parse_dot(text);
    return pc::reconstruction_from_json(parse_json(path)).graph;
}

std::pair<double, double> parse_band(const std::string& s) {
    const auto colon = s.find(':');
    try {
        if (colon == std::string::npos) throw std::invalid_argument(s);
        std::size_t used = 0;
        const double lo = std::stod(s.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument(s);
        const std::string rest = s.substr(colon + 1);
        const double hi = std::stod(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(s);
        if (!(lo > 0.0 && lo < hi && hi <= 1.0)) throw std::invalid_argument(s);
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::InvalidParams, "--band expects lo:hi as fractions of Nyquist with 0 < lo < hi <= 1, got '" + s + "'");
    }
}

std::vector<std::string> split_labels(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

amp::Netlist builtin_scenario(const std::string& name) {
    if (name == "chain3") return scenarios::chain3();
    if (name == "grid9") return scenarios::grid9();
    if (name == "cascode5") return scenarios::cascode_chain5();
    if (name == "cascode5-open") return scenarios::cascode_chain5_open();
    throw Error(ErrorCode::InvalidParams, "unknown scenario '" + name + "' (chain3, grid9, cascode5, cascode5-open)");
}

void print_error(const std::string& code, const std::string& message) {
    std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wiener-separation network reconstruction for amplifier circuits"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ldimrec 0.1.0");

    // scenario
    std::string scenario_name, scenario_out = "-";
    auto* scenario = app.add_subcommand("scenario", "write a built-in netlist as JSON");
    scenario->add_option("name", scenario_name, "chain3 | grid9 | cascode5 | cascode5-open")->required();
    scenario->add_option("-o,--out", scenario_out, "output path ('-' for stdout)");

    // compile
    std::string netlist_path, model_out = "-";
    auto* compile = app.add_subcommand("compile", "compile a netlist into an LDIM model");
    compile->add_option("netlist", netlist_path, "netlist JSON (ldim_netlist_v1)")->required();
    compile->add_option("-o,--out", model_out, "output path ('-' for stdout)");

    // simulate
    std::string model_path, csv_out;
    std::size_t samples = 500'000;
    std::uint64_t seed = 1;
    std::optional<std::size_t> burn_in;
    unsigned threads = 1;
    auto* sim = app.add_subcommand("simulate", "simulate an LDIM model driven by its noise sources");
    sim->add_option("model", model_path, "LDIM model JSON")->required();
    sim->add_option("-o,--out", csv_out, "output CSV")->required();
    sim->add_option("--samples", samples, "number of samples")->check(CLI::PositiveNumber);
    sim->add_option("--seed", seed, "random seed");
    sim->add_option("--burn-in", burn_in, "discarded leading samples (default: from impulse lengths)");
    sim->add_option("--threads", threads, "worker threads (results do not depend on it)")->check(CLI::Range(1u, 256u));

    // reconstruct
    std::string data_path, dot_out = "-", log_out, psd_out, band = "0.05:0.6", window = "hann", keep;
    pc::PcConfig cfg;
    std::optional<std::size_t> max_cond;
    auto* rec = app.add_subcommand("reconstruct", "reconstruct the generative graph from time series");
    rec->add_option("data", data_path, "time-series CSV with '# fs_hz=' header")->required();
    rec->add_option("--dot", dot_out, "DOT output path ('-' for stdout)");
    rec->add_option("--log", log_out, "JSON log with queries, sepsets and warnings");
    rec->add_option("--psd", psd_out, "optional CSV dump of the cross-spectral matrix");
    rec->add_option("--keep", keep, "comma-separated channels to use (default: all)");
    rec->add_option("--rho", cfg.wsep.rho, "separation threshold")->check(CLI::PositiveNumber);
    rec->add_option("--band", band, "averaging band lo:hi as fractions of Nyquist");
    rec->add_option("--segment", cfg.welch.segment, "Welch segment length (power of two)");
    rec->add_option("--overlap", cfg.welch.overlap, "Welch overlap fraction in [0, 1)");
    rec->add_option("--window", window, "hann | hamming | rect");
    rec->add_option("--ridge", cfg.wsep.ridge, "relative ridge for the Wiener solves");
    rec->add_option("--max-cond", max_cond, "largest conditioning set (default n - 2)");
    rec->add_flag("--meek", cfg.meek, "full Meek closure instead of the two basic orientation rules");
    rec->add_option("--threads", cfg.threads, "worker threads (results do not depend on it)")->check(CLI::Range(1u, 256u));

    // diagnose
    std::string reference_path, observed_path, report_out, mode = "skeleton";
    auto* diag = app.add_subcommand("diagnose", "compare a reconstruction against a reference circuit");
    diag->add_option("reference", reference_path, "reference DOT, netlist JSON or LDIM model JSON")->required();
    diag->add_option("observed", observed_path, "reconstruction JSON log or DOT")->required();
    diag->add_option("--mode", mode, "skeleton | directed");
    diag->add_option("--json", report_out, "write the JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("UsageError", e.what());
        return 64;
    }

    try {
        if (*scenario) {
            write_file(scenario_out, amp::to_json(builtin_scenario(scenario_name)).dump(2) + "\n");
        } else if (*compile) {
            const auto nl = amp::netlist_from_json(parse_json(netlist_path));
            write_file(model_out, to_json(amp::compile(nl)).dump(2) + "\n");
        } else if (*sim) {
            const auto ts = simulate(load_model(model_path), samples, seed, burn_in, threads);
            std::ostringstream os;
            write_csv(os, ts);
            write_file(csv_out, os.str());
        } else if (*rec) {
            const auto [lo, hi] = parse_band(band);
            cfg.wsep.band_lo = lo * std::numbers::pi;
            cfg.wsep.band_hi = hi * std::numbers::pi;
            cfg.welch.window = spectral::window_from_string(window);
            cfg.max_cond = max_cond;
            auto ts = load_csv(data_path);
            if (!keep.empty()) ts = ts.select(split_labels(keep));
            if (ts.channels() < 2) throw Error(ErrorCode::InvalidParams, "reconstruction needs at least two channels");
            const auto psd = spectral::welch_cross_psd(ts, cfg.welch, cfg.threads);
            const auto result = pc::reconstruct(psd, cfg);
            if (!psd_out.empty()) {
                std::ostringstream os;
                spectral::write_psd_csv(os, psd);
                write_file(psd_out, os.str());
            }
            if (!log_out.empty()) write_file(log_out, pc::to_json(result).dump(2) + "\n");
            std::ostringstream dot;
            graph::write_dot(dot, result.graph);
            write_file(dot_out, dot.str());
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
        } else if (*diag) {
            const auto report = fault::diagnose(load_reference(reference_path), load_observed(observed_path),
                                                fault::mode_from_string(mode));
            if (!report_out.empty()) write_file(report_out, fault::to_json(report).dump(2) + "\n");
            std::cout << fault::to_text(report);
        }
    } catch (const Error& e) {
        print_error(std::string(to_string(e.code())), e.what());
        return 2;
    } catch (const std::exception& e) {
        print_error("InternalError", e.what());
        return 3;
    }
    return 0;
}
