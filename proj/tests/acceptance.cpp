// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "faithfulness.hpp"
#include "ldimrec/ldimrec.hpp"
#include "support.hpp"

using namespace ldimrec;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned thresholds.
constexpr std::size_t kExactDags = 100;
constexpr double kExactMaxSeconds = 10.0;
constexpr std::size_t kNetlists = 20;
constexpr double kAnalyticRho = 1e-6;
constexpr std::size_t kSeeds = 10;
constexpr std::size_t kChainSamples = 500'000;
constexpr std::size_t kChainRequired = 9;
constexpr double kChainMaxSecondsPerSeed = 60.0;
constexpr std::size_t kGridSamples = 850'000;
constexpr std::size_t kGridRequired = 8;
constexpr double kGridMinMeanF = 0.95;
constexpr std::size_t kMarginalRequired = 8;
constexpr std::size_t kFaultSamples = 480'000;
constexpr double kFaultRho = 0.064;
constexpr double kFlatness = 0.05;
constexpr double kGapMax = 0.02;
constexpr std::size_t kGapSamples = 1u << 20;
constexpr double kGainRelTol = 1e-9;
constexpr double kPrewarpTol = 1e-9;
constexpr double kHermitianTol = 1e-10;

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
    std::printf("criterion %d: %s  %s  [%s]\n", id, ok ? "PASS" : "FAIL", what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::set<graph::Pair> pairs_of(const graph::DirectedGraph& g) { return testsupport::skeleton_pairs(g); }

double f_score(const std::set<graph::Pair>& got, const std::set<graph::Pair>& want) {
    std::size_t tp = 0;
    for (const auto& p : got) tp += want.contains(p);
    if (got.empty() && want.empty()) return 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(got.size() + want.size());
}

struct SeedRun {
    std::set<graph::Pair> skeleton;
    double seconds;
    pc::ReconstructionResult result;
};

SeedRun run_seed(const Ldim& model, std::size_t samples, std::uint64_t seed, double rho,
                 const std::vector<std::string>& keep = {}) {
    const auto t0 = Clock::now();
    auto ts = simulate(model, samples, seed);
    if (!keep.empty()) ts = ts.select(keep);
    pc::PcConfig cfg;
    cfg.wsep.rho = rho;
    auto r = pc::reconstruct(ts, cfg);
    return {r.graph.skeleton_pairs(), seconds_since(t0), std::move(r)};
}

void criterion1() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> size(2, 6);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < kExactDags; ++i) {
        const auto g = testsupport::random_dag(size(rng), 0.3, rng);
        const auto cpdag = testsupport::cpdag_by_enumeration(g);
        pc::PcConfig cfg;
        const auto r = pc::reconstruct(pc::DSeparationOracle(g), cfg);
        cfg.meek = true;
        const auto full = pc::reconstruct(pc::DSeparationOracle(g), cfg);
        const bool skeleton = r.graph.skeleton_pairs() == pairs_of(g) && cpdag.skeleton_pairs() == pairs_of(g);
        const bool vs = graph::v_structures(r.graph) == graph::v_structures(g) &&
                        graph::v_structures(cpdag) == graph::v_structures(g);
        ok += skeleton && vs && full.graph == cpdag;
    }
    const double secs = seconds_since(t0);
    report(1, ok == kExactDags && secs < kExactMaxSeconds, "exact-oracle PC vs Markov-equivalence enumeration",
           fmt("%zu/%zu DAGs, %.2f s", ok, kExactDags, secs));
}

void criterion2() {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> size(2, 5);
    std::size_t disagreements = 0, triples = 0, rerolls = 0;
    double max_sep = 0.0, min_conn = 1e300;
    for (std::size_t i = 0; i < kNetlists; ++i) {
        const auto g = scenarios::random_dag(size(rng), 0.5, rng);
        const auto d = testsupport::faithful_draw(g, rng, kAnalyticRho);
        disagreements += d.sweep.disagreements;
        triples += d.sweep.triples;
        rerolls += d.rerolls;
        max_sep = std::max(max_sep, d.sweep.max_separated);
        min_conn = std::min(min_conn, d.sweep.min_connected);
    }
    report(2, disagreements == 0, "analytic wsep <=> dsep, rho = 1e-6",
           fmt("%zu disagreements over %zu triples, %zu rerolls, max separated stat %.2e, min connected stat %.3g",
               disagreements, triples, rerolls, max_sep, min_conn));
}

void criterion3() {
    const auto nl = scenarios::chain3();
    const auto model = amp::compile(nl);
    const auto want = pairs_of(amp::generative_graph_of_netlist(nl));
    std::size_t ok = 0;
    double slowest = 0.0;
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
        const auto r = run_seed(model, kChainSamples, seed, 0.05);
        ok += r.skeleton == want;
        slowest = std::max(slowest, r.seconds);
    }
    report(3, ok >= kChainRequired && slowest < kChainMaxSecondsPerSeed, "3-stage chain skeleton, 500k samples",
           fmt("%zu/%zu exact, slowest seed %.2f s", ok, kSeeds, slowest));
}

void criterion4() {
    const auto nl = scenarios::grid9();
    const auto model = amp::compile(nl);
    const auto want = pairs_of(scenarios::grid9_graph());
    std::size_t ok = 0;
    double fsum = 0.0;
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
        const auto r = run_seed(model, kGridSamples, seed, 0.05);
        ok += r.skeleton == want;
        fsum += f_score(r.skeleton, want);
    }
    const double mean_f = fsum / static_cast<double>(kSeeds);
    report(4, ok >= kGridRequired && mean_f >= kGridMinMeanF, "9-node mesh skeleton, 850k samples",
           fmt("%zu/%zu exact, mean F %.4f", ok, kSeeds, mean_f));
}

void criterion5() {
    const auto model = amp::compile(scenarios::grid9());
    const auto want_graph = scenarios::grid9_marginal_graph();
    // The hand-written marginal graph must agree with LDIM marginalization.
    const auto marginal = marginalize(marginalize(model, "3"), "7");
    const bool structure = generative_graph(marginal) == want_graph;
    const auto want = pairs_of(want_graph);
    std::size_t ok = 0;
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed)
        ok += run_seed(model, kGridSamples, seed, 0.05, want_graph.labels()).skeleton == want;
    report(5, structure && ok >= kMarginalRequired, "mesh with channels 3 and 7 unobserved",
           fmt("%zu/%zu exact, marginal structure %s", ok, kSeeds, structure ? "matches" : "differs"));
}

void criterion6() {
    const auto reference = amp::generative_graph_of_netlist(scenarios::cascode_chain5());
    const auto model = amp::compile(scenarios::cascode_chain5_open());
    const std::set<graph::Pair> expected_missing{{3, 4}};
    std::size_t ok = 0;
    for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
        const auto r = run_seed(model, kFaultSamples, seed, kFaultRho);
        const auto rep = fault::diagnose(reference, r.result.graph, fault::Mode::Skeleton);
        ok += rep.missing == expected_missing && rep.extra.empty() && rep.verdict == fault::Verdict::FaultSuspected;
    }
    report(6, ok == kSeeds, "open 4 -> 5 tap in 5-stage cascode chain, rho = 0.064", fmt("%zu/%zu exact reports", ok, kSeeds));
}

void criterion7() {
    std::vector<std::string> notes;
    bool pass = true;

    // White-noise flatness, per bin away from DC and Nyquist.
    {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> g;
        TimeSeriesSet ts;
        ts.labels = {"w"};
        ts.data.assign(1, std::vector<double>(kGapSamples));
        for (auto& v : ts.data[0]) v = g(rng);
        const auto s = spectral::welch_cross_psd(ts, spectral::WelchParams{});
        double worst = 0.0;
        for (std::size_t k = 2; k + 1 < s.size(); ++k) worst = std::max(worst, std::abs(s.bins[k](0, 0).real() - 1.0));
        pass &= worst <= kFlatness;
        notes.push_back(fmt("flatness %.4f", worst));
    }

    // Estimated vs analytic statistics on the compiled chain.
    double hermitian = 0.0;
    {
        const auto model = amp::compile(scenarios::chain3());
        const spectral::WelchParams welch;
        const auto exact = spectral::analytic_spectral_matrix(model, spectral::welch_grid(welch.segment));
        hermitian = std::max(hermitian, exact.max_hermitian_defect() / exact.bins[1].diagonal().real().maxCoeff());
        const spectral::WsepConfig cfg;
        double gap = 0.0;
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const auto est = spectral::welch_cross_psd(simulate(model, kGapSamples, seed), welch);
            hermitian = std::max(hermitian, est.max_hermitian_defect() / est.bins[1].diagonal().real().maxCoeff());
            for (graph::Vertex x = 0; x < 3; ++x)
                for (graph::Vertex y = 0; y < 3; ++y) {
                    if (x == y) continue;
                    for (const auto& z : testsupport::subsets_without(3, x, y))
                        gap = std::max(gap, std::abs(spectral::wsep(est, x, y, z, cfg).statistic -
                                                     spectral::wsep(exact, x, y, z, cfg).statistic));
                }
        }
        pass &= gap < kGapMax;
        notes.push_back(fmt("stat gap %.4f", gap));
    }

    // Single common-source stage: -gm (Z_o || r_ds).
    {
        amp::Netlist nl;
        nl.fs_hz = 1e6;
        nl.nodes = {"in", "out"};
        const double gm = 1.3e-3, rds = 40e3, rd = 2.2e3, cd = 330e-12;
        const auto zo = amp::bypassed_resistor(rd, cd);
        nl.blocks = {{"SRC", std::nullopt, 0.0, {{"g", 1.0}}}, {"Bin", "in", 1e3, {{"t", 1.0}}}, {"Bout", "out", zo, {}}};
        amp::StageParams root, stage;
        root.id = "M0";
        stage.id = "M1";
        stage.gm_s = gm;
        stage.rds_ohm = rds;
        nl.stages = {{root, "in", amp::TapRef{"SRC", "g"}}, {stage, "out", amp::TapRef{"Bin", "t"}}};
        const auto model = amp::node_voltage_model("out", nl);
        double worst = 0.0;
        for (int i = 0; i < 50; ++i) {
            const double hz = i == 0 ? 0.0 : 10.0 * std::pow(4.9e5 / 10.0, (i - 1) / 48.0);  // DC, then 10 Hz .. 490 kHz
            const cplx z = zo.at_frequency_hz(hz);
            const cplx expected = -gm * (z * rds) / (z + rds);
            worst = std::max(worst, std::abs(model.gain.at("M1").at_frequency_hz(hz) - expected) / std::abs(expected));
        }
        const auto compiled = amp::compile(nl);
        const double dc = std::real(frequency_response(*compiled.entry(1, 0), 0.0));
        const double dc_expected = -gm * rd * rds / (rd + rds);
        worst = std::max(worst, std::abs(dc - dc_expected) / std::abs(dc_expected));
        pass &= worst <= kGainRelTol;
        notes.push_back(fmt("CS gain rel err %.1e", worst));
    }

    // Bilinear prewarp: the discrete response at the prewarp frequency equals
    // the continuous one there.
    {
        const double fs = 1e6;
        double worst = 0.0;
        for (double fp : {1e3, 50e3, 200e3, 400e3}) {
            const double wp = 2.0 * std::numbers::pi * fp;
            const amp::ContinuousRational lp({wp * wp}, {wp * wp, 0.7 * wp, 1.0});
            const cplx d = frequency_response(amp::bilinear(lp, fs, fp), wp / fs);
            const cplx c = lp.eval(cplx(0.0, wp));
            worst = std::max(worst, std::abs(d - c) / std::abs(c));
        }
        pass &= worst <= kPrewarpTol;
        notes.push_back(fmt("prewarp rel err %.1e", worst));
    }

    pass &= hermitian <= kHermitianTol;
    notes.push_back(fmt("hermitian defect %.1e", hermitian));

    std::string joined;
    for (const auto& n : notes) joined += (joined.empty() ? "" : ", ") + n;
    report(7, pass, "numerical spectral suite", joined);
}

std::string pipeline_bytes(unsigned threads) {
    const auto nl = scenarios::chain3();
    const auto model = amp::compile(nl);
    const auto ts = simulate(model, 200'000, 2024, std::nullopt, threads);
    pc::PcConfig cfg;
    cfg.threads = threads;
    const auto r = pc::reconstruct(ts, cfg);
    std::ostringstream os;
    os << to_json(model).dump() << "\n";
    write_csv(os, ts);
    graph::write_dot(os, r.graph);
    os << pc::to_json(r).dump() << "\n";
    return os.str();
}

void criterion8() {
    const auto a = pipeline_bytes(1), b = pipeline_bytes(1), c = pipeline_bytes(4);
    report(8, a == b && a == c, "byte-identical compile -> simulate -> reconstruct on the chain",
           fmt("%zu bytes, repeat %s, 4 threads %s", a.size(), a == b ? "identical" : "DIFFERS", a == c ? "identical" : "DIFFERS"));
}

}  // namespace

int main() {
    const std::vector<std::function<void()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                      criterion5, criterion6, criterion7, criterion8};
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        try {
            criteria[i]();
        } catch (const std::exception& e) {
            report(static_cast<int>(i + 1), false, "raised", e.what());
        }
    }
    std::printf("%s: %d of %zu criteria failed\n", failures ? "FAIL" : "PASS", failures, criteria.size());
    return failures ? 1 : 0;
}
