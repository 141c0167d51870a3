#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "ldimrec/amp.hpp"
#include "ldimrec/scenarios.hpp"
#include "ldimrec/spectral.hpp"

using namespace ldimrec;
using namespace ldimrec::spectral;

namespace {

TimeSeriesSet white(std::size_t channels, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    TimeSeriesSet ts;
    ts.fs_hz = 1.0;
    for (std::size_t c = 0; c < channels; ++c) {
        ts.labels.push_back("w" + std::to_string(c));
        std::vector<double> x(n);
        for (auto& v : x) v = g(rng);
        ts.data.push_back(std::move(x));
    }
    return ts;
}

Ldim chain_model() {
    Ldim m({"1", "2", "3"}, 1.0);
    m.set_entry(1, 0, RationalFilter({0.0, 0.9}, {1.0, -0.4}));
    m.set_entry(2, 1, RationalFilter({0.7, 0.3}, {1.0}));
    for (std::size_t c = 0; c < 3; ++c) m.add_noise(c, NoiseSpec{});
    return m;
}

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::IoError;
}

}  // namespace

TEST(Welch, WhiteNoiseIsFlatPerBin) {
    const auto ts = white(1, 1u << 20, 1);
    const auto s = welch_cross_psd(ts, WelchParams{});
    ASSERT_EQ(s.size(), 129u);
    for (std::size_t k = 2; k + 1 < s.size(); ++k) EXPECT_NEAR(s.bins[k](0, 0).real(), 1.0, 0.05) << k;
}

TEST(Welch, WhiteNoiseBandMeanLongSegments) {
    const auto ts = white(1, 1u << 20, 2);
    const auto s = welch_cross_psd(ts, WelchParams{4096, 0.5, Window::Hann});
    const auto bins = band_bins(s, WsepConfig{});
    double mean = 0.0;
    for (auto k : bins) mean += s.bins[k](0, 0).real();
    mean /= static_cast<double>(bins.size());
    EXPECT_GE(mean, 0.95);
    EXPECT_LE(mean, 1.05);

    for (auto w : {Window::Hamming, Window::Rect}) {
        const auto r = welch_cross_psd(ts, WelchParams{256, 0.5, w});
        double m = 0.0;
        for (auto k : bins) m += r.bins[k * 256 / 4096](0, 0).real();
        EXPECT_NEAR(m / static_cast<double>(bins.size()), 1.0, 0.05);
    }
}

TEST(Welch, IndependentNoisesAreIncoherent) {
    const auto s = welch_cross_psd(white(2, 1u << 20, 3), WelchParams{});
    const auto bins = band_bins(s, WsepConfig{});
    double coh = 0.0;
    for (auto k : bins) {
        const auto& m = s.bins[k];
        coh += std::norm(m(0, 1)) / (m(0, 0).real() * m(1, 1).real());
    }
    EXPECT_LT(coh / static_cast<double>(bins.size()), 0.01);
}

TEST(Welch, DelayGivesLinearPhase) {
    const std::size_t delay = 3;
    auto ts = white(1, 1u << 18, 4);
    std::vector<double> y(ts.length(), 0.0);
    for (std::size_t t = delay; t < y.size(); ++t) y[t] = ts.data[0][t - delay];
    ts.labels.push_back("y");
    ts.data.push_back(std::move(y));
    const auto s = welch_cross_psd(ts, WelchParams{});

    // S_yx = E[Y conj(X)] = e^{-j w d} S_xx. Unwrap from the first bin upward
    // (consecutive bins differ by far less than pi), then fit a slope through
    // the origin over the averaging band.
    const auto bins = band_bins(s, WsepConfig{});
    std::vector<double> phase(s.size(), 0.0);
    for (std::size_t k = 1; k < s.size(); ++k) {
        const double step = std::remainder(std::arg(s.bins[k](1, 0)) - (k > 1 ? std::arg(s.bins[k - 1](1, 0)) : 0.0),
                                           2.0 * std::numbers::pi);
        phase[k] = phase[k - 1] + step;
    }
    double num = 0.0, den = 0.0;
    for (auto k : bins) {
        num += phase[k] * s.omega[k];
        den += s.omega[k] * s.omega[k];
    }
    EXPECT_NEAR(num / den, -static_cast<double>(delay), 0.01 * static_cast<double>(delay));
}

TEST(Welch, HermitianAndThreadInvariant) {
    const auto ts = simulate(chain_model(), 1u << 16, 5);
    const auto a = welch_cross_psd(ts, WelchParams{});
    EXPECT_LE(a.max_hermitian_defect(), 1e-10);
    for (unsigned t : {2u, 3u, 8u}) {
        const auto b = welch_cross_psd(ts, WelchParams{}, t);
        ASSERT_EQ(a.bins.size(), b.bins.size());
        for (std::size_t k = 0; k < a.size(); ++k) EXPECT_TRUE(a.bins[k] == b.bins[k]) << "threads " << t;
    }
}

TEST(Welch, InsufficientDataAndBadParams) {
    const auto ts = white(2, 1000, 6);
    EXPECT_EQ(code_of([&] { welch_cross_psd(ts, WelchParams{256, 0.5, Window::Hann}); }), ErrorCode::InsufficientData);
    EXPECT_EQ(code_of([&] { welch_cross_psd(ts, WelchParams{100, 0.5, Window::Hann}); }), ErrorCode::InvalidParams);
    EXPECT_EQ(code_of([&] { welch_cross_psd(ts, WelchParams{64, 1.0, Window::Hann}); }), ErrorCode::InvalidParams);
    EXPECT_EQ(code_of([&] { welch_cross_psd(ts, WelchParams{2048, 0.5, Window::Hann}); }), ErrorCode::InsufficientData);
    EXPECT_EQ(code_of([] { window_from_string("kaiser"); }), ErrorCode::InvalidParams);
    EXPECT_EQ(window_from_string("hamming"), Window::Hamming);
}

TEST(Wiener, IndependentTargetHasNoFilter) {
    const auto s = welch_cross_psd(white(2, 1u << 20, 7), WelchParams{});
    const auto w = wiener_from_psd(s, 1, {0});
    double mean = 0.0;
    const auto bins = band_bins(s, WsepConfig{});
    for (auto k : bins) mean += std::abs(w[k](0));
    EXPECT_LT(mean / static_cast<double>(bins.size()), 0.01);
}

TEST(Wiener, RecoversTransferOnAnalyticPsd) {
    Ldim m({"x", "y"}, 1.0);
    const RationalFilter h({0.3, -0.8, 0.2}, {1.0, -0.5, 0.1});
    m.set_entry(1, 0, h);
    NoiseSpec colored;
    colored.shaping = RationalFilter({1.0, 0.6}, {1.0});
    m.add_noise(0, colored);
    m.add_noise(1, NoiseSpec{0.3, std::nullopt, {}});
    const auto s = analytic_spectral_matrix(m, uniform_grid(0.01, 3.1, 200));
    const auto w = wiener_from_psd(s, 1, {0});
    for (std::size_t k = 0; k < s.size(); ++k) EXPECT_LT(std::abs(w[k](0) - frequency_response(h, s.omega[k])), 1e-10);
}

TEST(Wiener, ChainHasNoDirectComponent) {
    const auto s = analytic_spectral_matrix(chain_model(), welch_grid(256));
    const auto w = wiener_from_psd(s, 2, {0, 1});
    for (std::size_t k = 0; k < s.size(); ++k) {
        EXPECT_LT(std::abs(w[k](0)), 1e-9);
        EXPECT_LT(std::abs(w[k](1) - frequency_response(*chain_model().entry(2, 1), s.omega[k])), 1e-9);
    }
    EXPECT_LE(s.max_hermitian_defect(), 1e-10);
}

TEST(Wiener, SingularPredictors) {
    // Two identical channels: the predictor matrix is rank one.
    auto ts = white(2, 1u << 14, 8);
    ts.data[1] = ts.data[0];
    const auto s = welch_cross_psd(ts, WelchParams{});
    auto third = ts;
    third.labels.push_back("w2");
    third.data.push_back(white(1, 1u << 14, 9).data[0]);
    const auto s3 = welch_cross_psd(third, WelchParams{});
    EXPECT_EQ(code_of([&] { wiener_from_psd(s3, 2, {0, 1}); }), ErrorCode::SingularPsd);
    EXPECT_EQ(code_of([&] { wiener_from_psd(s, 1, {}); }), ErrorCode::InvalidParams);
    EXPECT_EQ(code_of([&] { wiener_from_psd(s, 1, {1}); }), ErrorCode::InvalidParams);
    EXPECT_EQ(code_of([&] { wiener_from_psd(s, 5, {0}); }), ErrorCode::UnknownVertex);
}

TEST(Wsep, ChainExamples) {
    const auto s = analytic_spectral_matrix(chain_model(), welch_grid(256));
    const WsepConfig cfg;
    EXPECT_TRUE(wsep(s, 0, 2, {1}, cfg).separated);
    EXPECT_FALSE(wsep(s, 0, 2, {}, cfg).separated);
    EXPECT_FALSE(wsep(s, 0, 1, {}, cfg).separated);
    EXPECT_FALSE(wsep(s, 1, 2, {0}, cfg).separated);
    EXPECT_LT(wsep(s, 0, 2, {1}, cfg).statistic, 1e-6);
    WsepConfig exact;
    exact.ridge = 0.0;
    EXPECT_LT(wsep(s, 0, 2, {1}, exact).statistic, 1e-9);
    EXPECT_THROW(wsep(s, 0, 0, {}, cfg), Error);
    EXPECT_THROW(wsep(s, 0, 2, {0}, cfg), Error);
    WsepConfig bad;
    bad.rho = 0.0;
    EXPECT_THROW(wsep(s, 0, 2, {}, bad), Error);
    bad = WsepConfig{};
    bad.band_lo = 2.0;
    bad.band_hi = 1.0;
    EXPECT_THROW(wsep(s, 0, 2, {}, bad), Error);
    bad = WsepConfig{};
    bad.ridge = 1e-3;
    EXPECT_THROW(wsep(s, 0, 2, {}, bad), Error);
}

TEST(Wsep, IndependentAndDirectEdgeOnCompiledChain) {
    const auto m = amp::compile(scenarios::chain3());
    const auto s = analytic_spectral_matrix(m, welch_grid(256));
    const WsepConfig cfg;
    EXPECT_FALSE(wsep(s, 0, 1, {}, cfg).separated);
    EXPECT_FALSE(wsep(s, 1, 2, {}, cfg).separated);
    const auto iid = welch_cross_psd(white(3, 1u << 18, 11), WelchParams{});
    EXPECT_TRUE(wsep(iid, 0, 1, {}, cfg).separated);
    EXPECT_TRUE(wsep(iid, 0, 2, {1}, cfg).separated);
}

TEST(SpectralMatrix, SelectAndValidate) {
    const auto s = analytic_spectral_matrix(chain_model(), welch_grid(64));
    const auto sub = s.select({"3", "1"});
    EXPECT_EQ(sub.labels, (std::vector<std::string>{"3", "1"}));
    EXPECT_EQ(sub.bins[5](0, 1), s.bins[5](2, 0));
    EXPECT_NO_THROW(validate(s));
    auto broken = s;
    broken.bins[3](0, 1) += cplx(1.0, 0.0);
    EXPECT_THROW(validate(broken), Error);
    EXPECT_THROW(s.channel("9"), Error);
}

TEST(SpectralMatrix, CsvDump) {
    const auto s = analytic_spectral_matrix(chain_model(), welch_grid(8));
    std::ostringstream os;
    write_psd_csv(os, s);
    std::istringstream in(os.str());
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header.rfind("omega,re_1_1,im_1_1,re_1_2,im_1_2", 0), 0u);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 18);
    }
    EXPECT_EQ(rows, 5u);
}
