#pragma once

// Cross-spectral estimation, frequency-domain Wiener filters and the
// Wiener-separation decision.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <memory>
#include <numbers>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <fftw3.h>
#include <Eigen/Dense>

#include "ldimrec/error.hpp"
#include "ldimrec/ldim.hpp"

namespace ldimrec::spectral {

enum class Window { Hann, Hamming, Rect };

inline Window window_from_string(const std::string& name) {
    if (name == "hann") return Window::Hann;
    if (name == "hamming") return Window::Hamming;
    if (name == "rect") return Window::Rect;
    throw Error(ErrorCode::InvalidParams, "unknown window '" + name + "' (hann, hamming, rect)");
}

struct WelchParams {
    std::size_t segment = 256;
    double overlap = 0.5;
    Window window = Window::Hann;
};

inline void validate(const WelchParams& p, std::size_t data_length) {
    if (p.segment < 2 || (p.segment & (p.segment - 1)) != 0)
        throw Error(ErrorCode::InvalidParams, "Welch segment length must be a power of two >= 2");
    if (!(p.overlap >= 0.0 && p.overlap < 1.0)) throw Error(ErrorCode::InvalidParams, "Welch overlap must lie in [0, 1)");
    if (p.segment > data_length) throw Error(ErrorCode::InsufficientData, "Welch segment longer than the data");
}

/// Periodic window of length n.
inline std::vector<double> make_window(Window w, std::size_t n) {
    std::vector<double> out(n, 1.0);
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t i = 0; i < n; ++i) {
        const double phase = two_pi * static_cast<double>(i) / static_cast<double>(n);
        if (w == Window::Hann) out[i] = 0.5 - 0.5 * std::cos(phase);
        if (w == Window::Hamming) out[i] = 0.54 - 0.46 * std::cos(phase);
    }
    return out;
}

/// Per-bin Hermitian matrices S_ij(w) = E[Y_i(w) conj(Y_j(w))] on an
/// ascending grid in [0, pi] (radians/sample).
struct SpectralMatrix {
    std::vector<std::string> labels;
    std::vector<double> omega;
    std::vector<CMatrix> bins;

    std::size_t channels() const { return labels.size(); }
    std::size_t size() const { return omega.size(); }

    std::size_t channel(const std::string& label) const {
        auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end()) throw Error(ErrorCode::UnknownVertex, "unknown channel '" + label + "'");
        return static_cast<std::size_t>(it - labels.begin());
    }

    /// Largest ||S - S^H|| over bins, relative to the largest diagonal entry.
    double max_hermitian_defect() const {
        double worst = 0.0;
        for (const auto& s : bins) {
            const double scale = std::max(s.diagonal().real().cwiseAbs().maxCoeff(), 1e-300);
            worst = std::max(worst, (s - s.adjoint()).norm() / scale);
        }
        return worst;
    }

    /// Restrict to a subset of channels (in the given order).
    SpectralMatrix select(const std::vector<std::string>& keep) const {
        SpectralMatrix out;
        out.labels = keep;
        out.omega = omega;
        std::vector<Eigen::Index> idx;
        for (const auto& l : keep) idx.push_back(static_cast<Eigen::Index>(channel(l)));
        const auto k = static_cast<Eigen::Index>(idx.size());
        for (const auto& s : bins) {
            CMatrix t(k, k);
            for (Eigen::Index a = 0; a < k; ++a)
                for (Eigen::Index b = 0; b < k; ++b) t(a, b) = s(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
            out.bins.push_back(std::move(t));
        }
        return out;
    }
};

inline void validate(const SpectralMatrix& s) {
    if (s.bins.size() != s.omega.size()) throw Error(ErrorCode::InvalidParams, "grid/bin count mismatch");
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (k && !(s.omega[k] > s.omega[k - 1])) throw Error(ErrorCode::InvalidParams, "frequency grid not ascending");
        if (s.omega[k] < 0.0 || s.omega[k] > std::numbers::pi + 1e-12)
            throw Error(ErrorCode::InvalidParams, "frequency grid outside [0, pi]");
        const auto& m = s.bins[k];
        const double scale = std::max(m.diagonal().real().cwiseAbs().maxCoeff(), 1e-300);
        if ((m - m.adjoint()).norm() > 1e-10 * scale) throw Error(ErrorCode::InvalidParams, "spectral bin is not Hermitian");
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (m(i, i).real() < -1e-10 * scale) throw Error(ErrorCode::InvalidParams, "negative auto-spectrum");
    }
}

/// Bin frequencies 2 pi k / L for k = 0..L/2.
inline std::vector<double> welch_grid(std::size_t segment) {
    std::vector<double> out(segment / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(segment);
    return out;
}

/// `count` evenly spaced points covering [lo, hi].
inline std::vector<double> uniform_grid(double lo, double hi, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k)
        out[k] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
    return out;
}

/// Exact output spectra of an LDIM on a grid.
inline SpectralMatrix analytic_spectral_matrix(const Ldim& m, const std::vector<double>& grid) {
    SpectralMatrix out;
    out.labels = m.labels();
    out.omega = grid;
    const NoiseSpectrum noise(m);
    for (double w : grid) out.bins.push_back(analytic_output_psd(m, noise, w));
    return out;
}

namespace detail {

struct FftwPlan {
    fftw_plan plan = nullptr;
    explicit FftwPlan(std::size_t n) {
        double* in = fftw_alloc_real(n);
        fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
        fftw_free(in);
        fftw_free(out);
    }
    ~FftwPlan() { fftw_destroy_plan(plan); }
    FftwPlan(const FftwPlan&) = delete;
    FftwPlan& operator=(const FftwPlan&) = delete;
};

struct FftwBuffers {
    std::size_t n;
    double* in;
    fftw_complex* out;
    explicit FftwBuffers(std::size_t len) : n(len), in(fftw_alloc_real(len)), out(fftw_alloc_complex(len / 2 + 1)) {}
    ~FftwBuffers() {
        fftw_free(in);
        fftw_free(out);
    }
    FftwBuffers(const FftwBuffers&) = delete;
    FftwBuffers& operator=(const FftwBuffers&) = delete;
};

// Segments are summed in fixed-size blocks whose partial sums are combined in
// block order, so the result does not depend on the number of workers.
inline constexpr std::size_t kSegmentsPerBlock = 64;

}  // namespace detail

/// Averaged windowed periodograms. Each segment is mean-removed before
/// windowing; scaling makes unit-variance white noise come out flat at 1.
inline SpectralMatrix welch_cross_psd(const TimeSeriesSet& ts, const WelchParams& p, unsigned threads = 1) {
    ts.validate();
    validate(p, ts.length());
    const std::size_t L = p.segment;
    const std::size_t step = std::max<std::size_t>(1, L - static_cast<std::size_t>(std::llround(p.overlap * static_cast<double>(L))));
    const std::size_t segments = 1 + (ts.length() - L) / step;
    if (segments < 8)
        throw Error(ErrorCode::InsufficientData, "Welch estimate needs at least 8 segments, got " + std::to_string(segments));

    const std::size_t n = ts.channels();
    const std::size_t nbins = L / 2 + 1;
    const auto window = make_window(p.window, L);
    double window_power = 0.0;
    for (double v : window) window_power += v * v;

    // acc[(i*n + j) * nbins + k] for i <= j
    using Acc = std::vector<std::complex<double>>;
    const std::size_t acc_size = n * n * nbins;
    const detail::FftwPlan plan(L);

    auto accumulate_block = [&](std::size_t block, Acc& acc, detail::FftwBuffers& buf, std::vector<std::complex<double>>& spectra) {
        std::fill(acc.begin(), acc.end(), std::complex<double>(0.0));
        const std::size_t first = block * detail::kSegmentsPerBlock;
        const std::size_t last = std::min(segments, first + detail::kSegmentsPerBlock);
        for (std::size_t s = first; s < last; ++s) {
            const std::size_t offset = s * step;
            for (std::size_t c = 0; c < n; ++c) {
                const double* x = ts.data[c].data() + offset;
                double mean = 0.0;
                for (std::size_t t = 0; t < L; ++t) mean += x[t];
                mean /= static_cast<double>(L);
                for (std::size_t t = 0; t < L; ++t) buf.in[t] = (x[t] - mean) * window[t];
                fftw_execute_dft_r2c(plan.plan, buf.in, buf.out);
                for (std::size_t k = 0; k < nbins; ++k) spectra[c * nbins + k] = {buf.out[k][0], buf.out[k][1]};
            }
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i; j < n; ++j) {
                    auto* dst = &acc[(i * n + j) * nbins];
                    const auto* xi = &spectra[i * nbins];
                    const auto* xj = &spectra[j * nbins];
                    for (std::size_t k = 0; k < nbins; ++k) dst[k] += xi[k] * std::conj(xj[k]);
                }
        }
    };

    const std::size_t blocks = (segments + detail::kSegmentsPerBlock - 1) / detail::kSegmentsPerBlock;
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(blocks)));
    Acc total(acc_size, std::complex<double>(0.0));
    std::vector<Acc> partial(threads, Acc(acc_size));
    std::vector<std::unique_ptr<detail::FftwBuffers>> buffers;
    std::vector<std::vector<std::complex<double>>> spectra(threads, std::vector<std::complex<double>>(n * nbins));
    for (unsigned w = 0; w < threads; ++w) buffers.push_back(std::make_unique<detail::FftwBuffers>(L));

    for (std::size_t wave = 0; wave < blocks; wave += threads) {
        const std::size_t in_wave = std::min<std::size_t>(threads, blocks - wave);
        if (in_wave == 1) {
            accumulate_block(wave, partial[0], *buffers[0], spectra[0]);
        } else {
            std::vector<std::thread> workers;
            for (std::size_t w = 0; w < in_wave; ++w)
                workers.emplace_back([&, w] { accumulate_block(wave + w, partial[w], *buffers[w], spectra[w]); });
            for (auto& t : workers) t.join();
        }
        for (std::size_t w = 0; w < in_wave; ++w)
            for (std::size_t i = 0; i < acc_size; ++i) total[i] += partial[w][i];
    }

    SpectralMatrix out;
    out.labels = ts.labels;
    out.omega = welch_grid(L);
    const double norm = 1.0 / (static_cast<double>(segments) * window_power);
    const auto nn = static_cast<Eigen::Index>(n);
    for (std::size_t k = 0; k < nbins; ++k) {
        CMatrix s(nn, nn);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                const auto v = total[(i * n + j) * nbins + k] * norm;
                const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
                if (i == j) {
                    s(ii, ii) = v.real();
                } else {
                    s(ii, jj) = v;
                    s(jj, ii) = std::conj(v);
                }
            }
        out.bins.push_back(std::move(s));
    }
    return out;
}

// --- Wiener filtering ---------------------------------------------------------

/// W(w) for estimating `target` from `predictors` at one bin:
/// W = S_tP (S_PP + ridge I)^-1 with ridge = reg * trace(S_PP) / |P|.
inline Eigen::RowVectorXcd wiener_at(const CMatrix& s, std::size_t target, const std::vector<std::size_t>& predictors, double reg) {
    const auto k = static_cast<Eigen::Index>(predictors.size());
    CMatrix a(k, k);
    Eigen::VectorXcd rhs(k);
    for (Eigen::Index r = 0; r < k; ++r) {
        const auto pr = static_cast<Eigen::Index>(predictors[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < k; ++c) a(r, c) = s(pr, static_cast<Eigen::Index>(predictors[static_cast<std::size_t>(c)]));
        rhs(r) = s(pr, static_cast<Eigen::Index>(target));
    }
    const double trace = a.diagonal().real().sum();
    if (reg > 0.0) a.diagonal().array() += reg * trace / static_cast<double>(k);
    a = 0.5 * (a + a.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(a);
    const auto& ev = eig.eigenvalues();
    if (!(ev(0) > 0.0) || ev(k - 1) / ev(0) > 1e12)
        throw Error(ErrorCode::SingularPsd, "predictor spectral matrix is singular or ill-conditioned");
    const Eigen::VectorXcd x = eig.eigenvectors() * (ev.cwiseInverse().asDiagonal() * (eig.eigenvectors().adjoint() * rhs));
    return x.adjoint();
}

inline void check_wiener_args(const SpectralMatrix& s, std::size_t target, const std::vector<std::size_t>& predictors) {
    if (predictors.empty()) throw Error(ErrorCode::InvalidParams, "Wiener filter needs at least one predictor");
    if (target >= s.channels()) throw Error(ErrorCode::UnknownVertex, "target channel out of range");
    for (std::size_t i = 0; i < predictors.size(); ++i) {
        if (predictors[i] >= s.channels()) throw Error(ErrorCode::UnknownVertex, "predictor channel out of range");
        if (predictors[i] == target) throw Error(ErrorCode::InvalidParams, "target appears among its predictors");
        for (std::size_t j = 0; j < i; ++j)
            if (predictors[j] == predictors[i]) throw Error(ErrorCode::InvalidParams, "duplicate predictor");
    }
}

/// Per-bin Wiener row vectors, ordered like `predictors`.
inline std::vector<Eigen::RowVectorXcd> wiener_from_psd(const SpectralMatrix& s, std::size_t target,
                                                        const std::vector<std::size_t>& predictors, double reg = 0.0) {
    check_wiener_args(s, target, predictors);
    std::vector<Eigen::RowVectorXcd> out;
    out.reserve(s.size());
    for (const auto& bin : s.bins) out.push_back(wiener_at(bin, target, predictors, reg));
    return out;
}

struct WsepConfig {
    double rho = 0.05;
    double band_lo = 0.05 * std::numbers::pi;  // radians/sample
    double band_hi = 0.6 * std::numbers::pi;
    double ridge = 1e-8;
};

inline void validate(const WsepConfig& cfg) {
    if (!(cfg.rho > 0.0)) throw Error(ErrorCode::InvalidParams, "threshold rho must be positive");
    if (!(cfg.band_lo > 0.0 && cfg.band_lo < cfg.band_hi && cfg.band_hi < std::numbers::pi + 1e-12))
        throw Error(ErrorCode::InvalidParams, "averaging band must satisfy 0 < lo < hi <= pi");
    if (!(cfg.ridge >= 0.0 && cfg.ridge <= 1e-4)) throw Error(ErrorCode::InvalidParams, "ridge must lie in [0, 1e-4]");
}

inline std::vector<std::size_t> band_bins(const SpectralMatrix& s, const WsepConfig& cfg) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < s.size(); ++k)
        if (s.omega[k] >= cfg.band_lo - 1e-12 && s.omega[k] <= cfg.band_hi + 1e-12) out.push_back(k);
    if (out.empty()) throw Error(ErrorCode::InvalidParams, "no frequency bins inside the averaging band");
    return out;
}

struct WsepResult {
    bool separated;
    double statistic;
};

/// Mean over the band of |W_{y,[x] | {x} u Z}|, compared against rho.
inline WsepResult wsep(const SpectralMatrix& s, std::size_t x, std::size_t y, const std::vector<std::size_t>& z,
                       const WsepConfig& cfg) {
    validate(cfg);
    if (x == y) throw Error(ErrorCode::InvalidParams, "wsep needs distinct x and y");
    std::vector<std::size_t> predictors{x};
    for (std::size_t v : z) {
        if (v == x || v == y) throw Error(ErrorCode::InvalidParams, "conditioning set contains x or y");
        predictors.push_back(v);
    }
    check_wiener_args(s, y, predictors);
    const auto bins = band_bins(s, cfg);
    double sum = 0.0;
    for (std::size_t k : bins) sum += std::abs(wiener_at(s.bins[k], y, predictors, cfg.ridge)(0));
    const double stat = sum / static_cast<double>(bins.size());
    return {stat < cfg.rho, stat};
}

/// CSV dump: omega, then Re/Im of every entry in row-major order.
inline void write_psd_csv(std::ostream& os, const SpectralMatrix& s) {
    os << "omega";
    for (const auto& a : s.labels)
        for (const auto& b : s.labels) os << ",re_" << a << "_" << b << ",im_" << a << "_" << b;
    os << "\n";
    char buf[64];
    for (std::size_t k = 0; k < s.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", s.omega[k]);
        os << buf;
        const auto& m = s.bins[k];
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                std::snprintf(buf, sizeof buf, ",%.17g,%.17g", m(i, j).real(), m(i, j).imag());
                os << buf;
            }
        os << "\n";
    }
}

}  // namespace ldimrec::spectral
