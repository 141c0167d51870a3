#pragma once

// Real polynomials with coefficients in ascending powers of the variable.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ldimrec/error.hpp"

namespace ldimrec::poly {

using Coeffs = std::vector<double>;
using cplx = std::complex<double>;

inline double max_abs(const Coeffs& p) {
    double m = 0.0;
    for (double c : p) m = std::max(m, std::abs(c));
    return m;
}

/// Drops exactly-zero highest-order coefficients; the zero polynomial becomes {0}.
inline Coeffs trimmed(Coeffs p) {
    while (p.size() > 1 && p.back() == 0.0) p.pop_back();
    if (p.empty()) p.push_back(0.0);
    return p;
}

inline bool is_zero(const Coeffs& p) {
    return std::all_of(p.begin(), p.end(), [](double c) { return c == 0.0; });
}

inline std::size_t degree(const Coeffs& p) { return trimmed(p).size() - 1; }

inline Coeffs scale(Coeffs p, double k) {
    for (double& c : p) c *= k;
    return trimmed(std::move(p));
}

/// Sum with cancellation detection: a coefficient that is below 1e-12 of the
/// larger operand coefficient is set to zero, so cancelled leading terms do
/// not inflate the degree.
inline Coeffs add(const Coeffs& a, const Coeffs& b, double sign = 1.0) {
    Coeffs out(std::max(a.size(), b.size()), 0.0);
    for (std::size_t k = 0; k < out.size(); ++k) {
        const double x = k < a.size() ? a[k] : 0.0;
        const double y = k < b.size() ? sign * b[k] : 0.0;
        const double s = x + y;
        out[k] = std::abs(s) <= 1e-12 * std::max(std::abs(x), std::abs(y)) ? 0.0 : s;
    }
    return trimmed(std::move(out));
}

inline Coeffs sub(const Coeffs& a, const Coeffs& b) { return add(a, b, -1.0); }

inline Coeffs mul(const Coeffs& a, const Coeffs& b) {
    if (a.empty() || b.empty()) return {0.0};
    Coeffs out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return trimmed(std::move(out));
}

inline Coeffs pow(const Coeffs& p, std::size_t k) {
    Coeffs out{1.0};
    for (std::size_t i = 0; i < k; ++i) out = mul(out, p);
    return out;
}

/// Horner evaluation at a complex point.
inline cplx eval(const Coeffs& p, cplx x) {
    cplx acc = 0.0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * x + *it;
    return acc;
}

/// Roots via companion-matrix eigenvalues. Exact zero roots (vanishing
/// low-order coefficients) are returned as exact zeros.
inline std::vector<cplx> roots(const Coeffs& p_in) {
    Coeffs p = trimmed(p_in);
    if (is_zero(p)) throw Error(ErrorCode::NumericalSingularity, "roots of the zero polynomial");
    std::vector<cplx> out;
    std::size_t lead_zeros = 0;
    while (lead_zeros < p.size() && p[lead_zeros] == 0.0) ++lead_zeros;
    out.assign(lead_zeros, cplx(0.0, 0.0));
    p.erase(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(lead_zeros));
    const std::size_t n = p.size() - 1;
    if (n == 0) return out;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i + 1 < n; ++i) companion(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = 1.0;
    for (std::size_t i = 0; i < n; ++i)
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n - 1)) = -p[i] / p[n];
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) out.push_back(solver.eigenvalues()[i]);
    return out;
}

/// Monic-in-highest-power real polynomial from roots (conjugate pairs assumed), times `gain`.
inline Coeffs from_roots(const std::vector<cplx>& rs, double gain) {
    std::vector<cplx> acc{cplx(1.0)};
    for (const auto& r : rs) {
        std::vector<cplx> next(acc.size() + 1, cplx(0.0));
        for (std::size_t i = 0; i < acc.size(); ++i) {
            next[i] -= r * acc[i];
            next[i + 1] += acc[i];
        }
        acc = std::move(next);
    }
    Coeffs out(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out[i] = gain * acc[i].real();
    return trimmed(std::move(out));
}

}  // namespace ldimrec::poly
