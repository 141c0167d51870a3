#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ldimrec/error.hpp"
#include "ldimrec/poly.hpp"

namespace ldimrec {

using cplx = std::complex<double>;

/// Discrete-time rational transfer function in ascending powers of z^-1,
/// normalized so that den[0] == 1.
class RationalFilter {
public:
    RationalFilter() : num_{1.0}, den_{1.0} {}

    RationalFilter(poly::Coeffs num, poly::Coeffs den) : num_(std::move(num)), den_(std::move(den)) {
        if (num_.empty()) num_ = {0.0};
        if (den_.empty() || den_.front() == 0.0)
            throw Error(ErrorCode::InvalidModel, "filter denominator must have a nonzero z^0 coefficient");
        for (double c : num_)
            if (!std::isfinite(c)) throw Error(ErrorCode::InvalidModel, "non-finite filter numerator");
        for (double c : den_)
            if (!std::isfinite(c)) throw Error(ErrorCode::InvalidModel, "non-finite filter denominator");
        const double d0 = den_.front();
        for (double& c : num_) c /= d0;
        for (double& c : den_) c /= d0;
        num_ = poly::trimmed(std::move(num_));
        den_ = poly::trimmed(std::move(den_));
    }

    static RationalFilter gain(double k) { return RationalFilter({k}, {1.0}); }
    static RationalFilter delay(std::size_t samples) {
        poly::Coeffs num(samples + 1, 0.0);
        num.back() = 1.0;
        return RationalFilter(std::move(num), {1.0});
    }

    const poly::Coeffs& num() const { return num_; }
    const poly::Coeffs& den() const { return den_; }

    bool is_zero() const { return poly::is_zero(num_); }

    /// Poles in the z-plane: roots of z^n den(z^-1).
    std::vector<cplx> poles() const {
        poly::Coeffs reversed(den_.rbegin(), den_.rend());
        return poly::roots(reversed);
    }

    double max_pole_radius() const {
        double r = 0.0;
        for (const auto& p : poles()) r = std::max(r, std::abs(p));
        return r;
    }

    bool is_stable() const { return den_.size() == 1 || max_pole_radius() < 1.0; }

    /// Transposed direct form II.
    std::vector<double> apply(std::span<const double> input) const {
        const std::size_t order = std::max(num_.size(), den_.size());
        std::vector<double> b(order, 0.0), a(order, 0.0);
        std::copy(num_.begin(), num_.end(), b.begin());
        std::copy(den_.begin(), den_.end(), a.begin());
        std::vector<double> state(order, 0.0);
        std::vector<double> out(input.size());
        for (std::size_t t = 0; t < input.size(); ++t) {
            const double x = input[t];
            const double y = b[0] * x + state[0];
            for (std::size_t k = 1; k < order; ++k)
                state[k - 1] = b[k] * x - a[k] * y + (k < order - 1 ? state[k] : 0.0);
            out[t] = y;
        }
        return out;
    }

    /// Length (samples) capturing `fraction` of the impulse-response energy.
    std::size_t energy_length(double fraction = 0.99, std::size_t cap = std::size_t{1} << 22) const;

    friend RationalFilter operator*(const RationalFilter& a, const RationalFilter& b) {
        return RationalFilter(poly::mul(a.num_, b.num_), poly::mul(a.den_, b.den_));
    }

    friend RationalFilter operator+(const RationalFilter& a, const RationalFilter& b) {
        if (a.den_ == b.den_) return RationalFilter(poly::add(a.num_, b.num_), a.den_);
        return RationalFilter(poly::add(poly::mul(a.num_, b.den_), poly::mul(b.num_, a.den_)),
                              poly::mul(a.den_, b.den_));
    }

    friend bool operator==(const RationalFilter&, const RationalFilter&) = default;

private:
    poly::Coeffs num_;
    poly::Coeffs den_;
};

namespace detail {

inline std::size_t energy_index(const std::vector<double>& h, double fraction) {
    double total = 0.0;
    for (double v : h) total += v * v;
    if (total == 0.0) return 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        acc += h[i] * h[i];
        if (acc >= fraction * total) return i + 1;
    }
    return h.size();
}

/// Doubles the impulse length until the second half carries a negligible
/// share of the energy.
template <class Apply>
std::size_t impulse_energy_length(Apply&& apply, double fraction, std::size_t cap) {
    std::size_t block = 4096;
    while (true) {
        std::vector<double> impulse(block, 0.0);
        impulse[0] = 1.0;
        const std::vector<double> h = apply(impulse);
        double total = 0.0, tail = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            total += h[i] * h[i];
            if (i >= h.size() / 2) tail += h[i] * h[i];
        }
        if (tail <= 1e-9 * total || block >= cap) return std::max<std::size_t>(1, energy_index(h, fraction));
        block *= 2;
    }
}

}  // namespace detail

inline std::size_t RationalFilter::energy_length(double fraction, std::size_t cap) const {
    if (den_.size() == 1) return std::max<std::size_t>(1, detail::energy_index(num_, fraction));
    return detail::impulse_energy_length([&](const std::vector<double>& x) { return apply(x); }, fraction, cap);
}

/// num(e^{-jw}) / den(e^{-jw}) for w in radians/sample.
inline cplx frequency_response(const RationalFilter& f, double omega) {
    if (!(omega >= -std::numbers::pi - 1e-12 && omega <= std::numbers::pi + 1e-12))
        throw Error(ErrorCode::InvalidParams, "frequency outside [-pi, pi]");
    const cplx q = std::polar(1.0, -omega);
    const cplx den = poly::eval(f.den(), q);
    if (std::abs(den) < 1e-12)
        throw Error(ErrorCode::NumericalSingularity, "filter denominator vanishes on the unit circle");
    return poly::eval(f.num(), q) / den;
}

/// Series connection of low-order sections, kept factored so that clustered
/// poles do not lose precision in an expanded polynomial.
class FilterCascade {
public:
    FilterCascade() = default;
    explicit FilterCascade(std::vector<RationalFilter> sections) : sections_(std::move(sections)) {}

    const std::vector<RationalFilter>& sections() const { return sections_; }

    bool is_stable() const {
        for (const auto& s : sections_)
            if (!s.is_stable()) return false;
        return true;
    }

    std::vector<double> apply(std::span<const double> input) const {
        std::vector<double> x(input.begin(), input.end());
        for (const auto& s : sections_) x = s.apply(x);
        return x;
    }

    std::size_t energy_length(double fraction = 0.99, std::size_t cap = std::size_t{1} << 22) const {
        return detail::impulse_energy_length([&](const std::vector<double>& x) { return apply(x); }, fraction, cap);
    }

    friend bool operator==(const FilterCascade&, const FilterCascade&) = default;

private:
    std::vector<RationalFilter> sections_;
};

inline cplx frequency_response(const FilterCascade& f, double omega) {
    cplx h(1.0, 0.0);
    for (const auto& s : f.sections()) h *= frequency_response(s, omega);
    return h;
}

}  // namespace ldimrec
