#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ldimrec/error.hpp"
#include "ldimrec/filter.hpp"

namespace ldimrec {

/// 1/f component: PSD ~ white_variance * corner / f below the corner.
struct FlickerSpec {
    double corner_hz = 0.0;
    int order = 3;  // first-order pole/zero pairs per decade
    friend bool operator==(const FlickerSpec&, const FlickerSpec&) = default;
};

inline constexpr double kFlickerDecades = 3.0;

/// Cascade of first-order pole/zero pairs spread geometrically over the
/// three decades below the corner, gain fitted so the PSD tracks corner/f.
inline FilterCascade design_flicker_filter(const FlickerSpec& spec, double fs_hz) {
    const double nyquist = fs_hz / 2.0;
    if (!(spec.corner_hz > 0.0 && spec.corner_hz < nyquist))
        throw Error(ErrorCode::InvalidNoise, "flicker corner must lie in (0, Nyquist)");
    if (spec.order < 1) throw Error(ErrorCode::InvalidNoise, "flicker order must be at least 1");

    const double f_hi = spec.corner_hz;
    const double f_lo = f_hi / std::pow(10.0, kFlickerDecades);
    const int sections = static_cast<int>(std::lround(spec.order * kFlickerDecades));
    const double ratio = std::pow(f_hi / f_lo, 1.0 / sections);

    std::vector<RationalFilter> stages;
    for (int i = 0; i < sections; ++i) {
        const double f_pole = f_lo * std::pow(ratio, i);
        const double f_zero = f_pole * std::sqrt(ratio);
        const double p = std::exp(-2.0 * std::numbers::pi * f_pole / fs_hz);
        const double z = std::exp(-2.0 * std::numbers::pi * f_zero / fs_hz);
        stages.emplace_back(poly::Coeffs{1.0, -z}, poly::Coeffs{1.0, -p});
    }
    const FilterCascade shape(stages);

    // Log-domain least squares gain over the designed span.
    constexpr int kFitPoints = 64;
    double log_err = 0.0;
    for (int i = 0; i < kFitPoints; ++i) {
        const double f = f_lo * std::pow(f_hi / f_lo, (i + 0.5) / kFitPoints);
        const double mag2 = std::norm(frequency_response(shape, 2.0 * std::numbers::pi * f / fs_hz));
        log_err += std::log(mag2 * f / spec.corner_hz);
    }
    const double gain = std::exp(-0.5 * log_err / kFitPoints);
    stages.front() = RationalFilter(poly::scale(stages.front().num(), gain), stages.front().den());
    return FilterCascade(std::move(stages));
}

/// One independent noise source feeding a channel: white Gaussian noise of
/// the given variance plus an optional flicker part, passed through `shaping`.
struct NoiseSpec {
    double white_variance = 1.0;
    std::optional<FlickerSpec> flicker;
    RationalFilter shaping;

    friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

inline void validate(const NoiseSpec& spec, double fs_hz) {
    if (!(spec.white_variance > 0.0) || !std::isfinite(spec.white_variance))
        throw Error(ErrorCode::InvalidNoise, "noise variance must be positive and finite");
    if (spec.flicker) {
        if (!(spec.flicker->corner_hz > 0.0 && spec.flicker->corner_hz < fs_hz / 2.0))
            throw Error(ErrorCode::InvalidNoise, "flicker corner must lie in (0, Nyquist)");
        if (spec.flicker->order < 1) throw Error(ErrorCode::InvalidNoise, "flicker order must be at least 1");
    }
    if (!spec.shaping.is_stable()) throw Error(ErrorCode::InvalidNoise, "noise shaping filter is unstable");
}

/// Spectral density of one source at w (radians/sample).
inline double noise_psd(const NoiseSpec& spec, double fs_hz, double omega) {
    double level = 1.0;
    if (spec.flicker) level += std::norm(frequency_response(design_flicker_filter(*spec.flicker, fs_hz), omega));
    return spec.white_variance * level * std::norm(frequency_response(spec.shaping, omega));
}

}  // namespace ldimrec
