#include "encsim/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "encsim/errors.hpp"

namespace encsim {

Spectrum dft(const BinnedSeries& series) {
    const std::size_t n = series.values.size();
    if (n < 2) throw SeriesTooShort("dft needs at least 2 samples, got " + std::to_string(n));

    // Twiddles indexed by (k·t) mod N keep the angles exact for every term.
    std::vector<double> cos_table(n), sin_table(n);
    for (std::size_t m = 0; m < n; ++m) {
        double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
        cos_table[m] = std::cos(angle);
        sin_table[m] = std::sin(angle);
    }

    const std::size_t half = n / 2;
    Spectrum spec;
    spec.n = n;
    spec.bin_width_s = series.bin_width_s;
    spec.magnitudes.resize(half + 1);
    spec.phases.resize(half + 1);
    for (std::size_t k = 0; k <= half; ++k) {
        double re = 0.0;
        double im = 0.0;
        std::size_t idx = 0;
        for (std::size_t t = 0; t < n; ++t) {
            double x = series.values[t];
            re += x * cos_table[idx];
            im -= x * sin_table[idx];
            idx += k;
            if (idx >= n) idx -= n;
        }
        spec.magnitudes[k] = std::hypot(re, im);
        double phase = (re == 0.0 && im == 0.0) ? 0.0 : std::atan2(im, re);
        if (phase <= -std::numbers::pi) phase = std::numbers::pi;
        spec.phases[k] = phase;
    }
    return spec;
}

PeakSet detect_peaks(const Spectrum& spec, const PeakPolicy& policy) {
    const std::size_t half = spec.magnitudes.empty() ? 0 : spec.magnitudes.size() - 1;
    PeakSet result;
    if (half < 1 || policy.max_peaks == 0) return result;

    double mean = 0.0;
    for (std::size_t k = 1; k <= half; ++k) mean += spec.magnitudes[k];
    mean /= static_cast<double>(half);
    double var = 0.0;
    for (std::size_t k = 1; k <= half; ++k) {
        double d = spec.magnitudes[k] - mean;
        var += d * d;
    }
    double std_dev = std::sqrt(var / static_cast<double>(half));
    double threshold = mean + policy.c * std_dev;

    for (std::size_t k = 1; k <= half; ++k) {
        double m = spec.magnitudes[k];
        bool left_ok = (k == 1) || m > spec.magnitudes[k - 1];
        bool right_ok = (k == half) || m > spec.magnitudes[k + 1];
        if (left_ok && right_ok && m >= threshold) {
            result.peaks.push_back({k, m, spec.phases[k]});
        }
    }
    std::sort(result.peaks.begin(), result.peaks.end(), [](const Peak& a, const Peak& b) {
        if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
        return a.k < b.k;
    });
    if (result.peaks.size() > policy.max_peaks) result.peaks.resize(policy.max_peaks);
    return result;
}

std::vector<PeriodicComponent> to_periods(const PeakSet& peaks, std::size_t n,
                                          std::int64_t bin_width_s) {
    std::vector<PeriodicComponent> components;
    if (peaks.peaks.empty()) return components;
    const std::size_t half = n / 2;
    double max_magnitude = 0.0;
    for (const auto& p : peaks.peaks) {
        if (p.k == 0) throw InvalidComponent("DC component has no period");
        if (p.k > half) {
            throw InvalidComponent("component " + std::to_string(p.k) + " above Nyquist for N=" +
                                   std::to_string(n));
        }
        max_magnitude = std::max(max_magnitude, p.magnitude);
    }
    components.reserve(peaks.peaks.size());
    for (const auto& p : peaks.peaks) {
        double period = static_cast<double>(n) * static_cast<double>(bin_width_s) /
                        static_cast<double>(p.k);
        double magnitude = max_magnitude > 0.0 ? p.magnitude / max_magnitude : 0.0;
        components.push_back({period, magnitude, p.phase});
    }
    return components;
}

}  // namespace encsim
