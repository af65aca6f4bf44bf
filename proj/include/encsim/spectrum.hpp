#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "encsim/trace.hpp"

namespace encsim {

// Unnormalized half spectrum of a real series: X[k] for k = 0..floor(N/2),
// X[k] = sum_t x[t]·e^(-2πi·k·t/N). Phases lie in (-π, π].
struct Spectrum {
    std::vector<double> magnitudes;
    std::vector<double> phases;
    std::size_t n = 0;
    std::int64_t bin_width_s = 0;
};

struct Peak {
    std::size_t k = 0;
    double magnitude = 0.0;
    double phase = 0.0;
};

// Peaks sorted by descending magnitude, ties by ascending k; never contains DC.
struct PeakSet {
    std::vector<Peak> peaks;
};

// period_s = N·bin_width/k; magnitudes normalized so the largest peak is 1.
struct PeriodicComponent {
    double period_s = 0.0;
    double magnitude = 0.0;
    double phase = 0.0;
};

// A component k >= 1 is a peak when it is a strict local maximum of the
// non-DC magnitude sequence and its magnitude is at least
// mean + c·std (population std over the non-DC magnitudes).
struct PeakPolicy {
    double c = 2.0;
    std::size_t max_peaks = 4;
};

Spectrum dft(const BinnedSeries& series);

PeakSet detect_peaks(const Spectrum& spec, const PeakPolicy& policy);

std::vector<PeriodicComponent> to_periods(const PeakSet& peaks, std::size_t n,
                                          std::int64_t bin_width_s);

}  // namespace encsim
