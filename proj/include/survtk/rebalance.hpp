#pragma once

#include <cstdint>

#include "survtk/cohort.hpp"

namespace survtk {

struct RoseConfig {
    double target = 0.5;     // event share of the output
    std::size_t size = 0;    // 0 keeps the input size
    double multiplier = 1.0; // kernel shrink multiplier; 0 turns jitter off
    std::uint64_t seed = 0;

    void validate() const;
};

// Silverman-style bandwidth for one numeric feature within one outcome class.
double rose_bandwidth(std::size_t n_class, std::size_t d, double sigma, double multiplier);

// Smoothed bootstrap toward the target outcome balance.  Each synthetic
// record copies a same-class seed record, jitters its observed numeric
// features with class-conditional bandwidths, and keeps categorical levels,
// the missingness mask, and the survival outcome exactly as drawn.
Cohort rose_resample(const Cohort& c, const RoseConfig& cfg);

} // namespace survtk
