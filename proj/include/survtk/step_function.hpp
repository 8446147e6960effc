#pragma once

#include <cstddef>
#include <vector>

namespace survtk {

// Right-continuous step function of time, the common shape of survival and
// cumulative-hazard curves.  `values[k]` is the value on [times[k], times[k+1]);
// before times[0] the function equals `initial`.  Times are strictly
// increasing.
struct StepFunction {
    std::vector<double> times;
    std::vector<double> values;
    double initial = 1.0;

    double operator()(double t) const {
        // index of the last jump time <= t
        std::size_t lo = 0, hi = times.size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (times[mid] <= t) lo = mid + 1; else hi = mid;
        }
        return lo == 0 ? initial : values[lo - 1];
    }

    // Left limit f(t-): the value just before t, i.e. jumps at exactly t are
    // not yet applied.
    double left_value(double t) const {
        std::size_t lo = 0, hi = times.size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (times[mid] < t) lo = mid + 1; else hi = mid;
        }
        return lo == 0 ? initial : values[lo - 1];
    }

    bool empty() const { return times.empty(); }
};

} // namespace survtk
