#pragma once

// Independent reference implementations used only by tests.  These are
// written as directly as possible from the defining formulas, trading speed
// for obviousness, so the production code can be checked against them.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "survtk/metrics.hpp"

namespace oracle {

// Censoring-weighted cumulative/dynamic AUC by exhaustive enumeration of all
// case/control pairs.  Weights use the same censoring Kaplan-Meier as the
// production path; everything else is brute force.
inline double pairwise_ipcw_auc(const std::vector<double>& risks, const std::vector<double>& times,
                                const std::vector<int>& events, double t) {
    survtk::StepFunction sc = survtk::censoring_km(times, events);
    double num = 0.0, den = 0.0;
    bool any_case = false, any_ctrl = false;
    for (std::size_t i = 0; i < risks.size(); ++i) {
        if (!(times[i] <= t && events[i] == 1)) continue;
        any_case = true;
        const double wi = 1.0 / sc.left_value(times[i]);
        for (std::size_t j = 0; j < risks.size(); ++j) {
            if (!(times[j] > t || (times[j] == t && events[j] == 0))) continue;
            any_ctrl = true;
            const double wj = 1.0 / sc.left_value(t);
            const double w = wi * wj;
            den += w;
            if (risks[i] > risks[j]) num += w;
            else if (risks[i] == risks[j]) num += 0.5 * w;
        }
    }
    if (!any_case || !any_ctrl) throw std::runtime_error("oracle: no cases or no controls");
    return num / den;
}

// Breslow negative log partial likelihood, written straight from the
// definition with an explicit risk-set scan per event time.
inline double breslow_nll(const std::vector<double>& scores, const std::vector<double>& times,
                          const std::vector<int>& events) {
    const std::size_t n = scores.size();
    double nll = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (events[k] != 1) continue;
        // Breslow ties: every event at time T_k contributes log of the same
        // risk-set sum; dividing the count out per record keeps this loop
        // per-record instead of per-distinct-time.
        double risk_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            if (times[j] >= times[k]) risk_sum += std::exp(scores[j]);
        nll += std::log(risk_sum) - scores[k];
    }
    return nll;
}

// Central-difference gradient of breslow_nll with respect to the scores.
inline std::vector<double> breslow_grad_fd(const std::vector<double>& scores,
                                           const std::vector<double>& times,
                                           const std::vector<int>& events, double h = 1e-5) {
    std::vector<double> g(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::vector<double> up = scores, dn = scores;
        up[i] += h;
        dn[i] -= h;
        g[i] = (breslow_nll(up, times, events) - breslow_nll(dn, times, events)) / (2.0 * h);
    }
    return g;
}

// Diagonal of the finite-difference Hessian of breslow_nll.
inline std::vector<double> breslow_hess_diag_fd(const std::vector<double>& scores,
                                                const std::vector<double>& times,
                                                const std::vector<int>& events, double h = 1e-4) {
    std::vector<double> d(scores.size());
    const double f0 = breslow_nll(scores, times, events);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        std::vector<double> up = scores, dn = scores;
        up[i] += h;
        dn[i] -= h;
        d[i] = (breslow_nll(up, times, events) + breslow_nll(dn, times, events) - 2.0 * f0) / (h * h);
    }
    return d;
}

} // namespace oracle
