#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "survtk/error.hpp"
#include "survtk/step_function.hpp"

namespace survtk {

// Product-limit survival estimate.  Tied event and censoring times are
// resolved event-first (the censored record is still at risk for the event).
StepFunction kaplan_meier(const std::vector<double>& times, const std::vector<int>& events);

// Censoring-distribution estimate: the same estimator with flipped indicators.
StepFunction censoring_km(const std::vector<double>& times, const std::vector<int>& events);

// Cumulative-hazard estimate H(t) = sum over event times of d/n.
StepFunction nelson_aalen(const std::vector<double>& times, const std::vector<int>& events);

// Inverse-probability-of-censoring-weighted cumulative/dynamic AUC at
// horizon t.  Cases are records with an event by t, weighted 1/S_C(T-);
// controls are known event-free through t (observed past t, or censored
// exactly at t), weighted by the shared constant 1/S_C(t-).  Ties in risk
// count half.  Risks are oriented so that larger means more likely to fail.
double ipcw_auc(const std::vector<double>& risks, const std::vector<double>& times,
                const std::vector<int>& events, double t);

// Hazard-regression calibration smoother: proportional-hazards fit on a
// restricted-cubic-spline basis of ln(-ln p), evaluated at t per record.
// Degenerate designs (all predictions equal) fall back to the marginal
// Kaplan-Meier value.
std::vector<double> smoothed_observed(const std::vector<double>& preds,
                                      const std::vector<double>& times,
                                      const std::vector<int>& events, double t);

// Integrated calibration index: mean |smoothed observed - predicted|.
double ici(const std::vector<double>& preds, const std::vector<double>& times,
           const std::vector<int>& events, double t);

struct QuartileSummary {
    double mean_pred = 0.0;
    double mean_obs = 0.0;
    double sd_pred = 0.0;
    double sd_obs = 0.0;
    std::size_t count = 0;
};

struct CalibrationCurve {
    std::vector<double> predicted;  // after percentile trimming
    std::vector<double> observed;   // smoothed, same order
    std::vector<QuartileSummary> quartiles; // always 4 rows
};

// Per-record smoothed calibration plus four rank-quartile summaries after
// trimming to the 10th..90th percentile of the predicted distribution.
CalibrationCurve calibration_plot_data(const std::vector<double>& preds,
                                       const std::vector<double>& times,
                                       const std::vector<int>& events, double t);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

// IPCW-weighted ROC sweep; endpoints (0,0) and (1,1); trapezoid area equals
// ipcw_auc on the same input.
std::vector<RocPoint> roc_curve_data(const std::vector<double>& risks,
                                     const std::vector<double>& times,
                                     const std::vector<int>& events, double t);

struct BootstrapCi {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t skipped = 0; // resamples where the metric was undefined
};

// Percentile bootstrap over resampled index sets.  The metric receives the
// indices of one resample and may throw MetricUndefinedError, which skips
// that resample; more than half skipped fails the interval.
BootstrapCi bootstrap_ci(const std::function<double(const std::vector<std::size_t>&)>& metric,
                         std::size_t n, std::size_t b, std::uint64_t seed);

// Type-7 (linear interpolation) quantile of already-sorted values.
double quantile_sorted(const std::vector<double>& sorted, double q);

} // namespace survtk
