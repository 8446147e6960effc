#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "survtk/cohort.hpp"

namespace survtk {

// Horizon survival probability for one record; NaN marks a prediction the
// model cannot make (the parametric baseline with mandatory fields missing).
using PredictFn = std::function<double(const PatientRecord&)>;

// The record-level variables attributions are computed over.  Nodal stage and
// count move together as one clinical quantity.
const std::vector<std::string>& shap_feature_names();
std::size_t shap_feature_count();

struct ShapResult {
    std::vector<std::string> features;
    std::vector<double> phi;    // probability units
    std::vector<double> values; // numeric feature values of x, NaN when missing
    double base_value = 0.0;    // mean prediction over the background
    double fx = 0.0;
    std::size_t m = 0;
    std::size_t skipped = 0; // draws discarded because a composite was unpredictable
};

// Monte Carlo permutation attribution: each draw pairs a random feature
// order with a random background record, walks the composites from the
// background record to x, and credits every step's change to the feature
// flipped.  Draws touching an unpredictable composite are resampled.
ShapResult shap_values(const PredictFn& f, const PatientRecord& x, const Cohort& background,
                       std::size_t m, std::uint64_t seed);

std::vector<ShapResult> shap_cohort(const PredictFn& f, const Cohort& explain,
                                    const Cohort& background, std::size_t m, std::uint64_t seed,
                                    std::size_t n_threads = 0);

// Up to cap records drawn without replacement.
Cohort sample_background(const Cohort& train, std::size_t cap, std::uint64_t seed);

struct ShapSummary {
    std::vector<std::string> features; // ranked, largest mean |phi| first
    std::vector<double> mean_abs_shap;
    // per record, aligned with the ranked feature order
    std::vector<std::vector<double>> phi_matrix;
    std::vector<std::vector<double>> value_matrix;
};

ShapSummary shap_summary(const std::vector<ShapResult>& results);

std::string shap_summary_csv(const ShapSummary& s);
std::string shap_matrix_csv(const ShapSummary& s);

} // namespace survtk
