#pragma once

#include <string>
#include <vector>

#include "survtk/baseline.hpp"
#include "survtk/cohort.hpp"
#include "survtk/optimize.hpp"

namespace survtk {

struct EnsembleWeights {
    double w_baseline = 1.0 / 3.0;
    double w_forest = 1.0 / 3.0;
    double w_boost = 1.0 / 3.0;

    // throws unless every weight lies in [0, 1] and the sum is 1 within 1e-9
    void validate() const;
};

// Aligned per-record component predictions on one cohort.
struct ComponentPredictions {
    std::vector<SurvivalPrediction> baseline, forest, boost;

    std::size_t size() const { return forest.size(); }
    void validate() const;
};

SurvivalPrediction wrap_valid(double prob, const std::string& tag);

// Convex combination over the valid components.  An invalid component's
// weight is redistributed over the others in proportion to their weights;
// should the valid components carry no weight at all they share equally.
SurvivalPrediction combine(const SurvivalPrediction& baseline, const SurvivalPrediction& forest,
                           const SurvivalPrediction& boost, const EnsembleWeights& w);

std::vector<SurvivalPrediction> combine_all(const ComponentPredictions& preds,
                                            const EnsembleWeights& w);

struct WeightSearchResult {
    EnsembleWeights weights;
    double objective = 0.0; // achieved value, ici or auc as requested
    std::size_t evals = 0;
};

// Expected-improvement search over the weight simplex through a two-parameter
// stick-breaking box.  The three single-model vertices and the centroid are
// always part of the initial design, so the winner never scores worse than
// any individual component on the tuning data.
WeightSearchResult search_weights(const Cohort& tune, const ComponentPredictions& preds,
                                  TuneObjective objective, double t, const BOConfig& bo);

} // namespace survtk
