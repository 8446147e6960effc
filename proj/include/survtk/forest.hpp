#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survtk/cohort.hpp"
#include "survtk/features.hpp"
#include "survtk/step_function.hpp"

namespace survtk {

enum class SplitRule { logrank, logrankscore };

SplitRule parse_split_rule(const std::string& name);
const char* split_rule_name(SplitRule r);

struct ForestHyperparams {
    std::size_t ntree = 1000;
    std::size_t mtry = 4;
    std::size_t nodesize = 5;
    SplitRule splitrule = SplitRule::logrank;

    void validate() const;
};

// Standardized two-sample log-rank statistic, absolute value: |O - E| / sqrt(V)
// with the hypergeometric variance summed over pooled event times.  Zero when
// the variance vanishes (no events, or one side always empty at risk).
double logrank_statistic(const std::vector<double>& times_left, const std::vector<int>& events_left,
                         const std::vector<double>& times_right,
                         const std::vector<int>& events_right);

// Rank-score variant: log-rank scores a_i = delta_i - CHF(T_i) computed on the
// pooled sample, statistic |sum_L a - n_L mean(a)| / sqrt(n_L (1 - n_L/n) s^2).
double logrank_score_statistic(const std::vector<double>& times_left,
                               const std::vector<int>& events_left,
                               const std::vector<double>& times_right,
                               const std::vector<int>& events_right);

struct TreeNode {
    std::int32_t feature = -1; // -1 marks a terminal
    double threshold = 0.0;
    bool missing_left = true;
    std::int32_t left = -1;
    std::int32_t right = -1;
    StepFunction chf; // terminal cumulative hazard
};

struct FittedTree {
    std::vector<TreeNode> nodes; // node 0 is the root
};

struct FittedForest {
    ForestHyperparams hp;
    EncoderSpec encoder;
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::vector<FittedTree> trees;
    // bootstrap multiplicities per tree and training row; kept in memory for
    // out-of-bag evaluation, not serialized
    std::vector<std::vector<std::uint16_t>> inbag;
};

// Bootstrap ensemble with per-tree derived RNG streams; trees fit in
// parallel.  Missing values at each node take the direction that maximizes
// the split statistic, recorded on the node.
FittedForest fit_forest(const Cohort& train, const ForestHyperparams& hp, std::uint64_t seed,
                        bool bernstein = true);

// Mean terminal cumulative hazard across trees, returned as exp(-mean CHF(t)).
double forest_predict(const FittedForest& f, const PatientRecord& r, double t);
std::vector<double> forest_predict_cohort(const FittedForest& f, const Cohort& c, double t);

// Per-record survival using only trees whose bootstrap excluded the record.
// A record present in every bootstrap (vanishingly rare beyond a few trees)
// falls back to the full ensemble.
std::vector<double> oob_survival(const FittedForest& f, const Cohort& train, double t);

std::string forest_to_json(const FittedForest& f);
FittedForest forest_from_json(const std::string& text);
void save_forest(const FittedForest& f, const std::string& path);
FittedForest load_forest(const std::string& path);

} // namespace survtk
