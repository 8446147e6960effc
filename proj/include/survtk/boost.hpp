#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "survtk/cohort.hpp"
#include "survtk/features.hpp"
#include "survtk/step_function.hpp"

namespace survtk {

struct BoostHyperparams {
    double eta = 0.1;
    std::size_t max_depth = 2;
    double subsample = 1.0;
    double colsample_bytree = 1.0;
    double lambda = 0.1; // L2 penalty on leaf weights
    std::size_t nrounds = 500;

    void validate() const;
};

// Gradient and diagonal Hessian of the Breslow negative log partial
// likelihood with respect to per-record scores.  The gradient sums to zero;
// the Hessian entries are nonnegative.
std::pair<std::vector<double>, std::vector<double>> cox_grad_hess(
    const std::vector<double>& scores, const std::vector<double>& times,
    const std::vector<int>& events);

// Baseline cumulative hazard at the given scores: jumps d_k / sum_{R_k} e^s
// at each distinct event time.
StepFunction breslow_baseline(const std::vector<double>& times, const std::vector<int>& events,
                              const std::vector<double>& scores);

struct BoostNode {
    std::int32_t feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    bool missing_left = true;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double weight = 0.0; // leaf value, learning rate already applied
};

struct BoostTree {
    std::vector<BoostNode> nodes; // node 0 is the root
};

struct FittedBooster {
    BoostHyperparams hp;
    EncoderSpec encoder;
    std::uint64_t seed = 0;
    std::size_t n_train = 0;
    std::vector<BoostTree> trees;
    StepFunction h0; // Breslow baseline on the training fold
    // training negative log partial likelihood after each round; in-memory
    // diagnostic, not serialized
    std::vector<double> train_nll;
};

// Newton-style boosting on the Cox objective: each round fits one tree to
// (grad, hess), leaf weight -G/(H + lambda) shrunk by eta, with row and
// column subsampling and learned per-split missing directions.
FittedBooster fit_booster(const Cohort& train, const BoostHyperparams& hp, std::uint64_t seed,
                          bool bernstein = true);

// Sum of leaf weights over all trees: the record's log relative hazard.
double booster_score(const FittedBooster& m, const PatientRecord& r);

// S(t|x) = exp(-H0(t) e^score)
double booster_predict(const FittedBooster& m, const PatientRecord& r, double t);
std::vector<double> booster_predict_cohort(const FittedBooster& m, const Cohort& c, double t);

std::string booster_to_json(const FittedBooster& m);
FittedBooster booster_from_json(const std::string& text);
void save_booster(const FittedBooster& m, const std::string& path);
FittedBooster load_booster(const std::string& path);

} // namespace survtk
