#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "survtk/baseline.hpp"
#include "survtk/boost.hpp"
#include "survtk/cohort.hpp"
#include "survtk/ensemble.hpp"
#include "survtk/forest.hpp"
#include "survtk/optimize.hpp"
#include "survtk/rebalance.hpp"

namespace survtk {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Hyperparameter value sets swept by grid_search.  Defaults give 72 forest
// configurations and 32 boosting configurations.
struct GridSpec {
    std::vector<std::size_t> rsf_ntree{500, 1000, 1500};
    std::vector<std::size_t> rsf_mtry{3, 4, 6};
    std::vector<std::size_t> rsf_nodesize{3, 5, 10, 15};
    std::vector<SplitRule> rsf_splitrule{SplitRule::logrank, SplitRule::logrankscore};

    std::vector<double> xgb_eta{0.05, 0.1};
    std::vector<std::size_t> xgb_max_depth{2, 5};
    std::vector<double> xgb_subsample{0.6, 1.0};
    std::vector<double> xgb_colsample{0.6, 1.0};
    std::vector<double> xgb_lambda{0.05, 0.1};
    std::vector<std::size_t> xgb_nrounds{500};

    void validate() const;
};

// Rows in canonical order, smallest capacity first, so an exact score tie
// resolves toward the smaller model: tree count ascending before anything
// else, then depth/mtry ascending, regularization stronger-first.
std::vector<ForestHyperparams> enumerate_rsf_grid(const GridSpec& g);
std::vector<BoostHyperparams> enumerate_xgb_grid(const GridSpec& g);

struct ExperimentConfig {
    int version = 1;

    // data source: simulate unless csv_path names an ingestion file
    GeneratorConfig generator = GeneratorConfig::ma27_like();
    std::uint64_t data_seed = 97;
    std::string csv_path;
    MappingProfile profile = MappingProfile::ma27;

    TuneObjective objective = TuneObjective::ici;
    double horizon = 5.0;

    bool rebalance = false;
    double rose_target = 0.5;
    double rose_multiplier = 1.0;

    GridSpec grid;
    std::size_t n_seeds = 10;
    std::uint64_t base_seed = 1;

    std::size_t finetune_evals = 2000;
    double finetune_step = 0.05;
    std::size_t weight_evals = 60;
    std::size_t bootstrap = 200;
    bool bernstein = true;

    std::string out_dir;      // empty keeps everything in memory
    bool save_models = true;  // write the aggregate final models under out_dir

    void validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    // FNV-1a digest of the canonical serialization, as fixed-width hex
    std::string hash() const;
};

struct MetricValue {
    std::optional<double> value;
    std::string note; // reason when absent
};

struct StratumEval {
    std::size_t n = 0;
    std::size_t events = 0;
    MetricValue ici, auc;
};

// One model scored on one evaluation cohort, stratified by whether the
// parametric baseline had its mandatory inputs.
struct ModelEval {
    std::string model;
    std::size_t n_scored = 0; // records the model produced an estimate for
    StratumEval overall, complete, incomplete;
};

struct GridChoice {
    std::size_t index = 0;     // position in the canonical grid
    double objective = 0.0;    // tuning-set score of the winner
    std::size_t evaluated = 0; // configurations scored
    std::size_t failed = 0;    // configurations that threw during fit or score
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    std::size_t n_a = 0, n_b = 0, n_c = 0;

    ForestHyperparams forest_hp;
    GridChoice forest_choice;
    BoostHyperparams boost_hp;
    GridChoice boost_choice;

    // downhill-simplex polish on A+B
    double tune_start = 0.0, tune_end = 0.0;
    std::size_t tune_evals = 0;

    // internal-stage ensemble weights, searched on B
    EnsembleWeights weights;
    double weight_objective = 0.0;

    // five models scored on the held-out C
    std::vector<ModelEval> evals;

    // full-data refits that feed the cross-seed aggregate
    BaselineParamVector final_params;
    EnsembleWeights final_weights;
};

// One protocol repetition: split, optional rebalancing of fitting folds,
// grid search (fit A, score B), refit and fine-tune on A+B, weight search
// on B, evaluation on C, then full-data refits.  Throws DataError if the
// split fails to partition the cohort.
SeedOutcome run_seed(const Cohort& full, const ExperimentConfig& cfg, std::uint64_t seed);

struct ParamVote {
    std::string name;
    std::string chosen;
    std::vector<std::pair<std::string, std::size_t>> tally; // value text, count
};

struct MetricSummary {
    std::string model, stratum, metric;
    std::size_t defined = 0; // seeds contributing a value
    double median = 0.0, q1 = 0.0, q3 = 0.0;
};

struct ExperimentReport {
    std::string version = kToolkitVersion;
    std::string config_hash;
    ExperimentConfig config;
    std::size_t n_records = 0;
    double event_rate = 0.0;

    std::vector<SeedOutcome> seeds;
    std::vector<ParamVote> forest_votes, boost_votes;
    ForestHyperparams forest_final;      // majority vote per parameter
    BoostHyperparams boost_final;
    BaselineParamVector finetuned_mean;  // coordinate average of final params
    EnsembleWeights weights_mean;        // averaged then renormalized
    std::vector<MetricSummary> summary;  // median and quartiles across seeds
};

ExperimentReport aggregate(const ExperimentConfig& cfg, const Cohort& full,
                           std::vector<SeedOutcome> seeds);

std::string report_to_json(const ExperimentReport& r);
std::string metrics_csv(const ExperimentReport& r);

// Aggregate-level deliverables: voted hyperparameters refit on the full
// cohort, averaged fine-tuned parameters, averaged weights.
struct FinalModels {
    BaselineParamVector reference;
    BaselineParamVector finetuned;
    FittedForest forest;
    FittedBooster boost;
    EnsembleWeights weights;
};

FinalModels fit_final_models(const Cohort& full, const ExperimentReport& r);

// Reads back the files run_experiment leaves in a final-model directory.
FinalModels load_final_models(const std::string& dir);

// Frozen-model scoring of one cohort, stratified like the per-seed report.
std::vector<ModelEval> evaluate_cohort(const FinalModels& m, const Cohort& c,
                                       MappingProfile profile, double horizon);
std::string evaluation_csv(const std::vector<ModelEval>& rows);

struct ExternalEval {
    std::string model;
    std::size_t n_scored = 0;
    std::size_t events = 0;
    MetricValue ici, auc;
    std::optional<double> ici_lo, ici_hi; // percentile bootstrap bounds
    std::optional<double> auc_lo, auc_hi;
};

// Scores frozen models on an external cohort; no refitting of any kind.
std::vector<ExternalEval> external_validate(const FinalModels& m, const Cohort& external,
                                            MappingProfile profile, double horizon,
                                            std::size_t bootstrap_b, std::uint64_t seed);

std::string external_csv(const std::vector<ExternalEval>& rows);

// Loads or simulates the configured cohort.
Cohort cohort_from_config(const ExperimentConfig& cfg);

// Full protocol: cohort, n_seeds repetitions, aggregation, artifacts under
// cfg.out_dir when set (report.json, metrics.csv, final models).
ExperimentReport run_experiment(const ExperimentConfig& cfg);

void save_weights(const EnsembleWeights& w, const std::string& path);
EnsembleWeights load_weights(const std::string& path);

} // namespace survtk
