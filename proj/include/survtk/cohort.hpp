#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "survtk/error.hpp"
#include "survtk/rng.hpp"

namespace survtk {

enum class NodalStage { n0, n1, n2, n3 };
enum class Laterality { left, right, bilateral };
enum class ChemoRegimen { none, standard_anthracycline, taxane_or_highdose };

// One subject.  Optional fields model explicit missingness: downstream
// encoders and resamplers treat absence structurally instead of imputing.
struct PatientRecord {
    double age = 0.0;
    std::optional<NodalStage> nodal_stage;
    std::optional<int> node_count;
    std::optional<Laterality> laterality;
    std::optional<int> er;
    std::optional<int> pr;
    std::optional<double> size_mm;
    std::optional<int> grade;
    std::optional<int> radiotherapy;
    std::optional<int> chemotherapy;
    std::optional<int> trastuzumab;
    double time = 0.0; // years, > 0
    int event = 0;     // 1 = cause-specific death within the horizon
};

struct Cohort {
    std::vector<PatientRecord> records;
    double horizon = 5.0; // years
    std::string provenance;

    std::size_t size() const { return records.size(); }
    std::size_t count_events() const;
};

// Inputs of the parametric survival model after variable mapping.
struct BaselineInput {
    int year_dx = 2003;
    double age = 0.0;
    int postmenopausal = 1;
    int smoker = 0;
    std::optional<int> er;
    std::optional<int> pr;
    std::optional<int> her2;
    std::optional<int> ki67;
    std::optional<double> size_mm;
    std::optional<int> grade;
    double detection_mode = 0.0; // 0 symptomatic, 1 screen, 0.5 imputed
    std::optional<double> nodes;
    int micrometastases_half_node = 0;
    std::optional<int> radiotherapy;
    double heart_dose_gy = 0.0;
    int hormone_tx = 1;
    int chemo_tx = 0;
    int trastuzumab_tx = 0;
    int bisphosphonate_tx = 0;
    ChemoRegimen chemo_regimen = ChemoRegimen::none;
};

// Source conventions for variable mapping.  They differ in how node counts
// and chemotherapy regimens are filled in when the source lacks detail.
enum class MappingProfile { ma27, seer, team };

MappingProfile parse_mapping_profile(const std::string& name);
const char* mapping_profile_name(MappingProfile p);

struct IngestResult {
    Cohort cohort;
    std::size_t dropped_nonpositive_time = 0;
    std::size_t censored_beyond_horizon = 0; // events past the horizon, recoded as censored at horizon
};

// Reads the documented CSV layout; empty cells become missing fields.
// Rows with time <= 0 are dropped and counted.
IngestResult ingest_csv(const std::string& path, double horizon = 5.0);

// Same parser on an in-memory document (ingest_csv delegates here).
IngestResult ingest_csv_text(const std::string& text, double horizon, const std::string& provenance);

BaselineInput map_to_baseline_input(const PatientRecord& r, MappingProfile profile);

struct SplitTriple {
    Cohort train_a;
    Cohort test_b;
    Cohort valid_c;
    std::uint64_t seed = 0;
    // positions in the parent cohort, for leakage assertions
    std::vector<std::size_t> idx_a, idx_b, idx_c;
};

// Uniform random 60/20/20 partition driven solely by the seed.  The leftover
// records after flooring go to A first, then B.
SplitTriple split_cohort(const Cohort& c, std::uint64_t seed);

// Categorical level probabilities for the synthetic sampler.
struct CategoricalSpec {
    std::vector<double> probs; // sums to 1
};

struct GeneratorConfig {
    int version = 1;
    std::size_t n = 7563;
    double horizon = 5.0;
    double event_rate_target = 0.025;
    double censor_rate = 0.2; // fraction with a uniform early-censoring time

    // covariate marginals
    double age_mean = 64.2, age_sd = 9.6, age_min = 30.0, age_max = 95.0;
    double log_size_mean = 2.708, log_size_sd = 0.514, size_min = 1.0, size_max = 120.0;
    CategoricalSpec nodal_stage{{0.719, 0.217, 0.048, 0.016}};
    CategoricalSpec laterality{{0.501, 0.484, 0.015}};
    double p_er = 0.993;
    double p_pr = 0.820;
    CategoricalSpec grade{{0.320, 0.505, 0.175}};
    double p_radiotherapy = 0.711;
    double p_chemotherapy = 0.308;
    double p_trastuzumab = 0.035;

    // true log-hazard coefficients on transformed covariates
    double beta_age = 0.3;      // per (age - 64)/10
    double beta_log_size = 0.5; // per unit of ln(size) - ln(15)
    double beta_nodes = 0.6;    // per unit of ln(nodes + 1)
    double beta_grade2 = 0.3;
    double beta_grade3 = 0.7;
    double beta_er = -0.4;
    double beta_pr = -0.2;
    double beta_chemo = -0.3;
    double beta_trastuzumab = -0.3;
    double beta_radiotherapy = -0.2;
    double weibull_shape = 1.2;

    // per-field missingness rates and the share of each field's missingness
    // driven by a record-level shared uniform (1 = fully nested)
    double miss_size = 0.0;
    double miss_grade = 0.0;
    double miss_radiotherapy = 0.0;
    double miss_trastuzumab = 0.0;
    double miss_pr = 0.0;
    double missing_correlation = 1.0;

    void validate() const;

    // Marginals and missingness patterned on the trial-like cohort tables.
    static GeneratorConfig ma27_like();

    std::string to_json() const;
    static GeneratorConfig from_json(const std::string& text);
};

struct SyntheticCohort {
    Cohort cohort;
    // event-process survival at the horizon, the calibration oracle
    std::vector<double> true_survival;
    double calibrated_log_scale = 0.0; // baseline log-scale after event-rate calibration
};

SyntheticCohort generate_synthetic(const GeneratorConfig& config, std::uint64_t seed);

// Serializes a cohort back to the ingestion CSV layout.
std::string cohort_to_csv(const Cohort& c);

} // namespace survtk
