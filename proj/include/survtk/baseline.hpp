#pragma once

#include <array>
#include <string>
#include <vector>

#include "survtk/cohort.hpp"
#include "survtk/optimize.hpp"

namespace survtk {

// Index layout of the 26 tunable parameters.  Two competing causes, each
// with a Weibull-type baseline exp(a) * t^b scaled by exp(eta).
enum BaselineParam : std::size_t {
    bp_bc_log_scale = 0,
    bp_bc_shape = 1,
    bp_bc_age = 2,
    bp_bc_age_quad = 3,
    bp_bc_log_size = 4,
    bp_bc_size_quad = 5,
    bp_bc_log_nodes = 6,
    bp_bc_nodes = 7,
    bp_bc_grade2 = 8,
    bp_bc_grade3 = 9,
    bp_bc_er = 10,
    bp_bc_pr = 11,
    bp_bc_her2 = 12,
    bp_bc_ki67 = 13,
    bp_bc_detection = 14,
    bp_tx_chemo = 15,
    bp_tx_hormone = 16,
    bp_tx_trastuzumab = 17,
    bp_tx_radiotherapy = 18,
    bp_tx_bisphosphonate = 19,
    bp_oth_log_scale = 20,
    bp_oth_shape = 21,
    bp_oth_age = 22,
    bp_oth_smoker = 23,
    bp_harm_heart_dose = 24,
    bp_harm_radiotherapy = 25,
};

constexpr std::size_t kBaselineParamCount = 26;

const std::array<const char*, kBaselineParamCount>& baseline_param_names();

struct BaselineParamVector {
    std::array<double, kBaselineParamCount> v{};

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    // throws on nonfinite entries or nonpositive shapes
    void validate() const;

    // The stand-in pretrained parameterization shipped with the toolkit.
    // Directions follow the usual prognostic signs (more nodes, larger size,
    // higher grade increase hazard; adjuvant treatments decrease it).
    static BaselineParamVector reference();
};

struct SurvivalPrediction {
    double prob = 0.0;
    bool valid = false;
    std::vector<std::string> missing_mandatory;
    std::string model_tag;
};

// Names of the mandatory inputs absent from x: any of size_mm, grade, nodes,
// radiotherapy, er.  Empty means a survival estimate is possible.
std::vector<std::string> validity_check(const BaselineInput& x);

// Survival to horizon t under the two-cause model
//   S(t|x) = exp(-H_bc(t|x) - H_oth(t|x)),  H_c = exp(a_c) t^{b_c} exp(eta_c).
// Missing PR/Ki-67/HER2 contribute nothing to eta; missing mandatory fields
// yield an invalid prediction instead.
SurvivalPrediction predict_survival(const BaselineParamVector& p, const BaselineInput& x, double t);

void save_params(const BaselineParamVector& p, const std::string& path);
BaselineParamVector load_params(const std::string& path);
std::string params_to_json(const BaselineParamVector& p);
BaselineParamVector params_from_json(const std::string& text);

enum class TuneObjective { ici, auc };

TuneObjective parse_objective(const std::string& name);
const char* objective_name(TuneObjective o);

struct FineTuneResult {
    BaselineParamVector params;
    double objective_start = 0.0; // objective at p0 (ICI, or negated AUC)
    double objective_end = 0.0;
    std::vector<double> trace; // best-so-far per evaluation
    std::size_t evals = 0;
};

// Re-optimizes all 26 parameters on the training cohort with the downhill
// simplex, scoring only records whose inputs pass the validity check.
// Parameter vectors that violate the shape invariants score +inf.
FineTuneResult fine_tune(const BaselineParamVector& p0, const Cohort& train, TuneObjective objective,
                         double t, const NMConfig& nm, MappingProfile profile = MappingProfile::ma27);

// Convenience: mapped + predicted for every record of a cohort.
std::vector<SurvivalPrediction> baseline_predictions(const BaselineParamVector& p, const Cohort& c,
                                                     MappingProfile profile, double t);

} // namespace survtk
