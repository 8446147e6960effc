#include "survtk/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "survtk/metrics.hpp"

namespace survtk {
namespace {

constexpr int kLayoutVersion = 1;

// Reference centers for the continuous covariates.  Fixed constants rather
// than per-cohort statistics so a saved parameter vector means the same
// thing on every dataset it is applied to.
constexpr double kAgeCenter = 64.0;
constexpr double kAgeScale = 10.0;
constexpr double kSizeCenterMm = 15.0;
constexpr double kSizeScaleMm = 10.0;
constexpr double kNodesScale = 10.0;

double regimen_factor(ChemoRegimen r) {
    // third-generation regimens carry a somewhat larger effect
    return r == ChemoRegimen::taxane_or_highdose ? 1.2 : 1.0;
}

struct EtaAccumulator {
    double value = 0.0;

    void add(std::size_t param, double coeff, double x) {
        double term = coeff * x;
        if (!std::isfinite(term))
            throw NumericError(std::string("nonfinite term from parameter ") +
                               baseline_param_names()[param]);
        value += term;
    }
};

double cumulative_hazard(double log_scale, double shape, double eta, double t,
                         std::size_t scale_param) {
    double h = std::exp(log_scale) * std::pow(t, shape) * std::exp(eta);
    if (!std::isfinite(h))
        throw NumericError(std::string("nonfinite cumulative hazard from parameter ") +
                           baseline_param_names()[scale_param]);
    return h;
}

} // namespace

const std::array<const char*, kBaselineParamCount>& baseline_param_names() {
    static const std::array<const char*, kBaselineParamCount> names = {
        "bc_log_scale",    "bc_shape",      "bc_age",         "bc_age_quad",
        "bc_log_size",     "bc_size_quad",  "bc_log_nodes",   "bc_nodes",
        "bc_grade2",       "bc_grade3",     "bc_er",          "bc_pr",
        "bc_her2",         "bc_ki67",       "bc_detection",   "tx_chemo",
        "tx_hormone",      "tx_trastuzumab", "tx_radiotherapy", "tx_bisphosphonate",
        "oth_log_scale",   "oth_shape",     "oth_age",        "oth_smoker",
        "harm_heart_dose", "harm_radiotherapy",
    };
    return names;
}

void BaselineParamVector::validate() const {
    for (std::size_t i = 0; i < kBaselineParamCount; ++i)
        if (!std::isfinite(v[i]))
            throw DataError(std::string("parameter ") + baseline_param_names()[i] +
                            " is not finite");
    if (v[bp_bc_shape] <= 0.0)
        throw DataError("bc_shape must be positive");
    if (v[bp_oth_shape] <= 0.0)
        throw DataError("oth_shape must be positive");
}

BaselineParamVector BaselineParamVector::reference() {
    BaselineParamVector p;
    p[bp_bc_log_scale] = std::log(0.012);
    p[bp_bc_shape] = 1.2;
    p[bp_bc_age] = 0.25;
    p[bp_bc_age_quad] = 0.05;
    p[bp_bc_log_size] = 0.45;
    p[bp_bc_size_quad] = 0.02;
    p[bp_bc_log_nodes] = 0.55;
    p[bp_bc_nodes] = 0.05;
    p[bp_bc_grade2] = 0.30;
    p[bp_bc_grade3] = 0.65;
    p[bp_bc_er] = -0.35;
    p[bp_bc_pr] = -0.20;
    p[bp_bc_her2] = 0.25;
    p[bp_bc_ki67] = 0.15;
    p[bp_bc_detection] = -0.15;
    p[bp_tx_chemo] = -0.30;
    p[bp_tx_hormone] = -0.25;
    p[bp_tx_trastuzumab] = -0.30;
    p[bp_tx_radiotherapy] = -0.18;
    p[bp_tx_bisphosphonate] = -0.05;
    p[bp_oth_log_scale] = std::log(0.004);
    p[bp_oth_shape] = 1.0;
    p[bp_oth_age] = 0.50;
    p[bp_oth_smoker] = 0.40;
    p[bp_harm_heart_dose] = 0.04;
    p[bp_harm_radiotherapy] = 0.05;
    return p;
}

std::vector<std::string> validity_check(const BaselineInput& x) {
    std::vector<std::string> missing;
    if (!x.size_mm) missing.push_back("size_mm");
    if (!x.grade) missing.push_back("grade");
    if (!x.nodes) missing.push_back("nodes");
    if (!x.radiotherapy) missing.push_back("radiotherapy");
    if (!x.er) missing.push_back("er");
    return missing;
}

SurvivalPrediction predict_survival(const BaselineParamVector& p, const BaselineInput& x,
                                    double t) {
    if (!(t > 0.0)) throw DataError("prediction horizon must be positive");

    SurvivalPrediction out;
    out.model_tag = "baseline";
    out.missing_mandatory = validity_check(x);
    if (!out.missing_mandatory.empty()) return out;

    double nodes = *x.nodes;
    if (x.micrometastases_half_node && nodes == 1.0) nodes = 0.5;

    double z_age = (x.age - kAgeCenter) / kAgeScale;
    double z_size = (*x.size_mm - kSizeCenterMm) / kSizeScaleMm;

    EtaAccumulator bc;
    bc.add(bp_bc_age, p[bp_bc_age], z_age);
    bc.add(bp_bc_age_quad, p[bp_bc_age_quad], z_age * z_age);
    bc.add(bp_bc_log_size, p[bp_bc_log_size], std::log(*x.size_mm) - std::log(kSizeCenterMm));
    bc.add(bp_bc_size_quad, p[bp_bc_size_quad], z_size * z_size);
    bc.add(bp_bc_log_nodes, p[bp_bc_log_nodes], std::log(nodes + 1.0));
    bc.add(bp_bc_nodes, p[bp_bc_nodes], nodes / kNodesScale);
    bc.add(bp_bc_grade2, p[bp_bc_grade2], *x.grade == 2 ? 1.0 : 0.0);
    bc.add(bp_bc_grade3, p[bp_bc_grade3], *x.grade == 3 ? 1.0 : 0.0);
    bc.add(bp_bc_er, p[bp_bc_er], static_cast<double>(*x.er));
    // optional markers fall out of the score when absent
    if (x.pr) bc.add(bp_bc_pr, p[bp_bc_pr], static_cast<double>(*x.pr));
    if (x.her2) bc.add(bp_bc_her2, p[bp_bc_her2], static_cast<double>(*x.her2));
    if (x.ki67) bc.add(bp_bc_ki67, p[bp_bc_ki67], static_cast<double>(*x.ki67));
    bc.add(bp_bc_detection, p[bp_bc_detection], x.detection_mode);
    bc.add(bp_tx_chemo, p[bp_tx_chemo], x.chemo_tx * regimen_factor(x.chemo_regimen));
    bc.add(bp_tx_hormone, p[bp_tx_hormone], static_cast<double>(x.hormone_tx));
    bc.add(bp_tx_trastuzumab, p[bp_tx_trastuzumab], static_cast<double>(x.trastuzumab_tx));
    bc.add(bp_tx_radiotherapy, p[bp_tx_radiotherapy], static_cast<double>(*x.radiotherapy));
    bc.add(bp_tx_bisphosphonate, p[bp_tx_bisphosphonate],
           static_cast<double>(x.bisphosphonate_tx));

    EtaAccumulator oth;
    oth.add(bp_oth_age, p[bp_oth_age], z_age);
    oth.add(bp_oth_smoker, p[bp_oth_smoker], static_cast<double>(x.smoker));
    oth.add(bp_harm_heart_dose, p[bp_harm_heart_dose], x.heart_dose_gy);
    oth.add(bp_harm_radiotherapy, p[bp_harm_radiotherapy], static_cast<double>(*x.radiotherapy));

    double h_bc = cumulative_hazard(p[bp_bc_log_scale], p[bp_bc_shape], bc.value, t,
                                    bp_bc_log_scale);
    double h_oth = cumulative_hazard(p[bp_oth_log_scale], p[bp_oth_shape], oth.value, t,
                                     bp_oth_log_scale);

    out.prob = std::exp(-h_bc - h_oth);
    out.valid = true;
    if (x.trastuzumab_tx == 1 && x.her2 && *x.her2 == 0)
        out.model_tag = "baseline(contradictory: trastuzumab without her2)";
    return out;
}

std::string params_to_json(const BaselineParamVector& p) {
    nlohmann::ordered_json j;
    j["layout_version"] = kLayoutVersion;
    for (std::size_t i = 0; i < kBaselineParamCount; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", p[i]);
        j[baseline_param_names()[i]] = nlohmann::json::parse(buf);
    }
    return j.dump(2);
}

BaselineParamVector params_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("parameter file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaError("parameter file must be a JSON object");
    if (!j.contains("layout_version") || !j["layout_version"].is_number_integer())
        throw SchemaError("parameter file lacks layout_version");
    if (j["layout_version"].get<int>() != kLayoutVersion)
        throw SchemaError("unsupported parameter layout_version");
    if (j.size() != kBaselineParamCount + 1)
        throw SchemaError("parameter file must hold exactly 26 named entries");

    BaselineParamVector p;
    for (std::size_t i = 0; i < kBaselineParamCount; ++i) {
        const char* name = baseline_param_names()[i];
        if (!j.contains(name))
            throw SchemaError(std::string("parameter file lacks entry ") + name);
        if (!j[name].is_number())
            throw SchemaError(std::string("parameter ") + name + " must be a number");
        p[i] = j[name].get<double>();
    }
    p.validate();
    return p;
}

void save_params(const BaselineParamVector& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << params_to_json(p) << '\n';
    if (!out) throw IoError("failed writing " + path);
}

BaselineParamVector load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return params_from_json(ss.str());
}

TuneObjective parse_objective(const std::string& name) {
    if (name == "ici") return TuneObjective::ici;
    if (name == "auc") return TuneObjective::auc;
    throw ConfigError("unknown objective '" + name + "' (expected ici or auc)");
}

const char* objective_name(TuneObjective o) {
    return o == TuneObjective::ici ? "ici" : "auc";
}

FineTuneResult fine_tune(const BaselineParamVector& p0, const Cohort& train,
                         TuneObjective objective, double t, const NMConfig& nm,
                         MappingProfile profile) {
    if (train.records.empty()) throw DataError("fine_tune needs a nonempty cohort");
    p0.validate();

    std::vector<BaselineInput> inputs;
    std::vector<double> times;
    std::vector<int> events;
    inputs.reserve(train.size());
    for (const auto& r : train.records) {
        BaselineInput x = map_to_baseline_input(r, profile);
        if (!validity_check(x).empty()) continue;
        inputs.push_back(std::move(x));
        times.push_back(r.time);
        events.push_back(r.event);
    }
    std::size_t n_events = 0;
    for (int e : events) n_events += static_cast<std::size_t>(e);
    if (n_events < 2)
        throw FitError("fine_tune needs at least 2 events among records with valid inputs");

    auto evaluate = [&](const std::vector<double>& theta) {
        BaselineParamVector p;
        std::copy(theta.begin(), theta.end(), p.v.begin());
        if (p[bp_bc_shape] <= 0.0 || p[bp_oth_shape] <= 0.0)
            return std::numeric_limits<double>::infinity();
        std::vector<double> preds(inputs.size());
        try {
            for (std::size_t i = 0; i < inputs.size(); ++i)
                preds[i] = predict_survival(p, inputs[i], t).prob;
            if (objective == TuneObjective::ici) return ici(preds, times, events, t);
            for (double& v : preds) v = 1.0 - v; // survival to failure risk
            return -ipcw_auc(preds, times, events, t);
        } catch (const NumericError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    NMConfig cfg = nm;
    if (cfg.initial_step.empty()) {
        cfg.initial_step.assign(kBaselineParamCount, 0.05);
        for (std::size_t i : {bp_bc_log_scale, bp_bc_shape, bp_oth_log_scale, bp_oth_shape})
            cfg.initial_step[i] = 0.25;
    }

    std::vector<double> x0(p0.v.begin(), p0.v.end());
    NMResult r = nelder_mead(evaluate, x0, cfg);

    FineTuneResult out;
    std::copy(r.x.begin(), r.x.end(), out.params.v.begin());
    out.objective_start = evaluate(x0);
    out.objective_end = r.fx;
    out.trace = std::move(r.trace);
    out.evals = r.evals;
    return out;
}

std::vector<SurvivalPrediction> baseline_predictions(const BaselineParamVector& p,
                                                     const Cohort& c, MappingProfile profile,
                                                     double t) {
    std::vector<SurvivalPrediction> out;
    out.reserve(c.size());
    for (const auto& r : c.records)
        out.push_back(predict_survival(p, map_to_baseline_input(r, profile), t));
    return out;
}

} // namespace survtk
