#include "survtk/ensemble.hpp"

#include <cmath>

#include "survtk/error.hpp"
#include "survtk/metrics.hpp"

namespace survtk {
namespace {

// (u, v) in the unit square onto the weight simplex; v splits boost from the
// rest, u splits baseline from forest
EnsembleWeights from_square(double u, double v) {
    EnsembleWeights w;
    w.w_baseline = u * v;
    w.w_forest = (1.0 - u) * v;
    w.w_boost = 1.0 - v;
    return w;
}

} // namespace

void EnsembleWeights::validate() const {
    for (const double w : {w_baseline, w_forest, w_boost})
        if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("ensemble weights must lie in [0, 1]");
    if (std::abs(w_baseline + w_forest + w_boost - 1.0) > 1e-9)
        throw ConfigError("ensemble weights must sum to 1");
}

void ComponentPredictions::validate() const {
    if (forest.empty()) throw DataError("component predictions are empty");
    if (baseline.size() != forest.size() || boost.size() != forest.size())
        throw DataError("component prediction lengths differ");
}

SurvivalPrediction wrap_valid(double prob, const std::string& tag) {
    SurvivalPrediction p;
    p.prob = prob;
    p.valid = true;
    p.model_tag = tag;
    return p;
}

SurvivalPrediction combine(const SurvivalPrediction& baseline, const SurvivalPrediction& forest,
                           const SurvivalPrediction& boost, const EnsembleWeights& w) {
    w.validate();
    const SurvivalPrediction* preds[3] = {&baseline, &forest, &boost};
    const double weights[3] = {w.w_baseline, w.w_forest, w.w_boost};

    double mass = 0.0, acc = 0.0;
    std::size_t n_valid = 0;
    for (int i = 0; i < 3; ++i) {
        if (!preds[i]->valid) continue;
        ++n_valid;
        mass += weights[i];
        acc += weights[i] * preds[i]->prob;
    }
    if (n_valid == 0) throw DataError("no valid component predictions to combine");

    SurvivalPrediction out;
    out.valid = true;
    out.model_tag = "ensemble";
    if (mass > 0.0) {
        out.prob = acc / mass;
    } else {
        // the weight vector put everything on invalid components
        for (int i = 0; i < 3; ++i)
            if (preds[i]->valid) out.prob += preds[i]->prob;
        out.prob /= static_cast<double>(n_valid);
    }
    return out;
}

std::vector<SurvivalPrediction> combine_all(const ComponentPredictions& preds,
                                            const EnsembleWeights& w) {
    preds.validate();
    std::vector<SurvivalPrediction> out;
    out.reserve(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        out.push_back(combine(preds.baseline[i], preds.forest[i], preds.boost[i], w));
    return out;
}

WeightSearchResult search_weights(const Cohort& tune, const ComponentPredictions& preds,
                                  TuneObjective objective, double t, const BOConfig& bo) {
    preds.validate();
    if (preds.size() != tune.size())
        throw DataError("component predictions do not match the tuning cohort");
    if (tune.count_events() == 0)
        throw MetricUndefinedError("weight search needs events in the tuning cohort");

    std::vector<double> times(tune.size());
    std::vector<int> events(tune.size());
    for (std::size_t i = 0; i < tune.size(); ++i) {
        times[i] = tune.records[i].time;
        events[i] = tune.records[i].event;
    }

    const auto score = [&](const std::vector<double>& x) {
        const EnsembleWeights w = from_square(x[0], x[1]);
        std::vector<double> probs(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i)
            probs[i] = combine(preds.baseline[i], preds.forest[i], preds.boost[i], w).prob;
        if (objective == TuneObjective::auc) {
            for (double& p : probs) p = 1.0 - p;
            return ipcw_auc(probs, times, events, t);
        }
        return -ici(probs, times, events, t);
    };

    BOConfig cfg = bo;
    cfg.dim = 2;
    cfg.lower = {0.0, 0.0};
    cfg.upper = {1.0, 1.0};
    cfg.seeded_points.push_back({1.0, 1.0}); // all baseline
    cfg.seeded_points.push_back({0.0, 1.0}); // all forest
    cfg.seeded_points.push_back({0.5, 0.0}); // all boost
    cfg.seeded_points.push_back({0.5, 2.0 / 3.0});

    const BOResult r = bayes_opt_maximize(score, cfg);
    WeightSearchResult out;
    out.weights = from_square(r.x[0], r.x[1]);
    out.objective = objective == TuneObjective::auc ? r.fx : -r.fx;
    out.evals = r.eval_f.size();
    return out;
}

} // namespace survtk
