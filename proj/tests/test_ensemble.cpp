#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "survtk/cohort.hpp"
#include "survtk/ensemble.hpp"
#include "survtk/error.hpp"
#include "survtk/metrics.hpp"
#include "survtk/rng.hpp"

using namespace survtk;

namespace {

SurvivalPrediction invalid_pred(double prob) {
    SurvivalPrediction p;
    p.prob = prob;
    p.valid = false;
    p.missing_mandatory = {"size_mm"};
    return p;
}

EnsembleWeights weights_of(double b, double f, double x) {
    EnsembleWeights w;
    w.w_baseline = b;
    w.w_forest = f;
    w.w_boost = x;
    return w;
}

struct TuneSetup {
    SyntheticCohort sc;
    std::vector<double> times;
    std::vector<int> events;
};

TuneSetup make_tune(std::uint64_t seed) {
    GeneratorConfig cfg;
    cfg.n = 1500;
    cfg.event_rate_target = 0.15;
    TuneSetup s{generate_synthetic(cfg, seed), {}, {}};
    for (const PatientRecord& r : s.sc.cohort.records) {
        s.times.push_back(r.time);
        s.events.push_back(r.event);
    }
    return s;
}

double ici_at(const TuneSetup& s, const ComponentPredictions& preds, const EnsembleWeights& w) {
    std::vector<double> probs(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        probs[i] = combine(preds.baseline[i], preds.forest[i], preds.boost[i], w).prob;
    return ici(probs, s.times, s.events, 5.0);
}

} // namespace

TEST_SUITE("ensemble") {

TEST_CASE("weight validation enforces the unit simplex") {
    CHECK_NOTHROW(EnsembleWeights{}.validate());
    CHECK_NOTHROW(weights_of(1.0, 0.0, 0.0).validate());
    CHECK_THROWS_AS(weights_of(0.5, 0.3, 0.1).validate(), ConfigError);
    CHECK_THROWS_AS(weights_of(-0.1, 0.6, 0.5).validate(), ConfigError);
    CHECK_THROWS_AS(weights_of(1.1, -0.05, -0.05).validate(), ConfigError);
}

TEST_CASE("a degenerate weight passes its component through") {
    const SurvivalPrediction out = combine(wrap_valid(0.93, "baseline"), wrap_valid(0.5, "forest"),
                                           wrap_valid(0.1, "boost"), weights_of(1.0, 0.0, 0.0));
    CHECK(out.prob == 0.93);
    CHECK(out.valid);
    CHECK(out.model_tag == "ensemble");
}

TEST_CASE("an invalid component hands its weight to the others proportionally") {
    const EnsembleWeights w = weights_of(0.5, 0.3, 0.2);
    const SurvivalPrediction out =
        combine(invalid_pred(0.1), wrap_valid(0.9, "forest"), wrap_valid(0.8, "boost"), w);
    CHECK(out.prob == doctest::Approx(0.86).epsilon(1e-12));

    // the skipped value plays no part
    const SurvivalPrediction other =
        combine(invalid_pred(0.99), wrap_valid(0.9, "forest"), wrap_valid(0.8, "boost"), w);
    CHECK(other.prob == out.prob);
}

TEST_CASE("agreement among components survives any weighting") {
    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        const double p = rng.uniform01();
        double a = rng.uniform01(), b = rng.uniform01(), c = rng.uniform01();
        const double s = a + b + c;
        a /= s;
        b /= s;
        c /= s;
        const SurvivalPrediction out = combine(wrap_valid(p, "baseline"), wrap_valid(p, "forest"),
                                               wrap_valid(p, "boost"), weights_of(a, b, c));
        CHECK(out.prob == doctest::Approx(p).epsilon(1e-12));
    }
}

TEST_CASE("combined probabilities stay inside the valid component range") {
    Rng rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        const double pb = rng.uniform01(), pf = rng.uniform01(), px = rng.uniform01();
        double a = rng.uniform01(), b = rng.uniform01(), c = rng.uniform01();
        const double s = a + b + c;
        const bool bv = rng.uniform01() < 0.7;
        SurvivalPrediction base = bv ? wrap_valid(pb, "baseline") : invalid_pred(pb);
        const SurvivalPrediction out = combine(base, wrap_valid(pf, "forest"),
                                               wrap_valid(px, "boost"), weights_of(a / s, b / s, c / s));
        double lo = std::min(pf, px), hi = std::max(pf, px);
        if (bv) {
            lo = std::min(lo, pb);
            hi = std::max(hi, pb);
        }
        CHECK(out.prob >= lo - 1e-12);
        CHECK(out.prob <= hi + 1e-12);
    }
}

TEST_CASE("weight stranded on invalid components is shared equally") {
    const SurvivalPrediction out = combine(invalid_pred(0.2), wrap_valid(0.9, "forest"),
                                           wrap_valid(0.7, "boost"), weights_of(1.0, 0.0, 0.0));
    CHECK(out.prob == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("combining nothing valid is an error") {
    CHECK_THROWS_AS((void)combine(invalid_pred(0.2), invalid_pred(0.3), invalid_pred(0.4),
                                  EnsembleWeights{}),
                    DataError);
}

TEST_CASE("aligned vectors combine row by row and misaligned ones are rejected") {
    ComponentPredictions preds;
    preds.baseline = {wrap_valid(0.9, "b"), invalid_pred(0.0)};
    preds.forest = {wrap_valid(0.8, "f"), wrap_valid(0.6, "f")};
    preds.boost = {wrap_valid(0.7, "x"), wrap_valid(0.4, "x")};
    const auto out = combine_all(preds, EnsembleWeights{});
    REQUIRE(out.size() == 2);
    CHECK(out[0].prob == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(out[1].prob == doctest::Approx(0.5).epsilon(1e-12));

    preds.boost.pop_back();
    CHECK_THROWS_AS((void)combine_all(preds, EnsembleWeights{}), DataError);
    CHECK_THROWS_AS((void)combine_all(ComponentPredictions{}, EnsembleWeights{}), DataError);
}

TEST_CASE("the search leans on a truthful component and beats a fine weight grid") {
    const TuneSetup s = make_tune(71);
    const std::size_t n = s.sc.cohort.size();

    Rng rng(123);
    ComponentPredictions preds;
    for (std::size_t i = 0; i < n; ++i) {
        preds.baseline.push_back(wrap_valid(s.sc.true_survival[i], "baseline"));
        preds.forest.push_back(wrap_valid(rng.uniform01(), "forest"));
        preds.boost.push_back(wrap_valid(rng.uniform01(), "boost"));
    }

    BOConfig bo;
    bo.seed = 5;
    const WeightSearchResult r = search_weights(s.sc.cohort, preds, TuneObjective::ici, 5.0, bo);
    CHECK(r.weights.w_baseline >= 0.8);
    CHECK(r.evals >= bo.total_evals);

    // independent lattice over the simplex agrees on where the mass belongs
    double grid_best = 1e300;
    EnsembleWeights grid_w;
    for (int i = 0; i <= 50; ++i) {
        for (int j = 0; j <= 50 - i; ++j) {
            const EnsembleWeights w =
                weights_of(i / 50.0, j / 50.0, (50 - i - j) / 50.0);
            const double v = ici_at(s, preds, w);
            if (v < grid_best) {
                grid_best = v;
                grid_w = w;
            }
        }
    }
    CHECK(grid_w.w_baseline >= 0.8);
    CHECK(r.objective <= grid_best + 0.002);
}

TEST_CASE("identical components leave the objective flat along their exchange") {
    const TuneSetup s = make_tune(71);
    const std::size_t n = s.sc.cohort.size();

    Rng rng(321);
    ComponentPredictions preds;
    for (std::size_t i = 0; i < n; ++i) {
        const double info =
            std::clamp(s.sc.true_survival[i] + 0.1 * rng.normal(), 0.0, 1.0);
        preds.baseline.push_back(wrap_valid(rng.uniform01(), "baseline"));
        preds.forest.push_back(wrap_valid(info, "forest"));
        preds.boost.push_back(wrap_valid(info, "boost"));
    }

    // swapping mass between the twin components changes nothing
    const double a = ici_at(s, preds, weights_of(0.2, 0.5, 0.3));
    const double b = ici_at(s, preds, weights_of(0.2, 0.3, 0.5));
    CHECK(a == doctest::Approx(b).epsilon(1e-12));

    BOConfig bo;
    bo.seed = 5;
    const WeightSearchResult r = search_weights(s.sc.cohort, preds, TuneObjective::ici, 5.0, bo);

    // the twins make the search one dimensional, so a fine line grid is an oracle
    double grid_best = 1e300;
    for (int k = 0; k <= 100; ++k) {
        grid_best = std::min(grid_best, ici_at(s, preds, weights_of(k / 100.0, 1.0 - k / 100.0, 0.0)));
    }
    CHECK(std::abs(r.objective - grid_best) <= 0.002);
}

TEST_CASE("the winner never scores worse than any single model") {
    const TuneSetup s = make_tune(77);
    const std::size_t n = s.sc.cohort.size();

    Rng rng(55);
    ComponentPredictions preds;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = s.sc.true_survival[i];
        preds.baseline.push_back(wrap_valid(std::clamp(t + 0.15 * rng.normal(), 0.0, 1.0), "b"));
        preds.forest.push_back(wrap_valid(std::clamp(t + 0.1 * rng.normal(), 0.0, 1.0), "f"));
        preds.boost.push_back(wrap_valid(std::clamp(t * 0.9 + 0.05, 0.0, 1.0), "x"));
    }

    BOConfig bo;
    bo.seed = 17;
    const WeightSearchResult r = search_weights(s.sc.cohort, preds, TuneObjective::ici, 5.0, bo);
    CHECK(r.objective <= ici_at(s, preds, weights_of(1, 0, 0)) + 1e-12);
    CHECK(r.objective <= ici_at(s, preds, weights_of(0, 1, 0)) + 1e-12);
    CHECK(r.objective <= ici_at(s, preds, weights_of(0, 0, 1)) + 1e-12);

    const WeightSearchResult again = search_weights(s.sc.cohort, preds, TuneObjective::ici, 5.0, bo);
    CHECK(again.weights.w_baseline == r.weights.w_baseline);
    CHECK(again.weights.w_forest == r.weights.w_forest);
    CHECK(again.weights.w_boost == r.weights.w_boost);
}

TEST_CASE("discrimination can drive the search instead of calibration") {
    const TuneSetup s = make_tune(99);
    const std::size_t n = s.sc.cohort.size();

    Rng rng(71);
    ComponentPredictions preds;
    for (std::size_t i = 0; i < n; ++i) {
        preds.baseline.push_back(wrap_valid(s.sc.true_survival[i], "b"));
        preds.forest.push_back(wrap_valid(rng.uniform01(), "f"));
        preds.boost.push_back(wrap_valid(rng.uniform01(), "x"));
    }
    BOConfig bo;
    bo.seed = 3;
    bo.total_evals = 40;
    const WeightSearchResult r = search_weights(s.sc.cohort, preds, TuneObjective::auc, 5.0, bo);
    CHECK(r.weights.w_baseline >= 0.8);
    CHECK(r.objective > 0.6);
}

TEST_CASE("searching without events is rejected") {
    Cohort flat;
    ComponentPredictions preds;
    for (int i = 0; i < 60; ++i) {
        PatientRecord r;
        r.age = 60;
        r.time = 5.0;
        r.event = 0;
        flat.records.push_back(r);
        preds.baseline.push_back(wrap_valid(0.9, "b"));
        preds.forest.push_back(wrap_valid(0.9, "f"));
        preds.boost.push_back(wrap_valid(0.9, "x"));
    }
    CHECK_THROWS_AS((void)search_weights(flat, preds, TuneObjective::ici, 5.0, BOConfig{}),
                    MetricUndefinedError);

    // prediction rows must line up with the cohort
    preds.boost.pop_back();
    CHECK_THROWS_AS((void)search_weights(flat, preds, TuneObjective::ici, 5.0, BOConfig{}),
                    DataError);
}

} // TEST_SUITE
