#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "survtk/baseline.hpp"
#include "survtk/cohort.hpp"
#include "survtk/error.hpp"
#include "survtk/explain.hpp"
#include "survtk/forest.hpp"
#include "survtk/rng.hpp"

using namespace survtk;

namespace {

PatientRecord full_record(double age, double size, int nodes, int er, int pr) {
    PatientRecord r;
    r.age = age;
    r.size_mm = size;
    r.nodal_stage = nodes > 0 ? NodalStage::n1 : NodalStage::n0;
    r.node_count = nodes;
    r.laterality = Laterality::left;
    r.er = er;
    r.pr = pr;
    r.grade = 2;
    r.radiotherapy = 1;
    r.chemotherapy = 0;
    r.trastuzumab = 0;
    r.time = 5.0;
    r.event = 0;
    return r;
}

Cohort random_background(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Cohort bg;
    for (std::size_t i = 0; i < n; ++i)
        bg.records.push_back(full_record(40.0 + 40.0 * rng.uniform01(),
                                         5.0 + 60.0 * rng.uniform01(),
                                         static_cast<int>(rng.uniform_int(5)),
                                         rng.uniform01() < 0.5 ? 1 : 0,
                                         rng.uniform01() < 0.5 ? 1 : 0));
    return bg;
}

double bg_mean(const Cohort& bg, const std::function<double(const PatientRecord&)>& g) {
    double s = 0.0;
    for (const PatientRecord& r : bg.records) s += g(r);
    return s / static_cast<double>(bg.size());
}

double bg_sd(const Cohort& bg, const std::function<double(const PatientRecord&)>& g) {
    const double mu = bg_mean(bg, g);
    double s = 0.0;
    for (const PatientRecord& r : bg.records) {
        const double d = g(r) - mu;
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(bg.size()));
}

std::size_t feature_slot(const ShapResult& r, const std::string& name) {
    const auto it = std::find(r.features.begin(), r.features.end(), name);
    REQUIRE(it != r.features.end());
    return static_cast<std::size_t>(it - r.features.begin());
}

} // namespace

TEST_SUITE("explain") {

TEST_CASE("a constant model earns every feature exactly zero credit") {
    const Cohort bg = random_background(40, 1);
    const PredictFn f = [](const PatientRecord&) { return 0.4; };
    const ShapResult r = shap_values(f, full_record(55, 30, 2, 1, 1), bg, 50, 7);
    REQUIRE(r.phi.size() == shap_feature_count());
    for (const double p : r.phi) CHECK(p == 0.0);
    CHECK(r.fx == 0.4);
    CHECK(r.base_value == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(r.skipped == 0);
    CHECK(r.m == 50);
}

TEST_CASE("features a model ignores get exactly zero") {
    const Cohort bg = random_background(40, 2);
    const PredictFn f = [](const PatientRecord& r) { return r.age / 100.0; };
    const ShapResult r = shap_values(f, full_record(55, 30, 2, 1, 1), bg, 80, 9);
    for (std::size_t j = 0; j < r.features.size(); ++j) {
        if (r.features[j] == "age")
            CHECK(r.phi[j] != 0.0);
        else
            CHECK(r.phi[j] == 0.0);
    }
}

TEST_CASE("additive models recover their analytic attributions") {
    const Cohort bg = random_background(300, 3);
    const auto age_part = [](const PatientRecord& r) { return r.age / 100.0; };
    const auto size_part = [](const PatientRecord& r) { return *r.size_mm / 120.0; };
    const PredictFn f = [&](const PatientRecord& r) { return age_part(r) + size_part(r); };

    const PatientRecord x = full_record(72, 48, 3, 1, 0);
    const std::size_t m = 200;
    const ShapResult r = shap_values(f, x, bg, m, 11);

    const double se_age = bg_sd(bg, age_part) / std::sqrt(static_cast<double>(m));
    const double se_size = bg_sd(bg, size_part) / std::sqrt(static_cast<double>(m));
    CHECK(std::abs(r.phi[feature_slot(r, "age")] - (age_part(x) - bg_mean(bg, age_part))) <=
          3.0 * se_age);
    CHECK(std::abs(r.phi[feature_slot(r, "size")] - (size_part(x) - bg_mean(bg, size_part))) <=
          3.0 * se_size);
}

TEST_CASE("attributions add up to the distance from the base value") {
    const Cohort bg = random_background(250, 4);
    const PredictFn f = [](const PatientRecord& r) {
        const double er = r.er.value_or(0);
        return 0.3 + r.age * (*r.size_mm) / 24000.0 + 0.05 * er - 0.01 * *r.node_count;
    };
    const PatientRecord x = full_record(61, 55, 4, 1, 1);
    const std::size_t m = 200;
    const ShapResult r = shap_values(f, x, bg, m, 13);

    double total = 0.0;
    for (const double p : r.phi) total += p;
    const double se = bg_sd(bg, f) / std::sqrt(static_cast<double>(m));
    CHECK(std::abs(total - (r.fx - r.base_value)) <= 3.0 * se);
}

TEST_CASE("draws through unpredictable composites are retried and counted") {
    Rng rng(5);
    Cohort bg = random_background(60, 5);
    for (std::size_t i = 0; i < bg.size(); i += 2) bg.records[i].size_mm.reset();

    const BaselineParamVector params = BaselineParamVector::reference();
    const PredictFn f = [&](const PatientRecord& r) {
        const SurvivalPrediction p =
            predict_survival(params, map_to_baseline_input(r, MappingProfile::ma27), 5.0);
        return p.valid ? p.prob : std::numeric_limits<double>::quiet_NaN();
    };

    const ShapResult r = shap_values(f, full_record(58, 25, 1, 1, 1), bg, 60, 17);
    CHECK(r.m == 60);
    CHECK(r.skipped > 0);
    for (const double p : r.phi) CHECK(std::isfinite(p));
    CHECK(r.fx > 0.0);
    CHECK(r.fx < 1.0);

    // a record the model cannot score at all is not explainable
    PatientRecord bad = full_record(58, 25, 1, 1, 1);
    bad.size_mm.reset();
    CHECK_THROWS_AS((void)shap_values(f, bad, bg, 10, 1), DataError);
}

TEST_CASE("the same seed reproduces attributions and new seeds move them") {
    const Cohort bg = random_background(100, 6);
    const PredictFn f = [](const PatientRecord& r) { return r.age * (*r.size_mm) / 20000.0; };
    const PatientRecord x = full_record(66, 40, 2, 0, 1);
    const ShapResult a = shap_values(f, x, bg, 40, 21);
    const ShapResult b = shap_values(f, x, bg, 40, 21);
    const ShapResult c = shap_values(f, x, bg, 40, 22);
    CHECK(a.phi == b.phi);
    CHECK(a.phi != c.phi);
}

TEST_CASE("quadrupling the samples roughly halves the estimator noise") {
    const Cohort bg = random_background(150, 8);
    const PredictFn f = [](const PatientRecord& r) {
        return r.age * (*r.size_mm) / 20000.0 + 0.1 * r.er.value_or(0);
    };
    const PatientRecord x = full_record(70, 50, 1, 1, 1);

    const auto sd_at = [&](std::size_t m, std::uint64_t base) {
        std::vector<double> vals;
        for (std::uint64_t s = 0; s < 24; ++s) {
            const ShapResult r = shap_values(f, x, bg, m, base + s);
            vals.push_back(r.phi[feature_slot(r, "age")]);
        }
        double mu = 0.0;
        for (const double v : vals) mu += v;
        mu /= static_cast<double>(vals.size());
        double acc = 0.0;
        for (const double v : vals) acc += (v - mu) * (v - mu);
        return std::sqrt(acc / static_cast<double>(vals.size() - 1));
    };

    const double ratio = sd_at(50, 100) / sd_at(200, 200);
    CHECK(ratio > 1.3);
    CHECK(ratio < 3.0);
}

TEST_CASE("the dominant simulated covariate tops the ranking for a forest") {
    GeneratorConfig cfg;
    cfg.n = 900;
    cfg.event_rate_target = 0.3;
    cfg.censor_rate = 0.2;
    cfg.beta_age = 0.0;
    cfg.beta_log_size = 0.0;
    cfg.beta_nodes = 1.5;
    cfg.beta_grade2 = 0.0;
    cfg.beta_grade3 = 0.0;
    cfg.beta_er = 0.0;
    cfg.beta_pr = 0.0;
    cfg.beta_chemo = 0.0;
    cfg.beta_trastuzumab = 0.0;
    cfg.beta_radiotherapy = 0.0;
    const SyntheticCohort sc = generate_synthetic(cfg, 33);

    ForestHyperparams hp;
    hp.ntree = 80;
    hp.mtry = 6;
    hp.nodesize = 10;
    const FittedForest model = fit_forest(sc.cohort, hp, 3, false);
    const PredictFn f = [&](const PatientRecord& r) { return forest_predict(model, r, 5.0); };

    Cohort explain;
    for (std::size_t i = 0; i < 30; ++i) explain.records.push_back(sc.cohort.records[i]);
    const Cohort bg = sample_background(sc.cohort, 120, 9);
    const std::vector<ShapResult> results = shap_cohort(f, explain, bg, 60, 77);
    const ShapSummary s = shap_summary(results);
    CHECK(s.features.front() == "nodes");
}

TEST_CASE("features with interchangeable roles earn matching credit") {
    Rng rng(14);
    Cohort bg;
    for (int i = 0; i < 300; ++i)
        bg.records.push_back(full_record(60, 30, 1, rng.uniform01() < 0.5 ? 1 : 0,
                                         rng.uniform01() < 0.5 ? 1 : 0));
    const PredictFn f = [](const PatientRecord& r) {
        return 0.5 + 0.1 * r.er.value_or(0) + 0.1 * r.pr.value_or(0);
    };

    Cohort explain;
    Rng rng2(15);
    for (int i = 0; i < 40; ++i)
        explain.records.push_back(full_record(60, 30, 1, rng2.uniform01() < 0.5 ? 1 : 0,
                                              rng2.uniform01() < 0.5 ? 1 : 0));
    const std::vector<ShapResult> results = shap_cohort(f, explain, bg, 150, 19);
    const ShapSummary s = shap_summary(results);
    const auto pos = [&](const std::string& name) {
        return static_cast<std::size_t>(
            std::find(s.features.begin(), s.features.end(), name) - s.features.begin());
    };
    const double er_credit = s.mean_abs_shap[pos("er")];
    const double pr_credit = s.mean_abs_shap[pos("pr")];
    CHECK(std::abs(er_credit - pr_credit) <= 0.1 * std::max(er_credit, pr_credit));
}

TEST_CASE("summaries rank by absolute credit and serialize to csv") {
    ShapResult one;
    one.features = shap_feature_names();
    one.phi.assign(shap_feature_count(), 0.0);
    one.values.assign(shap_feature_count(), 1.0);
    one.phi[feature_slot(one, "grade")] = -0.3;
    one.phi[feature_slot(one, "age")] = 0.1;
    one.m = 10;
    one.fx = 0.7;
    one.base_value = 0.5;

    const ShapSummary s = shap_summary({one});
    CHECK(s.features[0] == "grade");
    CHECK(s.features[1] == "age");
    CHECK(s.mean_abs_shap[0] == doctest::Approx(0.3).epsilon(1e-14));

    const std::string head = shap_summary_csv(s);
    CHECK(head.rfind("feature,mean_abs_shap,rank\n", 0) == 0);
    CHECK(head.find("grade,") != std::string::npos);
    CHECK(std::count(head.begin(), head.end(), '\n') == 1 + shap_feature_count());

    const std::string mat = shap_matrix_csv(s);
    CHECK(mat.rfind("record,feature,phi,value\n", 0) == 0);
    CHECK(std::count(mat.begin(), mat.end(), '\n') == 1 + shap_feature_count());

    CHECK_THROWS_AS((void)shap_summary({}), DataError);
}

TEST_CASE("missing feature values leave empty csv cells") {
    ShapResult one;
    one.features = shap_feature_names();
    one.phi.assign(shap_feature_count(), 0.01);
    one.values.assign(shap_feature_count(), 2.0);
    one.values[feature_slot(one, "size")] = std::numeric_limits<double>::quiet_NaN();
    const std::string mat = shap_matrix_csv(shap_summary({one}));
    CHECK(mat.find("size,0.01") != std::string::npos);
    bool found_empty = false;
    std::istringstream lines(mat);
    std::string line;
    while (std::getline(lines, line))
        if (line.find(",size,") != std::string::npos && line.back() == ',') found_empty = true;
    CHECK(found_empty);
}

TEST_CASE("background sampling honors the cap and stays reproducible") {
    const Cohort train = random_background(200, 10);
    const Cohort all = sample_background(train, 500, 1);
    CHECK(all.size() == train.size());

    const Cohort some = sample_background(train, 60, 1);
    CHECK(some.size() == 60);
    const Cohort again = sample_background(train, 60, 1);
    for (std::size_t i = 0; i < 60; ++i) CHECK(some.records[i].age == again.records[i].age);

    // every sampled record exists in the source, no slot drawn twice
    std::vector<double> ages;
    for (const PatientRecord& r : some.records) ages.push_back(r.age);
    std::sort(ages.begin(), ages.end());
    CHECK(std::adjacent_find(ages.begin(), ages.end()) == ages.end());
    for (const double a : ages) {
        const bool present = std::any_of(train.records.begin(), train.records.end(),
                                         [&](const PatientRecord& r) { return r.age == a; });
        CHECK(present);
    }

    CHECK_THROWS_AS((void)sample_background(train, 0, 1), ConfigError);
}

TEST_CASE("sample counts and backgrounds are validated") {
    const Cohort bg = random_background(10, 12);
    const PredictFn f = [](const PatientRecord&) { return 0.5; };
    CHECK_THROWS_AS((void)shap_values(f, full_record(60, 30, 1, 1, 1), bg, 0, 1), ConfigError);
    CHECK_THROWS_AS((void)shap_values(f, full_record(60, 30, 1, 1, 1), Cohort{}, 10, 1), DataError);
}

} // TEST_SUITE
