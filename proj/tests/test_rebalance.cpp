#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <vector>

#include "survtk/cohort.hpp"
#include "survtk/error.hpp"
#include "survtk/rebalance.hpp"

using namespace survtk;

namespace {

SyntheticCohort imbalanced(std::size_t n, std::uint64_t seed, double event_rate = 0.025,
                           bool with_missing = true) {
    GeneratorConfig cfg = GeneratorConfig::ma27_like();
    cfg.n = n;
    cfg.event_rate_target = event_rate;
    if (!with_missing) {
        cfg.miss_size = 0.0;
        cfg.miss_grade = 0.0;
        cfg.miss_radiotherapy = 0.0;
    }
    return generate_synthetic(cfg, seed);
}

int missing_mask(const PatientRecord& r) {
    int m = 0;
    m |= !r.nodal_stage.has_value() << 0;
    m |= !r.node_count.has_value() << 1;
    m |= !r.laterality.has_value() << 2;
    m |= !r.er.has_value() << 3;
    m |= !r.pr.has_value() << 4;
    m |= !r.size_mm.has_value() << 5;
    m |= !r.grade.has_value() << 6;
    m |= !r.radiotherapy.has_value() << 7;
    m |= !r.chemotherapy.has_value() << 8;
    m |= !r.trastuzumab.has_value() << 9;
    return m;
}

using CovariateKey = std::tuple<double, double, int, int, int, int, int, int, int, int, int, int,
                                double, int>;

CovariateKey key_of(const PatientRecord& r) {
    const auto opt_int = [](const auto& o) { return o ? static_cast<int>(*o) : -1; };
    return {r.age,
            r.size_mm.value_or(-1.0),
            opt_int(r.nodal_stage),
            r.node_count.value_or(-1),
            opt_int(r.laterality),
            r.er.value_or(-1),
            r.pr.value_or(-1),
            r.grade.value_or(-1),
            r.radiotherapy.value_or(-1),
            r.chemotherapy.value_or(-1),
            r.trastuzumab.value_or(-1),
            missing_mask(r),
            r.time,
            r.event};
}

} // namespace

TEST_SUITE("rebalance") {

TEST_CASE("configuration bounds are enforced") {
    RoseConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.target = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.target = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.target = 0.5;
    cfg.multiplier = -0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("the smoothing bandwidth follows the kernel rule exactly") {
    CHECK(rose_bandwidth(100, 3, 2.0, 1.0) ==
          doctest::Approx(std::pow(4.0 / 500.0, 1.0 / 7.0) * 2.0).epsilon(1e-15));
    CHECK(rose_bandwidth(40, 2, 1.5, 0.5) ==
          doctest::Approx(0.5 * std::pow(4.0 / 160.0, 1.0 / 6.0) * 1.5).epsilon(1e-15));
    CHECK(rose_bandwidth(0, 3, 2.0, 1.0) == 0.0);
    CHECK(rose_bandwidth(100, 3, 0.0, 1.0) == 0.0);
    CHECK(rose_bandwidth(100, 3, 2.0, 0.0) == 0.0);
}

TEST_CASE("both outcome classes must be present") {
    Cohort all_censored;
    for (int i = 0; i < 20; ++i) {
        PatientRecord r;
        r.age = 50 + i;
        r.time = 5.0;
        r.event = 0;
        all_censored.records.push_back(r);
    }
    CHECK_THROWS_AS((void)rose_resample(all_censored, RoseConfig{}), DataError);
    for (auto& r : all_censored.records) r.event = 1;
    CHECK_THROWS_AS((void)rose_resample(all_censored, RoseConfig{}), DataError);
}

TEST_CASE("a rare outcome is lifted to the target share") {
    const SyntheticCohort sc = imbalanced(4000, 3);
    const double in_rate =
        static_cast<double>(sc.cohort.count_events()) / static_cast<double>(sc.cohort.size());
    CHECK(in_rate < 0.06);

    RoseConfig cfg;
    cfg.seed = 11;
    const Cohort out = rose_resample(sc.cohort, cfg);
    REQUIRE(out.size() == sc.cohort.size());
    const double events = static_cast<double>(out.count_events());
    const double sigma = std::sqrt(static_cast<double>(out.size()) * 0.25);
    CHECK(std::abs(events - 0.5 * static_cast<double>(out.size())) <= 3.0 * sigma);
}

TEST_CASE("zero multiplier degenerates to plain class resampling") {
    const SyntheticCohort sc = imbalanced(800, 7);
    std::set<CovariateKey> source;
    for (const PatientRecord& r : sc.cohort.records) source.insert(key_of(r));

    RoseConfig cfg;
    cfg.multiplier = 0.0;
    cfg.seed = 4;
    const Cohort out = rose_resample(sc.cohort, cfg);
    for (const PatientRecord& r : out.records) CHECK(source.count(key_of(r)) == 1);
}

TEST_CASE("categorical levels and missingness patterns never leave the input set") {
    const SyntheticCohort sc = imbalanced(1200, 9);
    std::set<int> masks;
    std::set<int> grades;
    for (const PatientRecord& r : sc.cohort.records) {
        masks.insert(missing_mask(r));
        if (r.grade) grades.insert(*r.grade);
    }

    RoseConfig cfg;
    cfg.seed = 13;
    cfg.size = 2400;
    const Cohort out = rose_resample(sc.cohort, cfg);
    REQUIRE(out.size() == 2400);
    for (const PatientRecord& r : out.records) {
        CHECK(masks.count(missing_mask(r)) == 1);
        if (r.grade) CHECK(grades.count(*r.grade) == 1);
        if (r.laterality)
            CHECK((*r.laterality == Laterality::left || *r.laterality == Laterality::right ||
                   *r.laterality == Laterality::bilateral));
    }
}

TEST_CASE("outcomes come from the drawn seed record, times included") {
    const SyntheticCohort sc = imbalanced(600, 15);
    std::set<double> event_times, censor_times;
    for (const PatientRecord& r : sc.cohort.records)
        (r.event ? event_times : censor_times).insert(r.time);

    RoseConfig cfg;
    cfg.seed = 2;
    const Cohort out = rose_resample(sc.cohort, cfg);
    for (const PatientRecord& r : out.records)
        CHECK((r.event ? event_times : censor_times).count(r.time) == 1);
}

TEST_CASE("smoothing spreads the numeric features without touching missing ones") {
    const SyntheticCohort sc = imbalanced(1000, 21);
    std::set<double> input_ages;
    for (const PatientRecord& r : sc.cohort.records) input_ages.insert(r.age);

    RoseConfig cfg;
    cfg.seed = 5;
    const Cohort out = rose_resample(sc.cohort, cfg);
    std::size_t fresh = 0, missing_sizes = 0;
    for (const PatientRecord& r : out.records) {
        if (!input_ages.count(r.age)) ++fresh;
        if (!r.size_mm) ++missing_sizes;
        if (r.size_mm) CHECK(*r.size_mm > 0.0);
        CHECK(r.age >= 18.0);
        if (r.node_count) CHECK(*r.node_count >= 0);
    }
    CHECK(fresh > out.size() / 2);
    CHECK(missing_sizes > 0);
}

TEST_CASE("matched target and multiplier zero behave like a bootstrap") {
    const SyntheticCohort sc = imbalanced(2000, 27, 0.3, false);
    const double in_rate =
        static_cast<double>(sc.cohort.count_events()) / static_cast<double>(sc.cohort.size());

    double mu_in = 0.0, var_in = 0.0;
    for (const PatientRecord& r : sc.cohort.records) mu_in += r.age;
    mu_in /= static_cast<double>(sc.cohort.size());
    for (const PatientRecord& r : sc.cohort.records)
        var_in += (r.age - mu_in) * (r.age - mu_in);
    var_in /= static_cast<double>(sc.cohort.size());

    RoseConfig cfg;
    cfg.target = in_rate;
    cfg.multiplier = 0.0;
    cfg.seed = 8;
    const Cohort out = rose_resample(sc.cohort, cfg);
    double mu_out = 0.0;
    for (const PatientRecord& r : out.records) mu_out += r.age;
    mu_out /= static_cast<double>(out.size());
    CHECK(std::abs(mu_out - mu_in) <= 3.0 * std::sqrt(var_in / static_cast<double>(out.size())));
}

TEST_CASE("resampling is reproducible by seed") {
    const SyntheticCohort sc = imbalanced(500, 31);
    RoseConfig cfg;
    cfg.seed = 99;
    const Cohort a = rose_resample(sc.cohort, cfg);
    const Cohort b = rose_resample(sc.cohort, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(key_of(a.records[i]) == key_of(b.records[i]));

    cfg.seed = 100;
    const Cohort c = rose_resample(sc.cohort, cfg);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (key_of(a.records[i]) != key_of(c.records[i])) any_diff = true;
    CHECK(any_diff);
}

} // TEST_SUITE
