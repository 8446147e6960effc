#include <doctest.h>

#include <cmath>

#include "survtk/features.hpp"
#include "survtk/rng.hpp"

using namespace survtk;

namespace {

Cohort small_cohort() {
    Cohort c;
    PatientRecord a;
    a.age = 40.0;
    a.size_mm = 10.0;
    a.nodal_stage = NodalStage::n0;
    a.laterality = Laterality::left;
    a.er = 1;
    a.pr = 0;
    a.grade = 1;
    a.radiotherapy = 1;
    a.chemotherapy = 0;
    a.trastuzumab = 0;
    a.time = 5.0;
    PatientRecord b = a;
    b.age = 80.0;
    b.size_mm = 50.0;
    b.nodal_stage = NodalStage::n2;
    b.laterality = Laterality::right;
    b.grade = 3;
    c.records = {a, b};
    return c;
}

} // namespace

TEST_SUITE("features") {

TEST_CASE("bernstein basis endpoints and midpoint") {
    auto b0 = bernstein_basis(0.0);
    REQUIRE(b0.size() == 4);
    CHECK(b0[0] == 1.0);
    CHECK(b0[1] == 0.0);
    CHECK(b0[2] == 0.0);
    CHECK(b0[3] == 0.0);

    auto b1 = bernstein_basis(1.0);
    CHECK(b1[0] == 0.0);
    CHECK(b1[3] == 1.0);

    auto bm = bernstein_basis(0.5);
    CHECK(bm[0] == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(bm[1] == doctest::Approx(0.375).epsilon(1e-15));
    CHECK(bm[2] == doctest::Approx(0.375).epsilon(1e-15));
    CHECK(bm[3] == doctest::Approx(0.125).epsilon(1e-15));

    CHECK_THROWS_AS(bernstein_basis(-0.01), DataError);
    CHECK_THROWS_AS(bernstein_basis(1.01), DataError);
    CHECK_THROWS_AS(bernstein_basis(std::nan("")), DataError);
    CHECK_THROWS_AS(bernstein_basis(0.5, 0), ConfigError);
}

TEST_CASE("bernstein basis sums to one") {
    Rng rng(5);
    for (int degree : {1, 2, 3, 5, 8}) {
        for (int rep = 0; rep < 200; ++rep) {
            double x = rng.uniform01();
            auto b = bernstein_basis(x, degree);
            REQUIRE(b.size() == static_cast<std::size_t>(degree) + 1);
            double sum = 0.0;
            for (double v : b) {
                CHECK(v >= 0.0);
                sum += v;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("encoder fit takes bounds from training data") {
    Cohort c = small_cohort();
    EncoderSpec spec = EncoderSpec::fit(c);
    CHECK(spec.age_min == 40.0);
    CHECK(spec.age_max == 80.0);
    CHECK(spec.size_min == 10.0);
    CHECK(spec.size_max == 50.0);

    CHECK_THROWS_AS(EncoderSpec::fit(Cohort{}), DataError);
    Cohort no_size = c;
    for (auto& r : no_size.records) r.size_mm.reset();
    CHECK_THROWS_AS(EncoderSpec::fit(no_size), DataError);
}

TEST_CASE("training minimum maps to the first basis vector") {
    Cohort c = small_cohort();
    EncoderSpec spec = EncoderSpec::fit(c);
    FeatureVector v = encode(c.records[0], spec);
    REQUIRE(v.values.size() == spec.dim());
    CHECK(v.values[0] == 1.0); // age block starts the row
    CHECK(v.values[1] == 0.0);
    CHECK(v.values[2] == 0.0);
    CHECK(v.values[3] == 0.0);
}

TEST_CASE("values beyond the training range clamp before expansion") {
    EncoderSpec spec = EncoderSpec::fit(small_cohort());
    PatientRecord r = small_cohort().records[0];
    r.age = 99.0; // above the training max of 80
    FeatureVector v = encode(r, spec);
    CHECK(v.values[0] == 0.0);
    CHECK(v.values[3] == 1.0);
}

TEST_CASE("missing size drops the whole block") {
    EncoderSpec spec = EncoderSpec::fit(small_cohort());
    PatientRecord r = small_cohort().records[0];
    r.size_mm.reset();
    FeatureVector v = encode(r, spec);
    for (std::size_t i = 4; i < 8; ++i) CHECK(v.missing(i)); // size block follows age
    CHECK_FALSE(v.missing(0));
}

TEST_CASE("categoricals expand to level indicators with missing propagation") {
    EncoderSpec spec = EncoderSpec::fit(small_cohort());
    auto names = spec.feature_names();
    auto idx = [&](const std::string& n) {
        return static_cast<std::size_t>(
            std::find(names.begin(), names.end(), n) - names.begin());
    };

    PatientRecord r = small_cohort().records[1]; // right-sided, grade 3
    FeatureVector v = encode(r, spec);
    CHECK(v.values[idx("lat_left")] == 0.0);
    CHECK(v.values[idx("lat_right")] == 1.0);
    CHECK(v.values[idx("lat_bilateral")] == 0.0);
    CHECK(v.values[idx("grade_3")] == 1.0);
    CHECK(v.values[idx("grade_1")] == 0.0);
    CHECK(v.values[idx("nodes")] == 7.0); // N2 maps to 7

    r.grade.reset();
    r.laterality.reset();
    r.nodal_stage.reset();
    r.node_count.reset();
    FeatureVector w = encode(r, spec);
    for (const char* n : {"grade_1", "grade_2", "grade_3", "lat_left", "lat_right",
                          "lat_bilateral", "nodes"})
        CHECK(w.missing(idx(n)));
}

TEST_CASE("node count takes precedence over stage") {
    EncoderSpec spec = EncoderSpec::fit(small_cohort());
    PatientRecord r = small_cohort().records[0];
    r.nodal_stage = NodalStage::n2;
    r.node_count = 4;
    FeatureVector v = encode(r, spec);
    auto names = spec.feature_names();
    std::size_t i = static_cast<std::size_t>(
        std::find(names.begin(), names.end(), "nodes") - names.begin());
    CHECK(v.values[i] == 4.0);
}

TEST_CASE("encoding is deterministic and names align with dim") {
    Cohort c = small_cohort();
    EncoderSpec spec = EncoderSpec::fit(c);
    CHECK(spec.feature_names().size() == spec.dim());
    CHECK(spec.dim() == 20);

    FeatureVector a = encode(c.records[0], spec);
    FeatureVector b = encode(c.records[0], spec);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (std::isnan(a.values[i]))
            CHECK(std::isnan(b.values[i]));
        else
            CHECK(a.values[i] == b.values[i]);
    }
}

TEST_CASE("raw mode keeps single normalized columns") {
    Cohort c = small_cohort();
    EncoderSpec spec = EncoderSpec::fit(c, false);
    CHECK(spec.dim() == 14);
    FeatureVector v = encode(c.records[1], spec);
    CHECK(v.values[0] == 1.0); // age 80 at the training max
    CHECK(v.values[1] == 1.0); // size 50 at the training max
}

TEST_CASE("encoder spec json round trip") {
    EncoderSpec spec = EncoderSpec::fit(small_cohort(), true, 3);
    EncoderSpec back = EncoderSpec::from_json(spec.to_json());
    CHECK(back.bernstein == spec.bernstein);
    CHECK(back.degree == spec.degree);
    CHECK(back.age_min == spec.age_min);
    CHECK(back.age_max == spec.age_max);
    CHECK(back.size_min == spec.size_min);
    CHECK(back.size_max == spec.size_max);

    CHECK_THROWS_AS(EncoderSpec::from_json("nope"), SchemaError);
    CHECK_THROWS_AS(EncoderSpec::from_json("{\"version\": 1}"), SchemaError);
}

TEST_CASE("cohort encoding carries outcomes through") {
    Cohort c = small_cohort();
    c.records[0].event = 1;
    c.records[0].time = 2.5;
    EncoderSpec spec = EncoderSpec::fit(c);
    FeatureMatrix fm = encode_cohort(c, spec);
    CHECK(fm.n == 2);
    CHECK(fm.m == spec.dim());
    CHECK(fm.times[0] == 2.5);
    CHECK(fm.events[0] == 1);
    CHECK(fm.at(0, 0) == 1.0);
    CHECK(fm.names == spec.feature_names());
}

} // TEST_SUITE
