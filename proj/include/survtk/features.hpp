#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survtk/cohort.hpp"

namespace survtk {

// B_k(x) = C(d,k) x^k (1-x)^{d-k} for k = 0..d.  Throws outside [0,1];
// callers clamp after min-max normalization.
std::vector<double> bernstein_basis(double x01, int degree = 3);

// Column layout fitted on training data.  Age and tumor size are min-max
// normalized with training bounds (out-of-range values clamp) and then
// Bernstein-expanded; the expansion replaces the raw column.  With the
// expansion off both stay single normalized columns.
struct EncoderSpec {
    int version = 1;
    bool bernstein = true;
    int degree = 3;
    double age_min = 0.0, age_max = 1.0;
    double size_min = 0.0, size_max = 1.0;

    static EncoderSpec fit(const Cohort& train, bool bernstein = true, int degree = 3);

    std::vector<std::string> feature_names() const;
    std::size_t dim() const;

    std::string to_json() const;
    static EncoderSpec from_json(const std::string& text);
};

// Missing entries are quiet NaN; the tree learners route them explicitly.
struct FeatureVector {
    std::vector<double> values;

    bool missing(std::size_t i) const;
};

FeatureVector encode(const PatientRecord& r, const EncoderSpec& spec);

// Row-major n x dim matrix of encoded records plus the outcome columns.
struct FeatureMatrix {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<double> data; // row-major, NaN marks missing
    std::vector<std::string> names;
    std::vector<double> times;
    std::vector<int> events;

    double at(std::size_t row, std::size_t col) const { return data[row * m + col]; }
    bool missing_at(std::size_t row, std::size_t col) const;
};

FeatureMatrix encode_cohort(const Cohort& c, const EncoderSpec& spec);

} // namespace survtk
