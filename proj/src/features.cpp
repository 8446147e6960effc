#include "survtk/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace survtk {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double binomial(int n, int k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

double normalize(double x, double lo, double hi) {
    if (hi <= lo) return 0.5; // constant training column
    return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
}

void push_continuous(std::vector<double>& out, std::optional<double> x, const EncoderSpec& spec,
                     double lo, double hi) {
    std::size_t width = spec.bernstein ? static_cast<std::size_t>(spec.degree) + 1 : 1;
    if (!x) {
        out.insert(out.end(), width, kNaN);
        return;
    }
    double z = normalize(*x, lo, hi);
    if (spec.bernstein) {
        auto b = bernstein_basis(z, spec.degree);
        out.insert(out.end(), b.begin(), b.end());
    } else {
        out.push_back(z);
    }
}

std::optional<double> nodes_value(const PatientRecord& r) {
    if (r.node_count) return static_cast<double>(*r.node_count);
    if (r.nodal_stage) {
        static const double map[4] = {0.0, 2.0, 7.0, 10.0};
        return map[static_cast<std::size_t>(*r.nodal_stage)];
    }
    return std::nullopt;
}

void push_indicator(std::vector<double>& out, std::optional<int> x) {
    out.push_back(x ? static_cast<double>(*x) : kNaN);
}

} // namespace

std::vector<double> bernstein_basis(double x01, int degree) {
    if (degree < 1) throw ConfigError("bernstein degree must be at least 1");
    if (!(x01 >= 0.0 && x01 <= 1.0))
        throw DataError("bernstein input outside [0,1]");
    std::vector<double> b(static_cast<std::size_t>(degree) + 1);
    for (int k = 0; k <= degree; ++k)
        b[static_cast<std::size_t>(k)] =
            binomial(degree, k) * std::pow(x01, k) * std::pow(1.0 - x01, degree - k);
    return b;
}

EncoderSpec EncoderSpec::fit(const Cohort& train, bool bernstein, int degree) {
    if (train.records.empty()) throw DataError("encoder fit needs a nonempty cohort");
    if (degree < 1) throw ConfigError("bernstein degree must be at least 1");
    EncoderSpec s;
    s.bernstein = bernstein;
    s.degree = degree;
    s.age_min = std::numeric_limits<double>::infinity();
    s.age_max = -std::numeric_limits<double>::infinity();
    s.size_min = std::numeric_limits<double>::infinity();
    s.size_max = -std::numeric_limits<double>::infinity();
    bool any_size = false;
    for (const auto& r : train.records) {
        s.age_min = std::min(s.age_min, r.age);
        s.age_max = std::max(s.age_max, r.age);
        if (r.size_mm) {
            any_size = true;
            s.size_min = std::min(s.size_min, *r.size_mm);
            s.size_max = std::max(s.size_max, *r.size_mm);
        }
    }
    if (!any_size) throw DataError("encoder fit saw no observed size_mm");
    return s;
}

std::vector<std::string> EncoderSpec::feature_names() const {
    std::vector<std::string> names;
    auto block = [&](const std::string& base) {
        if (bernstein)
            for (int k = 0; k <= degree; ++k) names.push_back(base + "_b" + std::to_string(k));
        else
            names.push_back(base);
    };
    block("age");
    block("size");
    names.push_back("nodes");
    names.push_back("lat_left");
    names.push_back("lat_right");
    names.push_back("lat_bilateral");
    names.push_back("grade_1");
    names.push_back("grade_2");
    names.push_back("grade_3");
    names.push_back("er");
    names.push_back("pr");
    names.push_back("radiotherapy");
    names.push_back("chemotherapy");
    names.push_back("trastuzumab");
    return names;
}

std::size_t EncoderSpec::dim() const {
    std::size_t width = bernstein ? static_cast<std::size_t>(degree) + 1 : 1;
    return 2 * width + 12;
}

std::string EncoderSpec::to_json() const {
    nlohmann::ordered_json j;
    j["version"] = version;
    j["bernstein"] = bernstein;
    j["degree"] = degree;
    j["age_min"] = age_min;
    j["age_max"] = age_max;
    j["size_min"] = size_min;
    j["size_max"] = size_max;
    return j.dump();
}

EncoderSpec EncoderSpec::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("encoder spec is not valid JSON: ") + e.what());
    }
    EncoderSpec s;
    try {
        if (j.at("version").get<int>() != s.version)
            throw SchemaError("unsupported encoder spec version");
        s.bernstein = j.at("bernstein").get<bool>();
        s.degree = j.at("degree").get<int>();
        s.age_min = j.at("age_min").get<double>();
        s.age_max = j.at("age_max").get<double>();
        s.size_min = j.at("size_min").get<double>();
        s.size_max = j.at("size_max").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("encoder spec field error: ") + e.what());
    }
    if (s.degree < 1) throw SchemaError("encoder spec degree must be at least 1");
    return s;
}

bool FeatureVector::missing(std::size_t i) const { return std::isnan(values[i]); }

FeatureVector encode(const PatientRecord& r, const EncoderSpec& spec) {
    FeatureVector out;
    out.values.reserve(spec.dim());
    push_continuous(out.values, r.age, spec, spec.age_min, spec.age_max);
    push_continuous(out.values, r.size_mm, spec, spec.size_min, spec.size_max);

    auto nodes = nodes_value(r);
    out.values.push_back(nodes ? *nodes : kNaN);

    if (r.laterality) {
        out.values.push_back(*r.laterality == Laterality::left ? 1.0 : 0.0);
        out.values.push_back(*r.laterality == Laterality::right ? 1.0 : 0.0);
        out.values.push_back(*r.laterality == Laterality::bilateral ? 1.0 : 0.0);
    } else {
        out.values.insert(out.values.end(), 3, kNaN);
    }
    if (r.grade) {
        for (int g = 1; g <= 3; ++g) out.values.push_back(*r.grade == g ? 1.0 : 0.0);
    } else {
        out.values.insert(out.values.end(), 3, kNaN);
    }
    push_indicator(out.values, r.er);
    push_indicator(out.values, r.pr);
    push_indicator(out.values, r.radiotherapy);
    push_indicator(out.values, r.chemotherapy);
    push_indicator(out.values, r.trastuzumab);
    return out;
}

bool FeatureMatrix::missing_at(std::size_t row, std::size_t col) const {
    return std::isnan(at(row, col));
}

FeatureMatrix encode_cohort(const Cohort& c, const EncoderSpec& spec) {
    FeatureMatrix out;
    out.n = c.size();
    out.m = spec.dim();
    out.names = spec.feature_names();
    out.data.reserve(out.n * out.m);
    out.times.reserve(out.n);
    out.events.reserve(out.n);
    for (const auto& r : c.records) {
        FeatureVector v = encode(r, spec);
        out.data.insert(out.data.end(), v.values.begin(), v.values.end());
        out.times.push_back(r.time);
        out.events.push_back(r.event);
    }
    return out;
}

} // namespace survtk
