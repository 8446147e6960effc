#include "survtk/explain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "survtk/error.hpp"
#include "survtk/parallel.hpp"
#include "survtk/rng.hpp"

namespace survtk {
namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void assign_feature(PatientRecord& dst, const PatientRecord& src, std::size_t j) {
    switch (j) {
        case 0: dst.age = src.age; break;
        case 1: dst.size_mm = src.size_mm; break;
        case 2:
            dst.nodal_stage = src.nodal_stage;
            dst.node_count = src.node_count;
            break;
        case 3: dst.laterality = src.laterality; break;
        case 4: dst.er = src.er; break;
        case 5: dst.pr = src.pr; break;
        case 6: dst.grade = src.grade; break;
        case 7: dst.radiotherapy = src.radiotherapy; break;
        case 8: dst.chemotherapy = src.chemotherapy; break;
        case 9: dst.trastuzumab = src.trastuzumab; break;
        default: throw ConfigError("unknown attribution feature index");
    }
}

template <typename T>
double opt_value(const std::optional<T>& v) {
    return v ? static_cast<double>(*v) : kNan;
}

double feature_value(const PatientRecord& r, std::size_t j) {
    switch (j) {
        case 0: return r.age;
        case 1: return opt_value(r.size_mm);
        case 2: return r.node_count ? static_cast<double>(*r.node_count) : opt_value(r.nodal_stage);
        case 3: return r.laterality ? static_cast<double>(*r.laterality) : kNan;
        case 4: return opt_value(r.er);
        case 5: return opt_value(r.pr);
        case 6: return opt_value(r.grade);
        case 7: return opt_value(r.radiotherapy);
        case 8: return opt_value(r.chemotherapy);
        case 9: return opt_value(r.trastuzumab);
        default: throw ConfigError("unknown attribution feature index");
    }
}

} // namespace

const std::vector<std::string>& shap_feature_names() {
    static const std::vector<std::string> names = {
        "age",   "size",  "nodes",        "laterality",   "er",
        "pr",    "grade", "radiotherapy", "chemotherapy", "trastuzumab"};
    return names;
}

std::size_t shap_feature_count() { return shap_feature_names().size(); }

ShapResult shap_values(const PredictFn& f, const PatientRecord& x, const Cohort& background,
                       std::size_t m, std::uint64_t seed) {
    if (m < 1) throw ConfigError("attribution needs at least one sample");
    if (background.size() == 0) throw DataError("attribution background is empty");

    const std::size_t d = shap_feature_count();
    ShapResult out;
    out.features = shap_feature_names();
    out.phi.assign(d, 0.0);
    out.values.resize(d);
    for (std::size_t j = 0; j < d; ++j) out.values[j] = feature_value(x, j);
    out.m = m;

    out.fx = f(x);
    if (!std::isfinite(out.fx))
        throw DataError("the model cannot predict the record being explained");

    double base = 0.0;
    std::size_t base_n = 0;
    for (const PatientRecord& z : background.records) {
        const double p = f(z);
        if (std::isfinite(p)) {
            base += p;
            ++base_n;
        }
    }
    if (base_n == 0) throw DataError("the model cannot predict any background record");
    out.base_value = base / static_cast<double>(base_n);

    Rng rng(seed);
    std::vector<std::size_t> perm(d);
    std::vector<double> deltas(d);
    const std::size_t max_attempts = 20 * m + 100;
    std::size_t attempts = 0, done = 0;
    while (done < m) {
        if (++attempts > max_attempts)
            throw DataError("attribution draws keep hitting unpredictable composites");

        const std::size_t zi = static_cast<std::size_t>(rng.uniform_int(background.size()));
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = 0; i + 1 < d; ++i) {
            const std::size_t k = i + static_cast<std::size_t>(rng.uniform_int(d - i));
            std::swap(perm[i], perm[k]);
        }

        PatientRecord comp = background.records[zi];
        double prev = f(comp);
        bool ok = std::isfinite(prev);
        for (std::size_t i = 0; i < d && ok; ++i) {
            assign_feature(comp, x, perm[i]);
            const double cur = f(comp);
            ok = std::isfinite(cur);
            deltas[perm[i]] = cur - prev;
            prev = cur;
        }
        if (!ok) {
            ++out.skipped;
            continue;
        }
        for (std::size_t j = 0; j < d; ++j) out.phi[j] += deltas[j];
        ++done;
    }
    for (double& p : out.phi) p /= static_cast<double>(m);
    return out;
}

std::vector<ShapResult> shap_cohort(const PredictFn& f, const Cohort& explain,
                                    const Cohort& background, std::size_t m, std::uint64_t seed,
                                    std::size_t n_threads) {
    std::vector<ShapResult> out(explain.size());
    const Rng root(seed);
    parallel_for(
        explain.size(),
        [&](std::size_t i) {
            out[i] = shap_values(f, explain.records[i], background, m, root.derive(i).next_u64());
        },
        n_threads);
    return out;
}

Cohort sample_background(const Cohort& train, std::size_t cap, std::uint64_t seed) {
    if (cap == 0) throw ConfigError("background cap must be positive");
    Cohort out;
    out.horizon = train.horizon;
    out.provenance = train.provenance;
    if (train.size() <= cap) {
        out.records = train.records;
        return out;
    }
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = 0; i < cap; ++i) {
        const std::size_t k = i + static_cast<std::size_t>(rng.uniform_int(idx.size() - i));
        std::swap(idx[i], idx[k]);
    }
    out.records.reserve(cap);
    for (std::size_t i = 0; i < cap; ++i) out.records.push_back(train.records[idx[i]]);
    return out;
}

ShapSummary shap_summary(const std::vector<ShapResult>& results) {
    if (results.empty()) throw DataError("no attribution results to summarize");
    const std::size_t d = results.front().features.size();
    for (const ShapResult& r : results)
        if (r.features.size() != d || r.phi.size() != d)
            throw DataError("attribution results disagree on the feature set");

    std::vector<double> mean_abs(d, 0.0);
    for (const ShapResult& r : results)
        for (std::size_t j = 0; j < d; ++j) mean_abs[j] += std::abs(r.phi[j]);
    for (double& v : mean_abs) v /= static_cast<double>(results.size());

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return mean_abs[a] > mean_abs[b]; });

    ShapSummary s;
    for (const std::size_t j : order) {
        s.features.push_back(results.front().features[j]);
        s.mean_abs_shap.push_back(mean_abs[j]);
    }
    s.phi_matrix.reserve(results.size());
    s.value_matrix.reserve(results.size());
    for (const ShapResult& r : results) {
        std::vector<double> phi_row, val_row;
        phi_row.reserve(d);
        val_row.reserve(d);
        for (const std::size_t j : order) {
            phi_row.push_back(r.phi[j]);
            val_row.push_back(r.values[j]);
        }
        s.phi_matrix.push_back(std::move(phi_row));
        s.value_matrix.push_back(std::move(val_row));
    }
    return s;
}

std::string shap_summary_csv(const ShapSummary& s) {
    std::ostringstream out;
    out << "feature,mean_abs_shap,rank\n";
    out.precision(17);
    for (std::size_t j = 0; j < s.features.size(); ++j)
        out << s.features[j] << ',' << s.mean_abs_shap[j] << ',' << j + 1 << '\n';
    return out.str();
}

std::string shap_matrix_csv(const ShapSummary& s) {
    std::ostringstream out;
    out << "record,feature,phi,value\n";
    out.precision(17);
    for (std::size_t i = 0; i < s.phi_matrix.size(); ++i)
        for (std::size_t j = 0; j < s.features.size(); ++j) {
            out << i << ',' << s.features[j] << ',' << s.phi_matrix[i][j] << ',';
            if (std::isfinite(s.value_matrix[i][j])) out << s.value_matrix[i][j];
            out << '\n';
        }
    return out.str();
}

} // namespace survtk
