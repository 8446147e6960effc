#include "survtk/rebalance.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "survtk/error.hpp"
#include "survtk/rng.hpp"

namespace survtk {
namespace {

// the numeric features eligible for jitter: age, size, node count
constexpr std::size_t kNumericDim = 3;

double sample_sd(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double mu = 0.0;
    for (const double x : xs) mu += x;
    mu /= static_cast<double>(xs.size());
    double acc = 0.0;
    for (const double x : xs) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

struct ClassBandwidths {
    double age = 0.0, size = 0.0, nodes = 0.0;
};

ClassBandwidths bandwidths_for(const Cohort& c, const std::vector<std::size_t>& members,
                               double multiplier) {
    std::vector<double> ages, sizes, nodes;
    for (const std::size_t i : members) {
        const PatientRecord& r = c.records[i];
        ages.push_back(r.age);
        if (r.size_mm) sizes.push_back(*r.size_mm);
        if (r.node_count) nodes.push_back(static_cast<double>(*r.node_count));
    }
    ClassBandwidths h;
    h.age = rose_bandwidth(members.size(), kNumericDim, sample_sd(ages), multiplier);
    h.size = rose_bandwidth(members.size(), kNumericDim, sample_sd(sizes), multiplier);
    h.nodes = rose_bandwidth(members.size(), kNumericDim, sample_sd(nodes), multiplier);
    return h;
}

} // namespace

void RoseConfig::validate() const {
    if (!(target > 0.0 && target < 1.0))
        throw ConfigError("rebalance target must lie strictly between 0 and 1");
    if (!(multiplier >= 0.0)) throw ConfigError("kernel multiplier must be nonnegative");
}

double rose_bandwidth(std::size_t n_class, std::size_t d, double sigma, double multiplier) {
    if (n_class == 0 || sigma <= 0.0) return 0.0;
    const double dd = static_cast<double>(d);
    return multiplier *
           std::pow(4.0 / ((dd + 2.0) * static_cast<double>(n_class)), 1.0 / (dd + 4.0)) * sigma;
}

Cohort rose_resample(const Cohort& c, const RoseConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> events, censored;
    for (std::size_t i = 0; i < c.size(); ++i)
        (c.records[i].event ? events : censored).push_back(i);
    if (events.empty() || censored.empty())
        throw DataError("rebalancing needs both outcome classes present");

    const ClassBandwidths h_event = bandwidths_for(c, events, cfg.multiplier);
    const ClassBandwidths h_censored = bandwidths_for(c, censored, cfg.multiplier);

    const std::size_t n_out = cfg.size > 0 ? cfg.size : c.size();
    Cohort out;
    out.horizon = c.horizon;
    out.provenance = c.provenance;
    out.records.reserve(n_out);

    Rng rng(cfg.seed);
    for (std::size_t k = 0; k < n_out; ++k) {
        const bool draw_event = rng.uniform01() < cfg.target;
        const auto& pool = draw_event ? events : censored;
        const ClassBandwidths& h = draw_event ? h_event : h_censored;
        PatientRecord r = c.records[pool[rng.uniform_int(pool.size())]];

        if (h.age > 0.0) r.age = std::max(18.0, r.age + h.age * rng.normal());
        if (r.size_mm && h.size > 0.0)
            r.size_mm = std::max(0.1, *r.size_mm + h.size * rng.normal());
        if (r.node_count && h.nodes > 0.0) {
            const double jittered = static_cast<double>(*r.node_count) + h.nodes * rng.normal();
            r.node_count = static_cast<int>(std::max(0.0, std::round(jittered)));
        }
        out.records.push_back(std::move(r));
    }
    return out;
}

} // namespace survtk
