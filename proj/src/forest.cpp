#include "survtk/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "survtk/metrics.hpp"
#include "survtk/parallel.hpp"
#include "survtk/rng.hpp"

namespace survtk {
namespace {

constexpr std::size_t kModelVersion = 1;

// Direct two-sample computation, shared by both public statistics and kept
// deliberately simple; tree growth uses the incremental sweep below instead.
double logrank_pair(const std::vector<double>& tl, const std::vector<int>& el,
                    const std::vector<double>& tr, const std::vector<int>& er, bool score_form) {
    if (tl.size() != el.size() || tr.size() != er.size())
        throw DataError("log-rank statistic: times and events length mismatch");
    if (tl.empty() || tr.empty()) throw DataError("log-rank statistic needs both groups nonempty");
    const std::size_t n = tl.size() + tr.size();
    std::vector<double> times;
    std::vector<int> events, left;
    times.reserve(n);
    events.reserve(n);
    left.reserve(n);
    for (std::size_t i = 0; i < tl.size(); ++i) {
        times.push_back(tl[i]);
        events.push_back(el[i]);
        left.push_back(1);
    }
    for (std::size_t i = 0; i < tr.size(); ++i) {
        times.push_back(tr[i]);
        events.push_back(er[i]);
        left.push_back(0);
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    if (score_form) {
        // rank scores a_i = delta_i - pooled CHF at T_i
        std::vector<double> a(n);
        double chf = 0.0;
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            double de = 0.0;
            while (j < n && times[order[j]] == times[order[i]]) {
                de += events[order[j]];
                ++j;
            }
            if (de > 0.0) chf += de / static_cast<double>(n - i);
            for (std::size_t k = i; k < j; ++k) a[order[k]] = events[order[k]] - chf;
            i = j;
        }
        double mean = 0.0;
        for (double v : a) mean += v;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double v : a) ss += (v - mean) * (v - mean);
        const double s2 = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
        double sum_l = 0.0;
        double n_l = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (left[k]) {
                sum_l += a[k];
                n_l += 1.0;
            }
        const double denom = n_l * (1.0 - n_l / static_cast<double>(n)) * s2;
        return denom > 1e-12 ? std::abs(sum_l - n_l * mean) / std::sqrt(denom) : 0.0;
    }

    double O = 0.0, E = 0.0, V = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        double de = 0.0, de_l = 0.0;
        while (j < n && times[order[j]] == times[order[i]]) {
            de += events[order[j]];
            if (left[order[j]]) de_l += events[order[j]];
            ++j;
        }
        if (de > 0.0) {
            const double at_risk = static_cast<double>(n - i);
            double at_risk_l = 0.0;
            for (std::size_t k = i; k < n; ++k)
                if (left[order[k]]) at_risk_l += 1.0;
            O += de_l;
            E += de * at_risk_l / at_risk;
            if (at_risk > 1.0)
                V += de * (at_risk_l / at_risk) * (1.0 - at_risk_l / at_risk) * (at_risk - de) /
                     (at_risk - 1.0);
        }
        i = j;
    }
    return V > 1e-12 ? std::abs(O - E) / std::sqrt(V) : 0.0;
}

// Full-data row orders, one per feature (value ascending, missing last) plus
// one by time.  Shared read-only across trees; a bootstrap sample inherits the
// order by repeating each row its in-bag count of times.
struct Presort {
    std::vector<std::vector<std::uint32_t>> order;

    explicit Presort(const FeatureMatrix& fm) {
        order.assign(fm.m + 1, {});
        std::vector<std::uint32_t> base(fm.n);
        for (std::size_t i = 0; i < fm.n; ++i) base[i] = static_cast<std::uint32_t>(i);
        for (std::size_t f = 0; f < fm.m; ++f) {
            order[f] = base;
            std::stable_sort(order[f].begin(), order[f].end(),
                             [&](std::uint32_t x, std::uint32_t y) {
                                 const double vx = fm.at(x, f), vy = fm.at(y, f);
                                 const bool mx = std::isnan(vx), my = std::isnan(vy);
                                 if (mx != my) return my;
                                 if (mx) return false;
                                 return vx < vy;
                             });
        }
        order[fm.m] = base;
        std::stable_sort(
            order[fm.m].begin(), order[fm.m].end(),
            [&](std::uint32_t x, std::uint32_t y) { return fm.times[x] < fm.times[y]; });
    }
};

// Pooled event-time structure of one node, with prefix sums that let the
// split sweep move one record to the left side cheaply: a record at risk
// beyond the last event time costs O(1), any other O(its event times).
struct NodeTimeTable {
    std::vector<double> etimes; // ascending distinct event times
    std::vector<double> d;      // events at e_k
    std::vector<double> nrisk;  // at risk at e_k
    std::vector<double> A;      // A[j] = sum_{k<j} d_k / n_k
    std::vector<double> w2;     // d(n-d) / ((n-1) n^2)
    std::vector<double> W2;     // W2[j] = sum_{k<j} w2_k
    std::vector<double> vconst; // vconst[j] = sum_{k<j} w2_k (n_k - 1)

    std::size_t size() const { return etimes.size(); }
};

// Left-side counts are split into `full` (rows at risk at every event time,
// the bulk under rare events) and a per-time array for the rest, so that
// n_left[k] = full + partial[k] and the variance update can use the prefix
// tables for full rows.
struct SweepState {
    std::vector<double> partial;
    double full = 0.0;
    double pw = 0.0; // sum_k w2_k partial[k]
    double O = 0.0, E = 0.0, V = 0.0;
    double score_sum = 0.0;
    double count = 0.0;

    void reset(std::size_t d) {
        partial.assign(d, 0.0);
        full = pw = 0.0;
        O = E = V = score_sum = 0.0;
        count = 0.0;
    }
};

struct SplitChoice {
    double stat = 0.0;
    std::int32_t feature = -1;
    double threshold = 0.0;
    bool missing_left = true;
    bool found = false;
};

struct TreeBuilder {
    const FeatureMatrix& fm;
    const Presort& pre;
    const ForestHyperparams& hp;
    Rng rng;
    FittedTree& tree;

    std::size_t n = 0;
    std::size_t m = 0;
    // per feature a row-id buffer sorted by value (missing last), plus one
    // extra buffer sorted by time; a node owns the same [lo, hi) in all
    std::vector<std::vector<std::uint32_t>> buf;
    std::vector<std::uint32_t> tmp;

    // node-scoped scratch indexed by feature-matrix row id; bootstrap
    // duplicates share a row id and with it identical values, so one slot
    // serves every copy
    std::vector<std::int32_t> k_row;
    std::vector<double> a_row;
    std::vector<char> go_left;

    NodeTimeTable tab;
    SweepState sweep_r, sweep_l;
    std::vector<std::uint32_t> feats;
    double score_mean = 0.0, score_s2 = 0.0;

    TreeBuilder(const FeatureMatrix& fm_, const Presort& pre_, const ForestHyperparams& hp_,
                Rng rng_, FittedTree& out)
        : fm(fm_), pre(pre_), hp(hp_), rng(rng_), tree(out) {}

    const std::vector<std::uint32_t>& time_buf() const { return buf[m]; }

    void bootstrap(std::vector<std::uint16_t>& inbag) {
        n = fm.n;
        m = fm.m;
        inbag.assign(fm.n, 0);
        for (std::size_t i = 0; i < n; ++i)
            ++inbag[static_cast<std::size_t>(rng.uniform_int(fm.n))];
        buf.assign(m + 1, {});
        for (std::size_t f = 0; f <= m; ++f) {
            buf[f].reserve(n);
            for (std::uint32_t row : pre.order[f])
                for (std::uint16_t c = 0; c < inbag[row]; ++c) buf[f].push_back(row);
        }
        tmp.resize(n);
        k_row.assign(fm.n, 0);
        if (hp.splitrule == SplitRule::logrankscore) a_row.assign(fm.n, 0.0);
        go_left.assign(fm.n, 0);
    }

    void build_table(std::size_t lo, std::size_t hi) {
        tab.etimes.clear();
        tab.d.clear();
        tab.nrisk.clear();
        const auto& tb = time_buf();
        const std::size_t nn = hi - lo;
        std::size_t i = lo;
        while (i < hi) {
            std::size_t j = i;
            double de = 0.0;
            while (j < hi && fm.times[tb[j]] == fm.times[tb[i]]) {
                de += fm.events[tb[j]];
                ++j;
            }
            if (de > 0.0) {
                tab.etimes.push_back(fm.times[tb[i]]);
                tab.d.push_back(de);
                tab.nrisk.push_back(static_cast<double>(nn - (i - lo)));
            }
            i = j;
        }
        const std::size_t dd = tab.size();
        tab.A.assign(dd + 1, 0.0);
        tab.w2.assign(dd, 0.0);
        tab.W2.assign(dd + 1, 0.0);
        tab.vconst.assign(dd + 1, 0.0);
        for (std::size_t k = 0; k < dd; ++k) {
            tab.A[k + 1] = tab.A[k] + tab.d[k] / tab.nrisk[k];
            if (tab.nrisk[k] > 1.0)
                tab.w2[k] = tab.d[k] * (tab.nrisk[k] - tab.d[k]) /
                            ((tab.nrisk[k] - 1.0) * tab.nrisk[k] * tab.nrisk[k]);
            tab.W2[k + 1] = tab.W2[k] + tab.w2[k];
            tab.vconst[k + 1] = tab.vconst[k] + tab.w2[k] * (tab.nrisk[k] - 1.0);
        }
        // per row, the count of node event times at or before its time
        std::size_t k = 0;
        for (std::size_t p = lo; p < hi; ++p) {
            const std::uint32_t row = tb[p];
            while (k < dd && tab.etimes[k] <= fm.times[row]) ++k;
            k_row[row] = static_cast<std::int32_t>(k);
        }
        if (hp.splitrule == SplitRule::logrankscore) {
            double sum = 0.0;
            for (std::size_t p = lo; p < hi; ++p) {
                const std::uint32_t row = tb[p];
                a_row[row] = fm.events[row] - tab.A[static_cast<std::size_t>(k_row[row])];
                sum += a_row[row];
            }
            score_mean = sum / static_cast<double>(nn);
            double ss = 0.0;
            for (std::size_t p = lo; p < hi; ++p) {
                const double dv = a_row[tb[p]] - score_mean;
                ss += dv * dv;
            }
            score_s2 = nn > 1 ? ss / static_cast<double>(nn - 1) : 0.0;
        }
    }

    void sweep_add(SweepState& s, std::uint32_t row) {
        s.count += 1.0;
        if (hp.splitrule == SplitRule::logrankscore) {
            s.score_sum += a_row[row];
            return;
        }
        const auto kk = static_cast<std::size_t>(k_row[row]);
        s.O += fm.events[row];
        s.E += tab.A[kk];
        if (kk == tab.size()) {
            s.V += tab.vconst[kk] - 2.0 * (s.full * tab.W2[kk] + s.pw);
            s.full += 1.0;
        } else {
            double g = 0.0;
            for (std::size_t k = 0; k < kk; ++k) {
                g += tab.w2[k] * s.partial[k];
                s.partial[k] += 1.0;
            }
            s.V += tab.vconst[kk] - 2.0 * (s.full * tab.W2[kk] + g);
            s.pw += tab.W2[kk];
        }
    }

    double sweep_stat(const SweepState& s, std::size_t n_node) const {
        if (hp.splitrule == SplitRule::logrankscore) {
            const double denom = s.count * (1.0 - s.count / static_cast<double>(n_node)) * score_s2;
            return denom > 1e-12 ? std::abs(s.score_sum - s.count * score_mean) / std::sqrt(denom)
                                 : 0.0;
        }
        return s.V > 1e-12 ? std::abs(s.O - s.E) / std::sqrt(s.V) : 0.0;
    }

    // Candidate thresholds of one feature, ascending.  Missing values are
    // tried on both sides (two running states); per threshold the better
    // direction wins, an exact tie goes left, and across thresholds and
    // features only a strictly larger statistic displaces the incumbent, so
    // ties resolve to the lowest feature index, then the lowest threshold.
    void sweep_feature(std::size_t f, std::size_t lo, std::size_t hi, std::size_t n_obs,
                       SplitChoice& best) {
        const auto& b = buf[f];
        const std::size_t nn = hi - lo;
        const std::size_t n_miss = nn - n_obs;
        sweep_r.reset(tab.size());
        if (n_miss > 0) {
            sweep_l.reset(tab.size());
            for (std::size_t p = lo + n_obs; p < hi; ++p) sweep_add(sweep_l, b[p]);
        }
        for (std::size_t p = lo; p + 1 < lo + n_obs; ++p) {
            sweep_add(sweep_r, b[p]);
            if (n_miss > 0) sweep_add(sweep_l, b[p]);
            const double v = fm.at(b[p], f);
            const double v_next = fm.at(b[p + 1], f);
            if (v == v_next) continue;
            const std::size_t obs_left = p - lo + 1;
            double stat = -1.0;
            bool ml = true;
            if (obs_left >= hp.nodesize && nn - obs_left >= hp.nodesize) {
                stat = sweep_stat(sweep_r, nn);
                ml = n_miss == 0;
            }
            if (n_miss > 0 && obs_left + n_miss >= hp.nodesize &&
                nn - obs_left - n_miss >= hp.nodesize) {
                const double stat_l = sweep_stat(sweep_l, nn);
                if (stat_l >= stat) {
                    stat = stat_l;
                    ml = true;
                }
            }
            if (stat > best.stat) {
                best.stat = stat;
                best.feature = static_cast<std::int32_t>(f);
                best.threshold = 0.5 * (v + v_next);
                best.missing_left = ml;
                best.found = true;
            }
        }
    }

    void sample_features() {
        const std::size_t take = std::min(hp.mtry, m);
        feats.resize(m);
        for (std::size_t i = 0; i < m; ++i) feats[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(m - i));
            std::swap(feats[i], feats[j]);
        }
        feats.resize(take);
        std::sort(feats.begin(), feats.end());
    }

    std::int32_t build(std::size_t lo, std::size_t hi) {
        const std::size_t nn = hi - lo;
        const auto node_id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();

        double events = 0.0;
        for (std::size_t p = lo; p < hi; ++p) events += fm.events[time_buf()[p]];
        if (nn < 2 * hp.nodesize || events == 0.0) {
            make_terminal(node_id, lo, hi);
            return node_id;
        }

        build_table(lo, hi);
        sample_features();

        SplitChoice best;
        for (const std::uint32_t f : feats) {
            const auto& b = buf[f];
            std::size_t n_obs = 0;
            while (n_obs < nn && !std::isnan(fm.at(b[lo + n_obs], f))) ++n_obs;
            if (n_obs == 0) continue;
            sweep_feature(f, lo, hi, n_obs, best);
        }
        if (!best.found) {
            make_terminal(node_id, lo, hi);
            return node_id;
        }

        std::size_t n_left = 0;
        for (std::size_t p = lo; p < hi; ++p) {
            const std::uint32_t row = time_buf()[p];
            const double v = fm.at(row, static_cast<std::size_t>(best.feature));
            const bool left = std::isnan(v) ? best.missing_left : v <= best.threshold;
            go_left[row] = left ? 1 : 0;
            n_left += left ? 1 : 0;
        }
        for (std::size_t f = 0; f <= m; ++f) {
            auto& b = buf[f];
            std::size_t l = 0, r = n_left;
            for (std::size_t p = lo; p < hi; ++p) (go_left[b[p]] ? tmp[l++] : tmp[r++]) = b[p];
            std::copy(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(nn),
                      b.begin() + static_cast<std::ptrdiff_t>(lo));
        }

        auto& nd = tree.nodes[static_cast<std::size_t>(node_id)];
        nd.feature = best.feature;
        nd.threshold = best.threshold;
        nd.missing_left = best.missing_left;
        const std::int32_t left_id = build(lo, lo + n_left);
        const std::int32_t right_id = build(lo + n_left, hi);
        tree.nodes[static_cast<std::size_t>(node_id)].left = left_id;
        tree.nodes[static_cast<std::size_t>(node_id)].right = right_id;
        return node_id;
    }

    void make_terminal(std::int32_t node_id, std::size_t lo, std::size_t hi) {
        std::vector<double> times;
        std::vector<int> events;
        times.reserve(hi - lo);
        events.reserve(hi - lo);
        for (std::size_t p = lo; p < hi; ++p) {
            const std::uint32_t row = time_buf()[p];
            times.push_back(fm.times[row]);
            events.push_back(fm.events[row]);
        }
        tree.nodes[static_cast<std::size_t>(node_id)].chf = nelson_aalen(times, events);
    }
};

std::size_t route(const FittedTree& t, const std::vector<double>& x) {
    std::int32_t cur = 0;
    while (t.nodes[static_cast<std::size_t>(cur)].feature >= 0) {
        const TreeNode& nd = t.nodes[static_cast<std::size_t>(cur)];
        const double v = x[static_cast<std::size_t>(nd.feature)];
        cur = (std::isnan(v) ? nd.missing_left : v <= nd.threshold) ? nd.left : nd.right;
    }
    return static_cast<std::size_t>(cur);
}

double mean_chf(const FittedForest& f, const std::vector<double>& x, double t) {
    double sum = 0.0;
    for (const auto& tree : f.trees) sum += tree.nodes[route(tree, x)].chf(t);
    return sum / static_cast<double>(f.trees.size());
}

} // namespace

SplitRule parse_split_rule(const std::string& name) {
    if (name == "logrank") return SplitRule::logrank;
    if (name == "logrankscore") return SplitRule::logrankscore;
    throw ConfigError("unknown split rule '" + name + "'");
}

const char* split_rule_name(SplitRule r) {
    return r == SplitRule::logrank ? "logrank" : "logrankscore";
}

void ForestHyperparams::validate() const {
    if (ntree == 0) throw ConfigError("ntree must be positive");
    if (mtry == 0) throw ConfigError("mtry must be positive");
    if (nodesize == 0) throw ConfigError("nodesize must be positive");
}

double logrank_statistic(const std::vector<double>& times_left, const std::vector<int>& events_left,
                         const std::vector<double>& times_right,
                         const std::vector<int>& events_right) {
    return logrank_pair(times_left, events_left, times_right, events_right, false);
}

double logrank_score_statistic(const std::vector<double>& times_left,
                               const std::vector<int>& events_left,
                               const std::vector<double>& times_right,
                               const std::vector<int>& events_right) {
    return logrank_pair(times_left, events_left, times_right, events_right, true);
}

FittedForest fit_forest(const Cohort& train, const ForestHyperparams& hp, std::uint64_t seed,
                        bool bernstein) {
    hp.validate();
    if (train.count_events() < 2) throw FitError("forest fit needs at least 2 events");

    FittedForest out;
    out.hp = hp;
    out.encoder = EncoderSpec::fit(train, bernstein);
    out.seed = seed;
    out.n_train = train.size();
    out.trees.resize(hp.ntree);
    out.inbag.resize(hp.ntree);

    const FeatureMatrix fm = encode_cohort(train, out.encoder);
    const Presort pre(fm);
    const Rng root(seed);
    parallel_for(hp.ntree, [&](std::size_t i) {
        TreeBuilder builder(fm, pre, hp, root.derive(i), out.trees[i]);
        builder.bootstrap(out.inbag[i]);
        builder.build(0, fm.n);
    });
    return out;
}

double forest_predict(const FittedForest& f, const PatientRecord& r, double t) {
    const FeatureVector x = encode(r, f.encoder);
    return std::exp(-mean_chf(f, x.values, t));
}

std::vector<double> forest_predict_cohort(const FittedForest& f, const Cohort& c, double t) {
    std::vector<double> out(c.size());
    parallel_for(c.size(), [&](std::size_t i) { out[i] = forest_predict(f, c.records[i], t); });
    return out;
}

std::vector<double> oob_survival(const FittedForest& f, const Cohort& train, double t) {
    if (f.inbag.empty()) throw DataError("out-of-bag info unavailable (forest was deserialized)");
    if (train.size() != f.n_train) throw DataError("out-of-bag cohort size mismatch");
    std::vector<double> out(train.size());
    parallel_for(train.size(), [&](std::size_t i) {
        const FeatureVector x = encode(train.records[i], f.encoder);
        double sum = 0.0;
        std::size_t used = 0;
        for (std::size_t k = 0; k < f.trees.size(); ++k) {
            if (f.inbag[k][i] != 0) continue;
            sum += f.trees[k].nodes[route(f.trees[k], x.values)].chf(t);
            ++used;
        }
        // a record in every bag falls back to the full ensemble
        if (used == 0) out[i] = std::exp(-mean_chf(f, x.values, t));
        else out[i] = std::exp(-sum / static_cast<double>(used));
    });
    return out;
}

std::string forest_to_json(const FittedForest& f) {
    nlohmann::ordered_json j;
    j["version"] = kModelVersion;
    j["model"] = "forest";
    j["hp"] = {{"ntree", f.hp.ntree},
               {"mtry", f.hp.mtry},
               {"nodesize", f.hp.nodesize},
               {"splitrule", split_rule_name(f.hp.splitrule)}};
    j["encoder"] = nlohmann::ordered_json::parse(f.encoder.to_json());
    j["seed"] = f.seed;
    j["n_train"] = f.n_train;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& tree : f.trees) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& nd : tree.nodes) {
            if (nd.feature >= 0) {
                nodes.push_back({{"f", nd.feature},
                                 {"t", nd.threshold},
                                 {"ml", nd.missing_left},
                                 {"l", nd.left},
                                 {"r", nd.right}});
            } else {
                nodes.push_back({{"ct", nd.chf.times}, {"cv", nd.chf.values}});
            }
        }
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    j["trees"] = std::move(trees);
    return j.dump();
}

FittedForest forest_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("forest file is not valid JSON: ") + e.what());
    }
    FittedForest f;
    try {
        if (j.at("version").get<std::size_t>() != kModelVersion)
            throw SchemaError("unsupported forest model version");
        if (j.at("model").get<std::string>() != "forest")
            throw SchemaError("not a forest model file");
        f.hp.ntree = j.at("hp").at("ntree").get<std::size_t>();
        f.hp.mtry = j.at("hp").at("mtry").get<std::size_t>();
        f.hp.nodesize = j.at("hp").at("nodesize").get<std::size_t>();
        f.hp.splitrule = parse_split_rule(j.at("hp").at("splitrule").get<std::string>());
        f.encoder = EncoderSpec::from_json(j.at("encoder").dump());
        f.seed = j.at("seed").get<std::uint64_t>();
        f.n_train = j.at("n_train").get<std::size_t>();
        f.trees.reserve(j.at("trees").size());
        for (const auto& jt : j.at("trees")) {
            FittedTree tree;
            tree.nodes.reserve(jt.at("nodes").size());
            for (const auto& jn : jt.at("nodes")) {
                TreeNode nd;
                if (jn.contains("f")) {
                    nd.feature = jn.at("f").get<std::int32_t>();
                    nd.threshold = jn.at("t").get<double>();
                    nd.missing_left = jn.at("ml").get<bool>();
                    nd.left = jn.at("l").get<std::int32_t>();
                    nd.right = jn.at("r").get<std::int32_t>();
                } else {
                    nd.chf.times = jn.at("ct").get<std::vector<double>>();
                    nd.chf.values = jn.at("cv").get<std::vector<double>>();
                    nd.chf.initial = 0.0;
                }
                tree.nodes.push_back(std::move(nd));
            }
            f.trees.push_back(std::move(tree));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("forest file field error: ") + e.what());
    }
    return f;
}

void save_forest(const FittedForest& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << forest_to_json(f) << '\n';
    if (!out) throw IoError("failed writing " + path);
}

FittedForest load_forest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return forest_from_json(ss.str());
}

} // namespace survtk
