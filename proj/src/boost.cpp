#include "survtk/boost.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "survtk/error.hpp"
#include "survtk/rng.hpp"

namespace survtk {
namespace {

constexpr std::size_t kModelVersion = 1;
constexpr double kMinChildWeight = 1.0; // minimum Hessian sum per child

// Gradient, diagonal Hessian, and value of the Breslow negative log partial
// likelihood at the given scores, using a precomputed ascending-time order.
// Scores are shifted by their maximum before exponentiation; every reported
// quantity is invariant to that shift except the risk-set sums themselves.
double grad_hess_ordered(const std::vector<double>& scores, const std::vector<double>& times,
                         const std::vector<int>& events, const std::vector<std::uint32_t>& order,
                         std::vector<double>& grad, std::vector<double>& hess) {
    const std::size_t n = scores.size();
    double shift = -std::numeric_limits<double>::infinity();
    for (const double s : scores) shift = std::max(shift, s);
    std::vector<double> es(n);
    for (std::size_t i = 0; i < n; ++i) es[i] = std::exp(scores[i] - shift);

    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t p = n; p-- > 0;) suffix[p] = suffix[p + 1] + es[order[p]];

    grad.assign(n, 0.0);
    hess.assign(n, 0.0);
    double B = 0.0, C = 0.0, nll = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        double d = 0.0;
        while (j < n && times[order[j]] == times[order[i]]) {
            d += events[order[j]];
            ++j;
        }
        if (d > 0.0) {
            const double s_g = suffix[i];
            B += d / s_g;
            C += d / (s_g * s_g);
            nll += d * std::log(s_g);
            for (std::size_t p = i; p < j; ++p)
                if (events[order[p]]) nll -= scores[order[p]] - shift;
        }
        for (std::size_t p = i; p < j; ++p) {
            const std::uint32_t r = order[p];
            grad[r] = -events[r] + es[r] * B;
            hess[r] = es[r] * B - es[r] * es[r] * C;
        }
        i = j;
    }
    return nll;
}

std::vector<std::uint32_t> time_ascending(const std::vector<double>& times) {
    std::vector<std::uint32_t> order(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return times[a] < times[b]; });
    return order;
}

std::size_t route_row(const BoostTree& tree, const FeatureMatrix& fm, std::size_t row) {
    std::int32_t cur = 0;
    while (tree.nodes[static_cast<std::size_t>(cur)].feature >= 0) {
        const BoostNode& nd = tree.nodes[static_cast<std::size_t>(cur)];
        const double v = fm.at(row, static_cast<std::size_t>(nd.feature));
        cur = (std::isnan(v) ? nd.missing_left : v <= nd.threshold) ? nd.left : nd.right;
    }
    return static_cast<std::size_t>(cur);
}

std::size_t route_values(const BoostTree& tree, const std::vector<double>& x) {
    std::int32_t cur = 0;
    while (tree.nodes[static_cast<std::size_t>(cur)].feature >= 0) {
        const BoostNode& nd = tree.nodes[static_cast<std::size_t>(cur)];
        const double v = x[static_cast<std::size_t>(nd.feature)];
        cur = (std::isnan(v) ? nd.missing_left : v <= nd.threshold) ? nd.left : nd.right;
    }
    return static_cast<std::size_t>(cur);
}

struct NodeBest {
    double gain = 0.0;
    std::int32_t feature = -1;
    double threshold = 0.0;
    bool missing_left = true;
    bool found = false;
};

struct RoundBuilder {
    const FeatureMatrix& fm;
    const std::vector<std::vector<std::uint32_t>>& col_order;
    const BoostHyperparams& hp;
    const std::vector<double>& g;
    const std::vector<double>& h;

    std::vector<std::int32_t> node_of_row;
    std::vector<std::int32_t> slot; // node id -> frontier slot
    std::vector<std::uint32_t> cols;
    BoostTree tree;

    // per-slot frontier state
    std::vector<double> G, H;
    std::vector<std::size_t> cnt;
    std::vector<NodeBest> best;
    std::vector<double> got, hot, run_g, run_h, last_v;
    std::vector<std::size_t> cot, run_c;
    std::vector<char> seen;

    RoundBuilder(const FeatureMatrix& fm_, const std::vector<std::vector<std::uint32_t>>& co,
                 const BoostHyperparams& hp_, const std::vector<double>& g_,
                 const std::vector<double>& h_)
        : fm(fm_), col_order(co), hp(hp_), g(g_), h(h_) {}

    double leaf_weight(double gs, double hs) const { return -hp.eta * gs / (hs + hp.lambda); }

    void pick_columns(Rng& rng) {
        const std::size_t m = fm.m;
        const auto take = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(hp.colsample_bytree * static_cast<double>(m))));
        cols.resize(m);
        for (std::size_t i = 0; i < m; ++i) cols[i] = static_cast<std::uint32_t>(i);
        if (take < m) {
            for (std::size_t i = 0; i < take; ++i) {
                const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(m - i));
                std::swap(cols[i], cols[j]);
            }
            cols.resize(take);
            std::sort(cols.begin(), cols.end());
        }
    }

    void pick_rows(Rng& rng) {
        const std::size_t n = fm.n;
        node_of_row.assign(n, 0);
        if (hp.subsample >= 1.0) return;
        const auto take = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(hp.subsample * static_cast<double>(n))));
        std::vector<std::uint32_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
            std::swap(rows[i], rows[j]);
        }
        node_of_row.assign(n, -1);
        for (std::size_t i = 0; i < take; ++i) node_of_row[rows[i]] = 0;
    }

    void eval_boundary(std::size_t s, std::uint32_t f, double lo, double hi) {
        const double g_miss = G[s] - got[s];
        const double h_miss = H[s] - hot[s];
        const std::size_t c_miss = cnt[s] - cot[s];
        const double parent = G[s] * G[s] / (H[s] + hp.lambda);

        double gain = 0.0;
        bool ml = true;
        bool ok = false;
        {
            // missing kept right
            const double gl = run_g[s], hl = run_h[s];
            const std::size_t cl = run_c[s];
            const double gr = G[s] - gl, hr = H[s] - hl;
            const std::size_t cr = cnt[s] - cl;
            if (cl >= 1 && cr >= 1 && hl >= kMinChildWeight && hr >= kMinChildWeight) {
                gain = 0.5 * (gl * gl / (hl + hp.lambda) + gr * gr / (hr + hp.lambda) - parent);
                ml = c_miss == 0;
                ok = true;
            }
        }
        if (c_miss > 0) {
            const double gl = run_g[s] + g_miss, hl = run_h[s] + h_miss;
            const std::size_t cl = run_c[s] + c_miss;
            const double gr = G[s] - gl, hr = H[s] - hl;
            const std::size_t cr = cnt[s] - cl;
            if (cl >= 1 && cr >= 1 && hl >= kMinChildWeight && hr >= kMinChildWeight) {
                const double gain_l =
                    0.5 * (gl * gl / (hl + hp.lambda) + gr * gr / (hr + hp.lambda) - parent);
                if (!ok || gain_l >= gain) {
                    gain = gain_l;
                    ml = true;
                    ok = true;
                }
            }
        }
        if (ok && gain > best[s].gain) {
            best[s].gain = gain;
            best[s].feature = static_cast<std::int32_t>(f);
            best[s].threshold = 0.5 * (lo + hi);
            best[s].missing_left = ml;
            best[s].found = true;
        }
    }

    void build(Rng rng) {
        pick_rows(rng);
        pick_columns(rng);

        tree.nodes.assign(1, BoostNode{});
        slot.assign(1, 0);
        G.assign(1, 0.0);
        H.assign(1, 0.0);
        cnt.assign(1, 0);
        std::vector<std::int32_t> frontier{0};
        for (std::size_t r = 0; r < fm.n; ++r) {
            if (node_of_row[r] < 0) continue;
            G[0] += g[r];
            H[0] += h[r];
            ++cnt[0];
        }

        for (std::size_t depth = 0; depth < hp.max_depth && !frontier.empty(); ++depth) {
            const std::size_t ns = frontier.size();
            best.assign(ns, NodeBest{});
            for (const std::uint32_t f : cols) {
                const auto& order = col_order[f];
                got.assign(ns, 0.0);
                hot.assign(ns, 0.0);
                cot.assign(ns, 0);
                for (const std::uint32_t row : order) {
                    if (std::isnan(fm.at(row, f))) break; // missing sorted last
                    const std::int32_t nd = node_of_row[row];
                    if (nd < 0) continue;
                    const std::int32_t s = slot[static_cast<std::size_t>(nd)];
                    if (s < 0) continue;
                    got[static_cast<std::size_t>(s)] += g[row];
                    hot[static_cast<std::size_t>(s)] += h[row];
                    ++cot[static_cast<std::size_t>(s)];
                }
                run_g.assign(ns, 0.0);
                run_h.assign(ns, 0.0);
                run_c.assign(ns, 0);
                last_v.assign(ns, 0.0);
                seen.assign(ns, 0);
                for (const std::uint32_t row : order) {
                    const double v = fm.at(row, f);
                    if (std::isnan(v)) break;
                    const std::int32_t nd = node_of_row[row];
                    if (nd < 0) continue;
                    const auto s = static_cast<std::size_t>(slot[static_cast<std::size_t>(nd)]);
                    if (slot[static_cast<std::size_t>(nd)] < 0) continue;
                    if (seen[s] && v != last_v[s]) eval_boundary(s, f, last_v[s], v);
                    run_g[s] += g[row];
                    run_h[s] += h[row];
                    ++run_c[s];
                    last_v[s] = v;
                    seen[s] = 1;
                }
            }

            // split or finalize each frontier node, then move rows down
            std::vector<std::int32_t> next;
            for (std::size_t s = 0; s < ns; ++s) {
                auto& nd = tree.nodes[static_cast<std::size_t>(frontier[s])];
                if (!best[s].found) {
                    nd.weight = leaf_weight(G[s], H[s]);
                    continue;
                }
                nd.feature = best[s].feature;
                nd.threshold = best[s].threshold;
                nd.missing_left = best[s].missing_left;
                nd.left = static_cast<std::int32_t>(tree.nodes.size());
                nd.right = nd.left + 1;
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                next.push_back(nd.left);
                next.push_back(nd.right);
            }
            slot.assign(tree.nodes.size(), -1);
            for (std::size_t s = 0; s < next.size(); ++s)
                slot[static_cast<std::size_t>(next[s])] = static_cast<std::int32_t>(s);
            G.assign(next.size(), 0.0);
            H.assign(next.size(), 0.0);
            cnt.assign(next.size(), 0);
            for (std::size_t r = 0; r < fm.n; ++r) {
                const std::int32_t nd_id = node_of_row[r];
                if (nd_id < 0) continue;
                const BoostNode& nd = tree.nodes[static_cast<std::size_t>(nd_id)];
                if (nd.feature < 0) {
                    node_of_row[r] = -1; // finalized leaf
                    continue;
                }
                const double v = fm.at(r, static_cast<std::size_t>(nd.feature));
                const std::int32_t child =
                    (std::isnan(v) ? nd.missing_left : v <= nd.threshold) ? nd.left : nd.right;
                node_of_row[r] = child;
                const auto s = static_cast<std::size_t>(slot[static_cast<std::size_t>(child)]);
                G[s] += g[r];
                H[s] += h[r];
                ++cnt[s];
            }
            frontier = std::move(next);
        }
        for (const std::int32_t id : frontier) {
            const auto s = static_cast<std::size_t>(slot[static_cast<std::size_t>(id)]);
            tree.nodes[static_cast<std::size_t>(id)].weight = leaf_weight(G[s], H[s]);
        }
    }
};

} // namespace

void BoostHyperparams::validate() const {
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (max_depth == 0) throw ConfigError("max_depth must be positive");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("subsample must be in (0, 1]");
    if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0))
        throw ConfigError("colsample_bytree must be in (0, 1]");
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
    if (nrounds == 0) throw ConfigError("nrounds must be positive");
}

std::pair<std::vector<double>, std::vector<double>> cox_grad_hess(
    const std::vector<double>& scores, const std::vector<double>& times,
    const std::vector<int>& events) {
    const std::size_t n = scores.size();
    if (times.size() != n || events.size() != n)
        throw DataError("cox_grad_hess: input length mismatch");
    if (n == 0) throw DataError("cox_grad_hess: empty input");
    if (std::count(events.begin(), events.end(), 1) == 0)
        throw DataError("cox_grad_hess needs at least one event");
    std::vector<double> grad, hess;
    grad_hess_ordered(scores, times, events, time_ascending(times), grad, hess);
    return {std::move(grad), std::move(hess)};
}

StepFunction breslow_baseline(const std::vector<double>& times, const std::vector<int>& events,
                              const std::vector<double>& scores) {
    const std::size_t n = times.size();
    if (events.size() != n || scores.size() != n)
        throw DataError("breslow_baseline: input length mismatch");
    if (n == 0) throw DataError("breslow_baseline: empty input");
    const auto order = time_ascending(times);
    double shift = -std::numeric_limits<double>::infinity();
    for (const double s : scores) shift = std::max(shift, s);
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t p = n; p-- > 0;) suffix[p] = suffix[p + 1] + std::exp(scores[order[p]] - shift);

    StepFunction h0;
    h0.initial = 0.0;
    double chf = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        double d = 0.0;
        while (j < n && times[order[j]] == times[order[i]]) {
            d += events[order[j]];
            ++j;
        }
        if (d > 0.0) {
            chf += d / suffix[i] * std::exp(-shift);
            h0.times.push_back(times[order[i]]);
            h0.values.push_back(chf);
        }
        i = j;
    }
    return h0;
}

FittedBooster fit_booster(const Cohort& train, const BoostHyperparams& hp, std::uint64_t seed,
                          bool bernstein) {
    hp.validate();
    if (train.count_events() < 2) throw FitError("booster fit needs at least 2 events");

    FittedBooster out;
    out.hp = hp;
    out.encoder = EncoderSpec::fit(train, bernstein);
    out.seed = seed;
    out.n_train = train.size();
    out.trees.reserve(hp.nrounds);
    out.train_nll.reserve(hp.nrounds);

    const FeatureMatrix fm = encode_cohort(train, out.encoder);
    std::vector<std::vector<std::uint32_t>> col_order(fm.m);
    {
        std::vector<std::uint32_t> base(fm.n);
        for (std::size_t i = 0; i < fm.n; ++i) base[i] = static_cast<std::uint32_t>(i);
        for (std::size_t f = 0; f < fm.m; ++f) {
            col_order[f] = base;
            std::stable_sort(col_order[f].begin(), col_order[f].end(),
                             [&](std::uint32_t x, std::uint32_t y) {
                                 const double vx = fm.at(x, f), vy = fm.at(y, f);
                                 const bool mx = std::isnan(vx), my = std::isnan(vy);
                                 if (mx != my) return my;
                                 if (mx) return false;
                                 return vx < vy;
                             });
        }
    }
    const auto torder = time_ascending(fm.times);

    std::vector<double> scores(fm.n, 0.0);
    std::vector<double> g, h;
    const Rng root(seed);
    for (std::size_t round = 0; round < hp.nrounds; ++round) {
        grad_hess_ordered(scores, fm.times, fm.events, torder, g, h);
        RoundBuilder builder(fm, col_order, hp, g, h);
        builder.build(root.derive(round));
        for (std::size_t r = 0; r < fm.n; ++r)
            scores[r] += builder.tree.nodes[route_row(builder.tree, fm, r)].weight;
        out.trees.push_back(std::move(builder.tree));
        out.train_nll.push_back(grad_hess_ordered(scores, fm.times, fm.events, torder, g, h));
    }
    out.h0 = breslow_baseline(fm.times, fm.events, scores);
    return out;
}

double booster_score(const FittedBooster& m, const PatientRecord& r) {
    const FeatureVector x = encode(r, m.encoder);
    double s = 0.0;
    for (const auto& tree : m.trees) s += tree.nodes[route_values(tree, x.values)].weight;
    return s;
}

double booster_predict(const FittedBooster& m, const PatientRecord& r, double t) {
    return std::exp(-m.h0(t) * std::exp(booster_score(m, r)));
}

std::vector<double> booster_predict_cohort(const FittedBooster& m, const Cohort& c, double t) {
    std::vector<double> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out[i] = booster_predict(m, c.records[i], t);
    return out;
}

std::string booster_to_json(const FittedBooster& m) {
    nlohmann::ordered_json j;
    j["version"] = kModelVersion;
    j["model"] = "boost";
    j["hp"] = {{"eta", m.hp.eta},
               {"max_depth", m.hp.max_depth},
               {"subsample", m.hp.subsample},
               {"colsample_bytree", m.hp.colsample_bytree},
               {"lambda", m.hp.lambda},
               {"nrounds", m.hp.nrounds}};
    j["encoder"] = nlohmann::ordered_json::parse(m.encoder.to_json());
    j["seed"] = m.seed;
    j["n_train"] = m.n_train;
    j["h0"] = {{"t", m.h0.times}, {"v", m.h0.values}};
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& tree : m.trees) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& nd : tree.nodes) {
            if (nd.feature >= 0) {
                nodes.push_back({{"f", nd.feature},
                                 {"t", nd.threshold},
                                 {"ml", nd.missing_left},
                                 {"l", nd.left},
                                 {"r", nd.right}});
            } else {
                nodes.push_back({{"w", nd.weight}});
            }
        }
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    j["trees"] = std::move(trees);
    return j.dump();
}

FittedBooster booster_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("booster file is not valid JSON: ") + e.what());
    }
    FittedBooster m;
    try {
        if (j.at("version").get<std::size_t>() != kModelVersion)
            throw SchemaError("unsupported booster model version");
        if (j.at("model").get<std::string>() != "boost")
            throw SchemaError("not a booster model file");
        m.hp.eta = j.at("hp").at("eta").get<double>();
        m.hp.max_depth = j.at("hp").at("max_depth").get<std::size_t>();
        m.hp.subsample = j.at("hp").at("subsample").get<double>();
        m.hp.colsample_bytree = j.at("hp").at("colsample_bytree").get<double>();
        m.hp.lambda = j.at("hp").at("lambda").get<double>();
        m.hp.nrounds = j.at("hp").at("nrounds").get<std::size_t>();
        m.encoder = EncoderSpec::from_json(j.at("encoder").dump());
        m.seed = j.at("seed").get<std::uint64_t>();
        m.n_train = j.at("n_train").get<std::size_t>();
        m.h0.times = j.at("h0").at("t").get<std::vector<double>>();
        m.h0.values = j.at("h0").at("v").get<std::vector<double>>();
        m.h0.initial = 0.0;
        m.trees.reserve(j.at("trees").size());
        for (const auto& jt : j.at("trees")) {
            BoostTree tree;
            tree.nodes.reserve(jt.at("nodes").size());
            for (const auto& jn : jt.at("nodes")) {
                BoostNode nd;
                if (jn.contains("f")) {
                    nd.feature = jn.at("f").get<std::int32_t>();
                    nd.threshold = jn.at("t").get<double>();
                    nd.missing_left = jn.at("ml").get<bool>();
                    nd.left = jn.at("l").get<std::int32_t>();
                    nd.right = jn.at("r").get<std::int32_t>();
                } else {
                    nd.weight = jn.at("w").get<double>();
                }
                tree.nodes.push_back(nd);
            }
            m.trees.push_back(std::move(tree));
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("booster file field error: ") + e.what());
    }
    return m;
}

void save_booster(const FittedBooster& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << booster_to_json(m) << '\n';
    if (!out) throw IoError("failed writing " + path);
}

FittedBooster load_booster(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return booster_from_json(ss.str());
}

} // namespace survtk
