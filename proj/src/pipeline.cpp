#include "survtk/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "survtk/error.hpp"
#include "survtk/metrics.hpp"
#include "survtk/rng.hpp"

namespace survtk {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kModelNames[5] = {"baseline", "finetuned", "forest", "boost", "ensemble"};
constexpr const char* kStratumNames[3] = {"overall", "complete", "incomplete"};

// shortest round-trip decimal text, shared by every emitter so the same
// value always prints the same bytes
std::string num(double v) { return ordered_json(v).dump(); }

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

template <typename T>
std::vector<T> sorted_unique(std::vector<T> v, bool descending = false) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    if (descending) std::reverse(v.begin(), v.end());
    return v;
}

Cohort merge(const Cohort& a, const Cohort& b) {
    Cohort out;
    out.horizon = a.horizon;
    out.provenance = a.provenance;
    out.records = a.records;
    out.records.insert(out.records.end(), b.records.begin(), b.records.end());
    return out;
}

void outcome_arrays(const Cohort& c, std::vector<double>& times, std::vector<int>& events) {
    times.resize(c.size());
    events.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        times[i] = c.records[i].time;
        events[i] = c.records[i].event;
    }
}

// natural-orientation tuning score; throws MetricUndefinedError when the
// evaluation set cannot support the metric
double objective_score(const std::vector<double>& survival, const std::vector<double>& times,
                       const std::vector<int>& events, double t, TuneObjective objective) {
    if (objective == TuneObjective::auc) {
        std::vector<double> risks(survival.size());
        for (std::size_t i = 0; i < survival.size(); ++i) risks[i] = 1.0 - survival[i];
        return ipcw_auc(risks, times, events, t);
    }
    return ici(survival, times, events, t);
}

bool improves(double candidate, double best, TuneObjective objective) {
    return objective == TuneObjective::auc ? candidate > best : candidate < best;
}

void require_partition(const SplitTriple& s, std::size_t n) {
    std::vector<char> seen(n, 0);
    auto mark = [&](const std::vector<std::size_t>& idx, const char* fold) {
        for (std::size_t i : idx) {
            if (i >= n) throw DataError(std::string("split index out of range in fold ") + fold);
            if (seen[i]) throw DataError(std::string("split folds overlap at record ") + std::to_string(i));
            seen[i] = 1;
        }
    };
    mark(s.idx_a, "A");
    mark(s.idx_b, "B");
    mark(s.idx_c, "C");
    for (std::size_t i = 0; i < n; ++i)
        if (!seen[i]) throw DataError("split folds do not cover record " + std::to_string(i));
    if (s.train_a.size() != s.idx_a.size() || s.test_b.size() != s.idx_b.size() ||
        s.valid_c.size() != s.idx_c.size())
        throw DataError("split fold sizes disagree with their index lists");
}

Cohort maybe_rebalance(const Cohort& fitting, const ExperimentConfig& cfg, std::uint64_t seed) {
    if (!cfg.rebalance) return fitting;
    RoseConfig rc;
    rc.target = cfg.rose_target;
    rc.multiplier = cfg.rose_multiplier;
    rc.seed = seed;
    return rose_resample(fitting, rc);
}

NMConfig finetune_config(const ExperimentConfig& cfg) {
    NMConfig nm;
    nm.max_evals = cfg.finetune_evals;
    nm.scalar_step = cfg.finetune_step;
    return nm;
}

BOConfig weight_config(const ExperimentConfig& cfg, std::uint64_t seed) {
    BOConfig bo;
    bo.total_evals = cfg.weight_evals;
    bo.seed = seed;
    return bo;
}

std::vector<SurvivalPrediction> wrap_all(const std::vector<double>& probs, const char* tag) {
    std::vector<SurvivalPrediction> out;
    out.reserve(probs.size());
    for (double p : probs) out.push_back(wrap_valid(p, tag));
    return out;
}

MetricValue try_metric(const std::vector<double>& survival, const std::vector<double>& times,
                       const std::vector<int>& events, double t, TuneObjective which) {
    MetricValue mv;
    if (survival.empty()) {
        mv.note = "no estimates";
        return mv;
    }
    try {
        mv.value = objective_score(survival, times, events, t, which);
    } catch (const MetricUndefinedError& e) {
        mv.note = e.what();
    }
    return mv;
}

struct ScoredModel {
    std::string name;
    std::vector<double> survival;  // aligned with the cohort
    std::vector<char> scored;      // record produced an estimate
};

StratumEval eval_stratum(const ScoredModel& m, const std::vector<std::size_t>& stratum,
                         const std::vector<double>& times, const std::vector<int>& events,
                         double t) {
    StratumEval out;
    std::vector<double> p, tt;
    std::vector<int> ev;
    for (std::size_t i : stratum) {
        if (!m.scored[i]) continue;
        p.push_back(m.survival[i]);
        tt.push_back(times[i]);
        ev.push_back(events[i]);
        out.events += events[i] != 0;
    }
    out.n = p.size();
    out.ici = try_metric(p, tt, ev, t, TuneObjective::ici);
    out.auc = try_metric(p, tt, ev, t, TuneObjective::auc);
    return out;
}

std::vector<ModelEval> evaluate_models(const std::vector<ScoredModel>& models,
                                       const std::vector<char>& baseline_ok,
                                       const std::vector<double>& times,
                                       const std::vector<int>& events, double t) {
    std::vector<std::size_t> all, complete, incomplete;
    for (std::size_t i = 0; i < baseline_ok.size(); ++i) {
        all.push_back(i);
        (baseline_ok[i] ? complete : incomplete).push_back(i);
    }
    std::vector<ModelEval> out;
    for (const auto& m : models) {
        ModelEval e;
        e.model = m.name;
        e.n_scored = static_cast<std::size_t>(std::count(m.scored.begin(), m.scored.end(), 1));
        e.overall = eval_stratum(m, all, times, events, t);
        e.complete = eval_stratum(m, complete, times, events, t);
        e.incomplete = eval_stratum(m, incomplete, times, events, t);
        out.push_back(std::move(e));
    }
    return out;
}

struct ScoredSet {
    std::vector<ScoredModel> models;
    std::vector<char> baseline_ok;
};

ScoredSet score_finals(const FinalModels& m, const Cohort& c, MappingProfile profile, double t) {
    auto ref_preds = baseline_predictions(m.reference, c, profile, t);
    auto tuned_preds = baseline_predictions(m.finetuned, c, profile, t);
    auto forest_probs = forest_predict_cohort(m.forest, c, t);
    auto boost_probs = booster_predict_cohort(m.boost, c, t);
    ComponentPredictions comps;
    comps.baseline = tuned_preds;
    comps.forest = wrap_all(forest_probs, "forest");
    comps.boost = wrap_all(boost_probs, "boost");
    auto ens_preds = combine_all(comps, m.weights);

    std::size_t n = c.size();
    ScoredSet out;
    out.baseline_ok.assign(n, 0);
    out.models.resize(5);
    for (std::size_t k = 0; k < 5; ++k) {
        out.models[k].name = kModelNames[k];
        out.models[k].survival.assign(n, 0.0);
        out.models[k].scored.assign(n, 0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.baseline_ok[i] = tuned_preds[i].valid ? 1 : 0;
        if (ref_preds[i].valid) {
            out.models[0].survival[i] = ref_preds[i].prob;
            out.models[0].scored[i] = 1;
        }
        if (tuned_preds[i].valid) {
            out.models[1].survival[i] = tuned_preds[i].prob;
            out.models[1].scored[i] = 1;
        }
        out.models[2].survival[i] = forest_probs[i];
        out.models[2].scored[i] = 1;
        out.models[3].survival[i] = boost_probs[i];
        out.models[3].scored[i] = 1;
        if (ens_preds[i].valid) {
            out.models[4].survival[i] = ens_preds[i].prob;
            out.models[4].scored[i] = 1;
        }
    }
    return out;
}

template <typename HP, typename FitFn, typename PredictFn>
GridChoice sweep_grid(const std::vector<HP>& grid, const Cohort& tune, const FitFn& fit,
                      const PredictFn& predict, const ExperimentConfig& cfg, const Rng& root,
                      std::uint64_t stream_base, HP& chosen) {
    std::vector<double> times;
    std::vector<int> events;
    outcome_arrays(tune, times, events);

    GridChoice choice;
    bool found = false;
    double best = 0.0;
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        double score = 0.0;
        try {
            auto model = fit(grid[idx], root.derive(stream_base + idx).next_u64());
            score = objective_score(predict(model, tune), times, events, cfg.horizon, cfg.objective);
        } catch (const Error&) {
            ++choice.failed;
            continue;
        }
        ++choice.evaluated;
        if (!found || improves(score, best, cfg.objective)) {
            found = true;
            best = score;
            choice.index = idx;
        }
    }
    if (!found) throw FitError("every grid configuration failed on the tuning fold");
    choice.objective = best;
    chosen = grid[choice.index];
    return choice;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path);
}

ordered_json metric_json(const MetricValue& mv) {
    ordered_json j;
    j["value"] = mv.value ? ordered_json(*mv.value) : ordered_json(nullptr);
    if (!mv.note.empty()) j["note"] = mv.note;
    return j;
}

ordered_json stratum_json(const StratumEval& s) {
    ordered_json j;
    j["n"] = s.n;
    j["events"] = s.events;
    j["ici"] = metric_json(s.ici);
    j["auc"] = metric_json(s.auc);
    return j;
}

ordered_json forest_hp_json(const ForestHyperparams& hp) {
    ordered_json j;
    j["ntree"] = hp.ntree;
    j["mtry"] = hp.mtry;
    j["nodesize"] = hp.nodesize;
    j["splitrule"] = split_rule_name(hp.splitrule);
    return j;
}

ordered_json boost_hp_json(const BoostHyperparams& hp) {
    ordered_json j;
    j["eta"] = hp.eta;
    j["max_depth"] = hp.max_depth;
    j["subsample"] = hp.subsample;
    j["colsample_bytree"] = hp.colsample_bytree;
    j["lambda"] = hp.lambda;
    j["nrounds"] = hp.nrounds;
    return j;
}

ordered_json choice_json(const GridChoice& c) {
    ordered_json j;
    j["index"] = c.index;
    j["objective"] = c.objective;
    j["evaluated"] = c.evaluated;
    j["failed"] = c.failed;
    return j;
}

ordered_json weights_json(const EnsembleWeights& w) {
    ordered_json j;
    j["w_baseline"] = w.w_baseline;
    j["w_forest"] = w.w_forest;
    j["w_boost"] = w.w_boost;
    return j;
}

EnsembleWeights weights_from_json_obj(const ordered_json& j) {
    EnsembleWeights w;
    w.w_baseline = j.at("w_baseline").get<double>();
    w.w_forest = j.at("w_forest").get<double>();
    w.w_boost = j.at("w_boost").get<double>();
    return w;
}

// majority vote over one hyperparameter; exact ties go to the smaller value
// because std::map iterates ascending and only a strictly larger count wins
template <typename T, typename TextFn>
T vote(const std::string& name, const std::vector<T>& values, const TextFn& text,
       std::vector<ParamVote>& out) {
    std::map<T, std::size_t> tally;
    for (const T& v : values) ++tally[v];
    T winner = tally.begin()->first;
    std::size_t winner_count = 0;
    ParamVote pv;
    pv.name = name;
    for (const auto& [value, count] : tally) {
        pv.tally.emplace_back(text(value), count);
        if (count > winner_count) {
            winner_count = count;
            winner = value;
        }
    }
    pv.chosen = text(winner);
    out.push_back(std::move(pv));
    return winner;
}

std::string size_text(std::size_t v) { return std::to_string(v); }

void summarize_metric(const ExperimentReport& r, std::size_t model, std::size_t stratum,
                      std::size_t metric, std::vector<MetricSummary>& out) {
    std::vector<double> vals;
    for (const auto& seed : r.seeds) {
        for (const auto& e : seed.evals) {
            if (e.model != kModelNames[model]) continue;
            const StratumEval& s = stratum == 0 ? e.overall : stratum == 1 ? e.complete : e.incomplete;
            const MetricValue& mv = metric == 0 ? s.ici : s.auc;
            if (mv.value) vals.push_back(*mv.value);
        }
    }
    if (vals.empty()) return;
    std::sort(vals.begin(), vals.end());
    MetricSummary ms;
    ms.model = kModelNames[model];
    ms.stratum = kStratumNames[stratum];
    ms.metric = metric == 0 ? "ici" : "auc";
    ms.defined = vals.size();
    ms.median = quantile_sorted(vals, 0.5);
    ms.q1 = quantile_sorted(vals, 0.25);
    ms.q3 = quantile_sorted(vals, 0.75);
    out.push_back(std::move(ms));
}

void append_metric_cell(std::string& row, const MetricValue& mv) {
    row += ',';
    if (mv.value) row += num(*mv.value);
}

} // namespace

void GridSpec::validate() const {
    auto nonempty = [](bool ok, const char* name) {
        if (!ok) throw ConfigError(std::string("grid value list ") + name + " is empty");
    };
    nonempty(!rsf_ntree.empty(), "rsf_ntree");
    nonempty(!rsf_mtry.empty(), "rsf_mtry");
    nonempty(!rsf_nodesize.empty(), "rsf_nodesize");
    nonempty(!rsf_splitrule.empty(), "rsf_splitrule");
    nonempty(!xgb_eta.empty(), "xgb_eta");
    nonempty(!xgb_max_depth.empty(), "xgb_max_depth");
    nonempty(!xgb_subsample.empty(), "xgb_subsample");
    nonempty(!xgb_colsample.empty(), "xgb_colsample");
    nonempty(!xgb_lambda.empty(), "xgb_lambda");
    nonempty(!xgb_nrounds.empty(), "xgb_nrounds");
}

std::vector<ForestHyperparams> enumerate_rsf_grid(const GridSpec& g) {
    g.validate();
    auto ntrees = sorted_unique(g.rsf_ntree);
    auto mtrys = sorted_unique(g.rsf_mtry);
    auto nodesizes = sorted_unique(g.rsf_nodesize, true); // larger leaves first
    auto rules = g.rsf_splitrule;
    std::vector<ForestHyperparams> out;
    for (std::size_t nt : ntrees)
        for (std::size_t mt : mtrys)
            for (std::size_t ns : nodesizes)
                for (SplitRule rule : rules) {
                    ForestHyperparams hp;
                    hp.ntree = nt;
                    hp.mtry = mt;
                    hp.nodesize = ns;
                    hp.splitrule = rule;
                    out.push_back(hp);
                }
    return out;
}

std::vector<BoostHyperparams> enumerate_xgb_grid(const GridSpec& g) {
    g.validate();
    auto rounds = sorted_unique(g.xgb_nrounds);
    auto depths = sorted_unique(g.xgb_max_depth);
    auto etas = sorted_unique(g.xgb_eta);
    auto subs = sorted_unique(g.xgb_subsample);
    auto cols = sorted_unique(g.xgb_colsample);
    auto lambdas = sorted_unique(g.xgb_lambda, true); // stronger shrinkage first
    std::vector<BoostHyperparams> out;
    for (std::size_t nr : rounds)
        for (std::size_t depth : depths)
            for (double eta : etas)
                for (double sub : subs)
                    for (double col : cols)
                        for (double lambda : lambdas) {
                            BoostHyperparams hp;
                            hp.nrounds = nr;
                            hp.max_depth = depth;
                            hp.eta = eta;
                            hp.subsample = sub;
                            hp.colsample_bytree = col;
                            hp.lambda = lambda;
                            out.push_back(hp);
                        }
    return out;
}

void ExperimentConfig::validate() const {
    if (horizon <= 0.0) throw ConfigError("horizon must be positive");
    if (n_seeds == 0) throw ConfigError("n_seeds must be at least 1");
    if (finetune_evals == 0) throw ConfigError("finetune_evals must be positive");
    if (!(finetune_step > 0.0)) throw ConfigError("finetune_step must be positive");
    if (weight_evals < 5) throw ConfigError("weight_evals must be at least 5");
    if (bootstrap == 0) throw ConfigError("bootstrap must be positive");
    if (!(rose_target > 0.0 && rose_target < 1.0)) throw ConfigError("rose_target must lie in (0, 1)");
    if (!(rose_multiplier >= 0.0)) throw ConfigError("rose_multiplier must be nonnegative");
    grid.validate();
}

std::string ExperimentConfig::to_json() const {
    ordered_json j;
    j["version"] = version;
    j["generator"] = ordered_json::parse(generator.to_json());
    j["data_seed"] = data_seed;
    j["csv_path"] = csv_path;
    j["profile"] = mapping_profile_name(profile);
    j["objective"] = objective_name(objective);
    j["horizon"] = horizon;
    j["rebalance"] = rebalance;
    j["rose_target"] = rose_target;
    j["rose_multiplier"] = rose_multiplier;
    ordered_json g;
    g["rsf_ntree"] = grid.rsf_ntree;
    g["rsf_mtry"] = grid.rsf_mtry;
    g["rsf_nodesize"] = grid.rsf_nodesize;
    {
        std::vector<std::string> rules;
        for (SplitRule r : grid.rsf_splitrule) rules.emplace_back(split_rule_name(r));
        g["rsf_splitrule"] = rules;
    }
    g["xgb_eta"] = grid.xgb_eta;
    g["xgb_max_depth"] = grid.xgb_max_depth;
    g["xgb_subsample"] = grid.xgb_subsample;
    g["xgb_colsample"] = grid.xgb_colsample;
    g["xgb_lambda"] = grid.xgb_lambda;
    g["xgb_nrounds"] = grid.xgb_nrounds;
    j["grid"] = g;
    j["n_seeds"] = n_seeds;
    j["base_seed"] = base_seed;
    j["finetune_evals"] = finetune_evals;
    j["finetune_step"] = finetune_step;
    j["weight_evals"] = weight_evals;
    j["bootstrap"] = bootstrap;
    j["bernstein"] = bernstein;
    // out_dir and save_models are run-site details, deliberately not part of
    // the canonical form so the digest has no environment in it
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("experiment config is not valid JSON: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        cfg.version = j.value("version", cfg.version);
        if (j.contains("generator")) cfg.generator = GeneratorConfig::from_json(j.at("generator").dump());
        cfg.data_seed = j.value("data_seed", cfg.data_seed);
        cfg.csv_path = j.value("csv_path", cfg.csv_path);
        if (j.contains("profile")) cfg.profile = parse_mapping_profile(j.at("profile").get<std::string>());
        if (j.contains("objective")) cfg.objective = parse_objective(j.at("objective").get<std::string>());
        cfg.horizon = j.value("horizon", cfg.horizon);
        cfg.rebalance = j.value("rebalance", cfg.rebalance);
        cfg.rose_target = j.value("rose_target", cfg.rose_target);
        cfg.rose_multiplier = j.value("rose_multiplier", cfg.rose_multiplier);
        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            GridSpec gs;
            gs.rsf_ntree = g.value("rsf_ntree", gs.rsf_ntree);
            gs.rsf_mtry = g.value("rsf_mtry", gs.rsf_mtry);
            gs.rsf_nodesize = g.value("rsf_nodesize", gs.rsf_nodesize);
            if (g.contains("rsf_splitrule")) {
                gs.rsf_splitrule.clear();
                for (const auto& name : g.at("rsf_splitrule"))
                    gs.rsf_splitrule.push_back(parse_split_rule(name.get<std::string>()));
            }
            gs.xgb_eta = g.value("xgb_eta", gs.xgb_eta);
            gs.xgb_max_depth = g.value("xgb_max_depth", gs.xgb_max_depth);
            gs.xgb_subsample = g.value("xgb_subsample", gs.xgb_subsample);
            gs.xgb_colsample = g.value("xgb_colsample", gs.xgb_colsample);
            gs.xgb_lambda = g.value("xgb_lambda", gs.xgb_lambda);
            gs.xgb_nrounds = g.value("xgb_nrounds", gs.xgb_nrounds);
            cfg.grid = gs;
        }
        cfg.n_seeds = j.value("n_seeds", cfg.n_seeds);
        cfg.base_seed = j.value("base_seed", cfg.base_seed);
        cfg.finetune_evals = j.value("finetune_evals", cfg.finetune_evals);
        cfg.finetune_step = j.value("finetune_step", cfg.finetune_step);
        cfg.weight_evals = j.value("weight_evals", cfg.weight_evals);
        cfg.bootstrap = j.value("bootstrap", cfg.bootstrap);
        cfg.bernstein = j.value("bernstein", cfg.bernstein);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("experiment config field has the wrong type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(to_json())); }

SeedOutcome run_seed(const Cohort& full, const ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (full.size() < 30) throw DataError("protocol needs at least 30 records");

    SeedOutcome out;
    out.seed = seed;

    SplitTriple split = split_cohort(full, seed);
    require_partition(split, full.size());
    out.n_a = split.train_a.size();
    out.n_b = split.test_b.size();
    out.n_c = split.valid_c.size();

    const Rng root(seed);

    // stage 1: hyperparameter search, fit on A (rebalanced when asked),
    // score on untouched B
    Cohort fit_a = maybe_rebalance(split.train_a, cfg, root.derive(11).next_u64());
    auto rsf_grid = enumerate_rsf_grid(cfg.grid);
    out.forest_choice = sweep_grid(
        rsf_grid, split.test_b,
        [&](const ForestHyperparams& hp, std::uint64_t s) { return fit_forest(fit_a, hp, s, cfg.bernstein); },
        [&](const FittedForest& m, const Cohort& c) { return forest_predict_cohort(m, c, cfg.horizon); },
        cfg, root, 1000, out.forest_hp);
    auto xgb_grid = enumerate_xgb_grid(cfg.grid);
    out.boost_choice = sweep_grid(
        xgb_grid, split.test_b,
        [&](const BoostHyperparams& hp, std::uint64_t s) { return fit_booster(fit_a, hp, s, cfg.bernstein); },
        [&](const FittedBooster& m, const Cohort& c) { return booster_predict_cohort(m, c, cfg.horizon); },
        cfg, root, 2000, out.boost_hp);
    fit_a = Cohort{};

    // stage 2: refit the winners and polish the parametric model on A+B
    Cohort ab = merge(split.train_a, split.test_b);
    Cohort fit_ab = maybe_rebalance(ab, cfg, root.derive(12).next_u64());
    FittedForest forest_ab = fit_forest(fit_ab, out.forest_hp, root.derive(3001).next_u64(), cfg.bernstein);
    FittedBooster boost_ab = fit_booster(fit_ab, out.boost_hp, root.derive(3002).next_u64(), cfg.bernstein);
    FineTuneResult tuned = fine_tune(BaselineParamVector::reference(), fit_ab, cfg.objective,
                                     cfg.horizon, finetune_config(cfg), cfg.profile);
    out.tune_start = tuned.objective_start;
    out.tune_end = tuned.objective_end;
    out.tune_evals = tuned.evals;
    fit_ab = Cohort{};

    // stage 3: ensemble weights on B
    {
        ComponentPredictions comps;
        comps.baseline = baseline_predictions(tuned.params, split.test_b, cfg.profile, cfg.horizon);
        comps.forest = wrap_all(forest_predict_cohort(forest_ab, split.test_b, cfg.horizon), "forest");
        comps.boost = wrap_all(booster_predict_cohort(boost_ab, split.test_b, cfg.horizon), "boost");
        WeightSearchResult ws = search_weights(split.test_b, comps, cfg.objective, cfg.horizon,
                                               weight_config(cfg, root.derive(4001).next_u64()));
        out.weights = ws.weights;
        out.weight_objective = ws.objective;
    }

    // stage 4: held-out evaluation on C, before any full-data refit
    {
        std::vector<double> times;
        std::vector<int> events;
        outcome_arrays(split.valid_c, times, events);

        FinalModels internal;
        internal.reference = BaselineParamVector::reference();
        internal.finetuned = tuned.params;
        internal.forest = std::move(forest_ab);
        internal.boost = std::move(boost_ab);
        internal.weights = out.weights;
        ScoredSet ss = score_finals(internal, split.valid_c, cfg.profile, cfg.horizon);
        out.evals = evaluate_models(ss.models, ss.baseline_ok, times, events, cfg.horizon);
    }
    forest_ab = FittedForest{};
    boost_ab = FittedBooster{};

    // stage 5: full-data refits whose parameters feed the cross-seed vote
    Cohort fit_full = maybe_rebalance(full, cfg, root.derive(13).next_u64());
    FineTuneResult final_tuned = fine_tune(BaselineParamVector::reference(), fit_full, cfg.objective,
                                           cfg.horizon, finetune_config(cfg), cfg.profile);
    out.final_params = final_tuned.params;
    FittedForest final_forest = fit_forest(fit_full, out.forest_hp, root.derive(5001).next_u64(), cfg.bernstein);
    FittedBooster final_boost = fit_booster(fit_full, out.boost_hp, root.derive(5002).next_u64(), cfg.bernstein);
    fit_full = Cohort{};
    {
        ComponentPredictions comps;
        comps.baseline = baseline_predictions(out.final_params, ab, cfg.profile, cfg.horizon);
        comps.forest = wrap_all(forest_predict_cohort(final_forest, ab, cfg.horizon), "forest");
        comps.boost = wrap_all(booster_predict_cohort(final_boost, ab, cfg.horizon), "boost");
        WeightSearchResult ws = search_weights(ab, comps, cfg.objective, cfg.horizon,
                                               weight_config(cfg, root.derive(6001).next_u64()));
        out.final_weights = ws.weights;
    }
    return out;
}

ExperimentReport aggregate(const ExperimentConfig& cfg, const Cohort& full,
                           std::vector<SeedOutcome> seeds) {
    if (seeds.empty()) throw DataError("aggregate needs at least one seed outcome");

    ExperimentReport r;
    r.config = cfg;
    r.config_hash = cfg.hash();
    r.n_records = full.size();
    r.event_rate = full.size() ? static_cast<double>(full.count_events()) / full.size() : 0.0;
    r.seeds = std::move(seeds);

    std::vector<std::size_t> ntree, mtry, nodesize, depth, nrounds;
    std::vector<SplitRule> rule;
    std::vector<double> eta, subsample, colsample, lambda;
    for (const auto& s : r.seeds) {
        ntree.push_back(s.forest_hp.ntree);
        mtry.push_back(s.forest_hp.mtry);
        nodesize.push_back(s.forest_hp.nodesize);
        rule.push_back(s.forest_hp.splitrule);
        eta.push_back(s.boost_hp.eta);
        depth.push_back(s.boost_hp.max_depth);
        subsample.push_back(s.boost_hp.subsample);
        colsample.push_back(s.boost_hp.colsample_bytree);
        lambda.push_back(s.boost_hp.lambda);
        nrounds.push_back(s.boost_hp.nrounds);
    }
    r.forest_final.ntree = vote("ntree", ntree, size_text, r.forest_votes);
    r.forest_final.mtry = vote("mtry", mtry, size_text, r.forest_votes);
    r.forest_final.nodesize = vote("nodesize", nodesize, size_text, r.forest_votes);
    r.forest_final.splitrule = vote("splitrule", rule,
                                    [](SplitRule v) { return std::string(split_rule_name(v)); },
                                    r.forest_votes);
    r.boost_final.eta = vote("eta", eta, num, r.boost_votes);
    r.boost_final.max_depth = vote("max_depth", depth, size_text, r.boost_votes);
    r.boost_final.subsample = vote("subsample", subsample, num, r.boost_votes);
    r.boost_final.colsample_bytree = vote("colsample_bytree", colsample, num, r.boost_votes);
    r.boost_final.lambda = vote("lambda", lambda, num, r.boost_votes);
    r.boost_final.nrounds = vote("nrounds", nrounds, size_text, r.boost_votes);

    for (std::size_t k = 0; k < kBaselineParamCount; ++k) {
        double acc = 0.0;
        for (const auto& s : r.seeds) acc += s.final_params.v[k];
        r.finetuned_mean.v[k] = acc / static_cast<double>(r.seeds.size());
    }

    double wb = 0.0, wf = 0.0, wx = 0.0;
    for (const auto& s : r.seeds) {
        wb += s.final_weights.w_baseline;
        wf += s.final_weights.w_forest;
        wx += s.final_weights.w_boost;
    }
    double total = wb + wf + wx;
    if (!(total > 0.0)) throw NumericError("averaged ensemble weights have no mass");
    r.weights_mean.w_baseline = wb / total;
    r.weights_mean.w_forest = wf / total;
    r.weights_mean.w_boost = wx / total;
    r.weights_mean.validate();

    for (std::size_t m = 0; m < 5; ++m)
        for (std::size_t s = 0; s < 3; ++s)
            for (std::size_t metric = 0; metric < 2; ++metric) summarize_metric(r, m, s, metric, r.summary);
    return r;
}

std::string report_to_json(const ExperimentReport& r) {
    ordered_json j;
    j["version"] = r.version;
    j["config_hash"] = r.config_hash;
    j["config"] = ordered_json::parse(r.config.to_json());
    j["n_records"] = r.n_records;
    j["event_rate"] = r.event_rate;
    // the boosted model emits relative risk scores; survival probabilities
    // come from a Breslow baseline hazard estimated on its fitting fold
    j["boost_probability_note"] =
        "boosted risk scores pass through a fitting-fold Breslow baseline hazard to become survival probabilities";

    ordered_json seeds = ordered_json::array();
    for (const auto& s : r.seeds) {
        ordered_json e;
        e["seed"] = s.seed;
        e["n_a"] = s.n_a;
        e["n_b"] = s.n_b;
        e["n_c"] = s.n_c;
        e["forest_hp"] = forest_hp_json(s.forest_hp);
        e["forest_choice"] = choice_json(s.forest_choice);
        e["boost_hp"] = boost_hp_json(s.boost_hp);
        e["boost_choice"] = choice_json(s.boost_choice);
        e["tune_start"] = s.tune_start;
        e["tune_end"] = s.tune_end;
        e["tune_evals"] = s.tune_evals;
        e["weights"] = weights_json(s.weights);
        e["weight_objective"] = s.weight_objective;
        ordered_json evals = ordered_json::array();
        for (const auto& me : s.evals) {
            ordered_json me_j;
            me_j["model"] = me.model;
            me_j["n_scored"] = me.n_scored;
            me_j["overall"] = stratum_json(me.overall);
            me_j["complete"] = stratum_json(me.complete);
            me_j["incomplete"] = stratum_json(me.incomplete);
            evals.push_back(std::move(me_j));
        }
        e["evals"] = std::move(evals);
        e["final_params"] = s.final_params.v;
        e["final_weights"] = weights_json(s.final_weights);
        seeds.push_back(std::move(e));
    }
    j["seeds"] = std::move(seeds);

    auto votes_json = [](const std::vector<ParamVote>& votes) {
        ordered_json arr = ordered_json::array();
        for (const auto& v : votes) {
            ordered_json pv;
            pv["name"] = v.name;
            pv["chosen"] = v.chosen;
            ordered_json tally = ordered_json::array();
            for (const auto& [value, count] : v.tally) {
                ordered_json t;
                t["value"] = value;
                t["count"] = count;
                tally.push_back(std::move(t));
            }
            pv["tally"] = std::move(tally);
            arr.push_back(std::move(pv));
        }
        return arr;
    };
    j["forest_votes"] = votes_json(r.forest_votes);
    j["boost_votes"] = votes_json(r.boost_votes);
    j["forest_final"] = forest_hp_json(r.forest_final);
    j["boost_final"] = boost_hp_json(r.boost_final);
    j["finetuned_mean"] = r.finetuned_mean.v;
    j["weights_mean"] = weights_json(r.weights_mean);

    ordered_json summary = ordered_json::array();
    for (const auto& ms : r.summary) {
        ordered_json row;
        row["model"] = ms.model;
        row["stratum"] = ms.stratum;
        row["metric"] = ms.metric;
        row["defined"] = ms.defined;
        row["median"] = ms.median;
        row["q1"] = ms.q1;
        row["q3"] = ms.q3;
        summary.push_back(std::move(row));
    }
    j["summary"] = std::move(summary);
    return j.dump(2) + "\n";
}

std::string metrics_csv(const ExperimentReport& r) {
    std::string out = "seed,model,stratum,n,events,ici,auc\n";
    for (const auto& s : r.seeds) {
        for (const auto& e : s.evals) {
            const StratumEval* strata[3] = {&e.overall, &e.complete, &e.incomplete};
            for (std::size_t k = 0; k < 3; ++k) {
                std::string row = std::to_string(s.seed);
                row += ',';
                row += e.model;
                row += ',';
                row += kStratumNames[k];
                row += ',' + std::to_string(strata[k]->n);
                row += ',' + std::to_string(strata[k]->events);
                append_metric_cell(row, strata[k]->ici);
                append_metric_cell(row, strata[k]->auc);
                row += '\n';
                out += row;
            }
        }
    }
    return out;
}

FinalModels fit_final_models(const Cohort& full, const ExperimentReport& r) {
    const ExperimentConfig& cfg = r.config;
    const Rng root(cfg.base_seed);
    FinalModels m;
    m.reference = BaselineParamVector::reference();
    m.finetuned = r.finetuned_mean;
    Cohort fit_full = maybe_rebalance(full, cfg, root.derive(14).next_u64());
    m.forest = fit_forest(fit_full, r.forest_final, root.derive(7001).next_u64(), cfg.bernstein);
    m.boost = fit_booster(fit_full, r.boost_final, root.derive(7002).next_u64(), cfg.bernstein);
    m.weights = r.weights_mean;
    return m;
}

FinalModels load_final_models(const std::string& dir) {
    FinalModels m;
    m.reference = BaselineParamVector::reference();
    m.finetuned = load_params(dir + "/finetuned_params.json");
    m.forest = load_forest(dir + "/forest.json");
    m.boost = load_booster(dir + "/boost.json");
    m.weights = load_weights(dir + "/weights.json");
    return m;
}

std::vector<ModelEval> evaluate_cohort(const FinalModels& m, const Cohort& c,
                                       MappingProfile profile, double horizon) {
    if (c.size() == 0) throw DataError("evaluation cohort is empty");
    std::vector<double> times;
    std::vector<int> events;
    outcome_arrays(c, times, events);
    ScoredSet ss = score_finals(m, c, profile, horizon);
    return evaluate_models(ss.models, ss.baseline_ok, times, events, horizon);
}

std::string evaluation_csv(const std::vector<ModelEval>& rows) {
    std::string out = "model,stratum,n,events,ici,auc\n";
    for (const auto& e : rows) {
        const StratumEval* strata[3] = {&e.overall, &e.complete, &e.incomplete};
        for (std::size_t k = 0; k < 3; ++k) {
            std::string row = e.model;
            row += ',';
            row += kStratumNames[k];
            row += ',' + std::to_string(strata[k]->n);
            row += ',' + std::to_string(strata[k]->events);
            append_metric_cell(row, strata[k]->ici);
            append_metric_cell(row, strata[k]->auc);
            row += '\n';
            out += row;
        }
    }
    return out;
}

std::vector<ExternalEval> external_validate(const FinalModels& m, const Cohort& external,
                                            MappingProfile profile, double horizon,
                                            std::size_t bootstrap_b, std::uint64_t seed) {
    if (external.size() == 0) throw DataError("external cohort is empty");
    if (bootstrap_b == 0) throw ConfigError("bootstrap resample count must be positive");

    std::vector<double> times;
    std::vector<int> events;
    outcome_arrays(external, times, events);
    ScoredSet ss = score_finals(m, external, profile, horizon);

    const Rng root(seed);
    std::vector<ExternalEval> out;
    for (std::size_t model = 0; model < 5; ++model) {
        ExternalEval e;
        e.model = kModelNames[model];
        std::vector<double> p, tt;
        std::vector<int> ev;
        for (std::size_t i = 0; i < external.size(); ++i) {
            if (!ss.models[model].scored[i]) continue;
            p.push_back(ss.models[model].survival[i]);
            tt.push_back(times[i]);
            ev.push_back(events[i]);
            e.events += events[i] != 0;
        }
        e.n_scored = p.size();
        e.ici = try_metric(p, tt, ev, horizon, TuneObjective::ici);
        e.auc = try_metric(p, tt, ev, horizon, TuneObjective::auc);

        auto resampled = [&](const std::vector<std::size_t>& idx, TuneObjective which) {
            std::vector<double> rp(idx.size()), rt(idx.size());
            std::vector<int> re(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) {
                rp[k] = p[idx[k]];
                rt[k] = tt[idx[k]];
                re[k] = ev[idx[k]];
            }
            return objective_score(rp, rt, re, horizon, which);
        };
        if (e.ici.value) {
            try {
                auto ci = bootstrap_ci([&](const std::vector<std::size_t>& idx) { return resampled(idx, TuneObjective::ici); },
                                       p.size(), bootstrap_b, root.derive(10 + model).next_u64());
                e.ici_lo = ci.lo;
                e.ici_hi = ci.hi;
            } catch (const MetricUndefinedError&) {
            }
        }
        if (e.auc.value) {
            try {
                auto ci = bootstrap_ci([&](const std::vector<std::size_t>& idx) { return resampled(idx, TuneObjective::auc); },
                                       p.size(), bootstrap_b, root.derive(20 + model).next_u64());
                e.auc_lo = ci.lo;
                e.auc_hi = ci.hi;
            } catch (const MetricUndefinedError&) {
            }
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::string external_csv(const std::vector<ExternalEval>& rows) {
    std::string out = "model,n,events,ici,ici_lo,ici_hi,auc,auc_lo,auc_hi\n";
    auto cell = [](std::string& row, const std::optional<double>& v) {
        row += ',';
        if (v) row += num(*v);
    };
    for (const auto& e : rows) {
        std::string row = e.model;
        row += ',' + std::to_string(e.n_scored);
        row += ',' + std::to_string(e.events);
        cell(row, e.ici.value);
        cell(row, e.ici_lo);
        cell(row, e.ici_hi);
        cell(row, e.auc.value);
        cell(row, e.auc_lo);
        cell(row, e.auc_hi);
        row += '\n';
        out += row;
    }
    return out;
}

Cohort cohort_from_config(const ExperimentConfig& cfg) {
    if (!cfg.csv_path.empty()) return ingest_csv(cfg.csv_path, cfg.horizon).cohort;
    return generate_synthetic(cfg.generator, cfg.data_seed).cohort;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    Cohort full = cohort_from_config(cfg);

    std::vector<SeedOutcome> outcomes;
    outcomes.reserve(cfg.n_seeds);
    for (std::size_t i = 0; i < cfg.n_seeds; ++i)
        outcomes.push_back(run_seed(full, cfg, cfg.base_seed + i));

    ExperimentReport report = aggregate(cfg, full, std::move(outcomes));

    if (!cfg.out_dir.empty()) {
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(cfg.out_dir, ec);
        if (ec) throw IoError("cannot create output directory " + cfg.out_dir);
        write_text(cfg.out_dir + "/report.json", report_to_json(report));
        write_text(cfg.out_dir + "/metrics.csv", metrics_csv(report));
        if (cfg.save_models) {
            fs::create_directories(cfg.out_dir + "/final", ec);
            if (ec) throw IoError("cannot create final-model directory under " + cfg.out_dir);
            FinalModels finals = fit_final_models(full, report);
            save_params(finals.finetuned, cfg.out_dir + "/final/finetuned_params.json");
            save_forest(finals.forest, cfg.out_dir + "/final/forest.json");
            save_booster(finals.boost, cfg.out_dir + "/final/boost.json");
            save_weights(finals.weights, cfg.out_dir + "/final/weights.json");
        }
    }
    return report;
}

void save_weights(const EnsembleWeights& w, const std::string& path) {
    w.validate();
    write_text(path, weights_json(w).dump(2) + "\n");
}

EnsembleWeights load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    ordered_json j;
    try {
        j = ordered_json::parse(buf.str());
        EnsembleWeights w = weights_from_json_obj(j);
        w.validate();
        return w;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("weight file is malformed: ") + e.what());
    }
}

} // namespace survtk
