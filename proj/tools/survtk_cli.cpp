#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "survtk/error.hpp"
#include "survtk/explain.hpp"
#include "survtk/metrics.hpp"
#include "survtk/pipeline.hpp"

using namespace survtk;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir);
}

std::string fmt(double v) { return nlohmann::ordered_json(v).dump(); }

std::string cell(const MetricValue& mv) { return mv.value ? fmt(*mv.value) : "-"; }

struct CommonArgs {
    std::string config_path;
    std::string data_path;
    std::string models_dir;
    std::string out_dir;
    double horizon = 0.0; // 0 keeps the config value
};

ExperimentConfig load_config(const CommonArgs& a) {
    ExperimentConfig cfg;
    if (!a.config_path.empty()) cfg = ExperimentConfig::from_json(slurp(a.config_path));
    if (!a.data_path.empty()) cfg.csv_path = a.data_path;
    if (a.horizon > 0.0) cfg.horizon = a.horizon;
    return cfg;
}

Cohort load_data(const std::string& path, double horizon) {
    if (path.empty()) throw ConfigError("--data is required for this command");
    return ingest_csv(path, horizon).cohort;
}

// record-level survival for one named model, NaN where it cannot score
PredictFn model_predictor(const FinalModels& m, const std::string& name, MappingProfile profile,
                          double t) {
    if (name == "baseline" || name == "finetuned") {
        BaselineParamVector p = name == "baseline" ? m.reference : m.finetuned;
        return [p, profile, t](const PatientRecord& r) {
            auto pred = predict_survival(p, map_to_baseline_input(r, profile), t);
            return pred.valid ? pred.prob : std::nan("");
        };
    }
    if (name == "forest")
        return [&m, t](const PatientRecord& r) { return forest_predict(m.forest, r, t); };
    if (name == "boost")
        return [&m, t](const PatientRecord& r) { return booster_predict(m.boost, r, t); };
    if (name == "ensemble")
        return [&m, profile, t](const PatientRecord& r) {
            auto base = predict_survival(m.finetuned, map_to_baseline_input(r, profile), t);
            auto forest = wrap_valid(forest_predict(m.forest, r, t), "forest");
            auto boost = wrap_valid(booster_predict(m.boost, r, t), "boost");
            return combine(base, forest, boost, m.weights).prob;
        };
    throw ConfigError("unknown model name: " + name);
}

int run_synth(const CommonArgs& a, std::size_t n, std::uint64_t seed, bool with_truth) {
    ExperimentConfig cfg = load_config(a);
    if (n > 0) cfg.generator.n = n;
    if (seed > 0) cfg.data_seed = seed;
    if (a.out_dir.empty()) throw ConfigError("--out is required for synth");
    ensure_dir(a.out_dir);

    SyntheticCohort sc = generate_synthetic(cfg.generator, cfg.data_seed);
    write_file(a.out_dir + "/cohort.csv", cohort_to_csv(sc.cohort));
    if (with_truth) {
        std::string truth = "true_survival\n";
        for (double p : sc.true_survival) truth += fmt(p) + "\n";
        write_file(a.out_dir + "/true_survival.csv", truth);
    }
    std::printf("wrote %s/cohort.csv: n=%zu events=%zu (rate %.4f)\n", a.out_dir.c_str(),
                sc.cohort.size(), sc.cohort.count_events(),
                static_cast<double>(sc.cohort.count_events()) / sc.cohort.size());
    return 0;
}

int run_ingest_check(const CommonArgs& a, double horizon) {
    if (a.data_path.empty()) throw ConfigError("--data is required for ingest-check");
    IngestResult r = ingest_csv(a.data_path, horizon);
    std::size_t scorable = 0;
    for (const auto& rec : r.cohort.records)
        if (validity_check(map_to_baseline_input(rec, MappingProfile::ma27)).empty()) ++scorable;
    std::printf("records: %zu\n", r.cohort.size());
    std::printf("dropped nonpositive time: %zu\n", r.dropped_nonpositive_time);
    std::printf("events recoded to censored at horizon: %zu\n", r.censored_beyond_horizon);
    std::printf("events: %zu (rate %.4f)\n", r.cohort.count_events(),
                r.cohort.size() ? static_cast<double>(r.cohort.count_events()) / r.cohort.size() : 0.0);
    std::printf("baseline-scorable: %zu of %zu (%.1f%%)\n", scorable, r.cohort.size(),
                r.cohort.size() ? 100.0 * static_cast<double>(scorable) / r.cohort.size() : 0.0);
    return 0;
}

int run_train(CommonArgs& a, std::size_t seeds, std::uint64_t base_seed, const std::string& objective,
              bool rebalance, bool skip_models) {
    ExperimentConfig cfg = load_config(a);
    if (seeds > 0) cfg.n_seeds = seeds;
    if (base_seed > 0) cfg.base_seed = base_seed;
    if (!objective.empty()) cfg.objective = parse_objective(objective);
    if (rebalance) cfg.rebalance = true;
    cfg.out_dir = a.out_dir;
    cfg.save_models = !skip_models && !a.out_dir.empty();

    ExperimentReport rep = run_experiment(cfg);
    std::printf("config %s, %zu records (event rate %.4f), %zu seeds\n", rep.config_hash.c_str(),
                rep.n_records, rep.event_rate, rep.seeds.size());
    std::printf("forest: ntree=%zu mtry=%zu nodesize=%zu rule=%s\n", rep.forest_final.ntree,
                rep.forest_final.mtry, rep.forest_final.nodesize,
                split_rule_name(rep.forest_final.splitrule));
    std::printf("boost: eta=%s depth=%zu subsample=%s colsample=%s lambda=%s rounds=%zu\n",
                fmt(rep.boost_final.eta).c_str(), rep.boost_final.max_depth,
                fmt(rep.boost_final.subsample).c_str(), fmt(rep.boost_final.colsample_bytree).c_str(),
                fmt(rep.boost_final.lambda).c_str(), rep.boost_final.nrounds);
    std::printf("weights: baseline=%.4f forest=%.4f boost=%.4f\n", rep.weights_mean.w_baseline,
                rep.weights_mean.w_forest, rep.weights_mean.w_boost);
    for (const auto& ms : rep.summary)
        if (ms.stratum == "overall")
            std::printf("%-10s %s median %.5f [%.5f, %.5f] over %zu seeds\n", ms.model.c_str(),
                        ms.metric.c_str(), ms.median, ms.q1, ms.q3, ms.defined);
    if (!cfg.out_dir.empty()) std::printf("artifacts under %s\n", cfg.out_dir.c_str());
    return 0;
}

int run_evaluate(const CommonArgs& a, double horizon) {
    if (a.models_dir.empty()) throw ConfigError("--models is required for evaluate");
    FinalModels m = load_final_models(a.models_dir);
    Cohort c = load_data(a.data_path, horizon);
    auto rows = evaluate_cohort(m, c, MappingProfile::ma27, horizon);
    std::string csv = evaluation_csv(rows);
    std::printf("%s", csv.c_str());
    if (!a.out_dir.empty()) {
        ensure_dir(a.out_dir);
        write_file(a.out_dir + "/evaluation.csv", csv);
        std::printf("wrote %s/evaluation.csv\n", a.out_dir.c_str());
    }
    return 0;
}

int run_predict(const CommonArgs& a, double horizon) {
    if (a.models_dir.empty()) throw ConfigError("--models is required for predict");
    if (a.out_dir.empty()) throw ConfigError("--out is required for predict");
    FinalModels m = load_final_models(a.models_dir);
    Cohort c = load_data(a.data_path, horizon);

    auto ref = baseline_predictions(m.reference, c, MappingProfile::ma27, horizon);
    auto tuned = baseline_predictions(m.finetuned, c, MappingProfile::ma27, horizon);
    auto forest = forest_predict_cohort(m.forest, c, horizon);
    auto boost = booster_predict_cohort(m.boost, c, horizon);
    ComponentPredictions comps;
    comps.baseline = tuned;
    comps.forest.reserve(c.size());
    comps.boost.reserve(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        comps.forest.push_back(wrap_valid(forest[i], "forest"));
        comps.boost.push_back(wrap_valid(boost[i], "boost"));
    }
    auto ens = combine_all(comps, m.weights);

    std::string csv = "row,time,event,baseline,finetuned,forest,boost,ensemble\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        csv += std::to_string(i);
        csv += ',' + fmt(c.records[i].time);
        csv += ',' + std::to_string(c.records[i].event);
        csv += ',';
        if (ref[i].valid) csv += fmt(ref[i].prob);
        csv += ',';
        if (tuned[i].valid) csv += fmt(tuned[i].prob);
        csv += ',' + fmt(forest[i]);
        csv += ',' + fmt(boost[i]);
        csv += ',';
        if (ens[i].valid) csv += fmt(ens[i].prob);
        csv += '\n';
    }
    ensure_dir(a.out_dir);
    write_file(a.out_dir + "/predictions.csv", csv);
    std::printf("wrote %s/predictions.csv (%zu rows)\n", a.out_dir.c_str(), c.size());
    return 0;
}

int run_explain(const CommonArgs& a, double horizon, const std::string& model, std::size_t draws,
                std::size_t background_cap, std::size_t limit, std::uint64_t seed) {
    if (a.models_dir.empty()) throw ConfigError("--models is required for explain");
    if (a.out_dir.empty()) throw ConfigError("--out is required for explain");
    FinalModels m = load_final_models(a.models_dir);
    Cohort c = load_data(a.data_path, horizon);

    Cohort background = sample_background(c, background_cap, seed);
    Cohort explain_set = c;
    if (limit > 0 && explain_set.size() > limit) explain_set.records.resize(limit);

    PredictFn f = model_predictor(m, model, MappingProfile::ma27, horizon);
    auto results = shap_cohort(f, explain_set, background, draws, seed);
    ShapSummary summary = shap_summary(results);

    ensure_dir(a.out_dir);
    write_file(a.out_dir + "/shap_summary.csv", shap_summary_csv(summary));
    write_file(a.out_dir + "/shap_matrix.csv", shap_matrix_csv(summary));
    std::printf("explained %zu records of %s with %zu draws each\n", explain_set.size(), model.c_str(),
                draws);
    for (std::size_t i = 0; i < summary.features.size(); ++i)
        std::printf("%-14s mean |attribution| %.6f\n", summary.features[i].c_str(),
                    summary.mean_abs_shap[i]);
    std::printf("wrote %s/shap_summary.csv and shap_matrix.csv\n", a.out_dir.c_str());
    return 0;
}

int run_external(const CommonArgs& a, double horizon, std::size_t bootstrap, std::uint64_t seed) {
    if (a.models_dir.empty()) throw ConfigError("--models is required for external-validate");
    FinalModels m = load_final_models(a.models_dir);
    Cohort c = load_data(a.data_path, horizon);
    auto rows = external_validate(m, c, MappingProfile::ma27, horizon, bootstrap, seed);
    for (const auto& e : rows) {
        std::printf("%-10s n=%zu events=%zu ici=%s", e.model.c_str(), e.n_scored, e.events,
                    cell(e.ici).c_str());
        if (e.ici_lo) std::printf(" [%s, %s]", fmt(*e.ici_lo).c_str(), fmt(*e.ici_hi).c_str());
        std::printf(" auc=%s", cell(e.auc).c_str());
        if (e.auc_lo) std::printf(" [%s, %s]", fmt(*e.auc_lo).c_str(), fmt(*e.auc_hi).c_str());
        if (!e.ici.note.empty()) std::printf(" (%s)", e.ici.note.c_str());
        std::printf("\n");
    }
    if (!a.out_dir.empty()) {
        ensure_dir(a.out_dir);
        write_file(a.out_dir + "/external.csv", external_csv(rows));
        std::printf("wrote %s/external.csv\n", a.out_dir.c_str());
    }
    return 0;
}

int run_plot_data(const CommonArgs& a, double horizon, const std::string& model) {
    if (a.models_dir.empty()) throw ConfigError("--models is required for plot-data");
    if (a.out_dir.empty()) throw ConfigError("--out is required for plot-data");
    FinalModels m = load_final_models(a.models_dir);
    Cohort c = load_data(a.data_path, horizon);

    PredictFn f = model_predictor(m, model, MappingProfile::ma27, horizon);
    std::vector<double> preds, times;
    std::vector<int> events;
    for (const auto& r : c.records) {
        double p = f(r);
        if (!std::isfinite(p)) continue;
        preds.push_back(p);
        times.push_back(r.time);
        events.push_back(r.event);
    }
    if (preds.empty()) throw DataError("the " + model + " model scored no record of this cohort");

    CalibrationCurve curve = calibration_plot_data(preds, times, events, horizon);
    std::string cal = "predicted,observed\n";
    for (std::size_t i = 0; i < curve.predicted.size(); ++i)
        cal += fmt(curve.predicted[i]) + ',' + fmt(curve.observed[i]) + '\n';
    std::string quart = "quartile,mean_predicted,mean_observed,sd_predicted,sd_observed,count\n";
    for (std::size_t q = 0; q < curve.quartiles.size(); ++q) {
        const auto& row = curve.quartiles[q];
        quart += std::to_string(q + 1);
        quart += ',' + fmt(row.mean_pred) + ',' + fmt(row.mean_obs);
        quart += ',' + fmt(row.sd_pred) + ',' + fmt(row.sd_obs);
        quart += ',' + std::to_string(row.count) + '\n';
    }

    std::vector<double> risks(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) risks[i] = 1.0 - preds[i];
    auto roc = roc_curve_data(risks, times, events, horizon);
    std::string roc_csv = "fpr,tpr\n";
    for (const auto& pt : roc) roc_csv += fmt(pt.fpr) + ',' + fmt(pt.tpr) + '\n';

    ensure_dir(a.out_dir);
    write_file(a.out_dir + "/calibration_" + model + ".csv", cal);
    write_file(a.out_dir + "/calibration_quartiles_" + model + ".csv", quart);
    write_file(a.out_dir + "/roc_" + model + ".csv", roc_csv);
    std::printf("wrote calibration and roc data for %s under %s (%zu scored records)\n", model.c_str(),
                a.out_dir.c_str(), preds.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"survival prognostication toolkit"};
    app.require_subcommand(1);

    CommonArgs common;
    double horizon = 5.0;
    std::size_t synth_n = 0;
    std::uint64_t synth_seed = 0;
    bool with_truth = false;
    std::size_t train_seeds = 0;
    std::uint64_t base_seed = 0;
    std::string objective;
    bool rebalance = false;
    bool skip_models = false;
    std::string model = "ensemble";
    std::size_t draws = 200;
    std::size_t background_cap = 100;
    std::size_t limit = 50;
    std::uint64_t seed = 1;
    std::size_t bootstrap = 200;

    auto add_common = [&](CLI::App* cmd, bool with_models) {
        cmd->add_option("--config", common.config_path, "experiment config JSON file");
        cmd->add_option("--data", common.data_path, "cohort CSV file");
        cmd->add_option("--out", common.out_dir, "output directory");
        cmd->add_option("--horizon", horizon, "prediction horizon in years");
        if (with_models) cmd->add_option("--models", common.models_dir, "directory of saved final models");
    };

    CLI::App* synth = app.add_subcommand("synth", "simulate a cohort and write it as CSV");
    add_common(synth, false);
    synth->add_option("--n", synth_n, "number of records");
    synth->add_option("--seed", synth_seed, "simulation seed");
    synth->add_flag("--truth", with_truth, "also write true survival probabilities");

    CLI::App* ingest = app.add_subcommand("ingest-check", "parse a CSV and report what survives");
    add_common(ingest, false);

    CLI::App* train = app.add_subcommand("train", "run the full multi-seed protocol");
    add_common(train, false);
    train->add_option("--seeds", train_seeds, "number of protocol repetitions");
    train->add_option("--base-seed", base_seed, "first protocol seed");
    train->add_option("--objective", objective, "tuning objective: ici or auc");
    train->add_flag("--rebalance", rebalance, "rebalance fitting folds toward 50% events");
    train->add_flag("--no-models", skip_models, "skip fitting and saving the final models");

    CLI::App* evaluate = app.add_subcommand("evaluate", "score saved models on a cohort");
    add_common(evaluate, true);

    CLI::App* predict = app.add_subcommand("predict", "per-record survival from saved models");
    add_common(predict, true);

    CLI::App* explain = app.add_subcommand("explain", "feature attributions for one model");
    add_common(explain, true);
    explain->add_option("--model", model, "baseline, finetuned, forest, boost or ensemble");
    explain->add_option("--draws", draws, "Monte Carlo permutations per record");
    explain->add_option("--background", background_cap, "background sample size");
    explain->add_option("--limit", limit, "records to explain, 0 for all");
    explain->add_option("--seed", seed, "attribution seed");

    CLI::App* external = app.add_subcommand("external-validate", "frozen-model metrics with CIs");
    add_common(external, true);
    external->add_option("--bootstrap", bootstrap, "bootstrap resamples");
    external->add_option("--seed", seed, "bootstrap seed");

    CLI::App* plot = app.add_subcommand("plot-data", "calibration and ROC curve points as CSV");
    add_common(plot, true);
    plot->add_option("--model", model, "baseline, finetuned, forest, boost or ensemble");

    CLI11_PARSE(app, argc, argv);

    try {
        common.horizon = horizon;
        if (synth->parsed()) return run_synth(common, synth_n, synth_seed, with_truth);
        if (ingest->parsed()) return run_ingest_check(common, horizon);
        if (train->parsed())
            return run_train(common, train_seeds, base_seed, objective, rebalance, skip_models);
        if (evaluate->parsed()) return run_evaluate(common, horizon);
        if (predict->parsed()) return run_predict(common, horizon);
        if (explain->parsed())
            return run_explain(common, horizon, model, draws, background_cap, limit, seed);
        if (external->parsed()) return run_external(common, horizon, bootstrap, seed);
        if (plot->parsed()) return run_plot_data(common, horizon, model);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
    return 0;
}
