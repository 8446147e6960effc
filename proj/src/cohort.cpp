#include "survtk/cohort.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace survtk {

std::size_t Cohort::count_events() const {
    std::size_t n = 0;
    for (const auto& r : records) n += static_cast<std::size_t>(r.event);
    return n;
}

MappingProfile parse_mapping_profile(const std::string& name) {
    if (name == "ma27") return MappingProfile::ma27;
    if (name == "seer") return MappingProfile::seer;
    if (name == "team") return MappingProfile::team;
    throw ConfigError("unknown mapping profile '" + name + "' (expected ma27, seer or team)");
}

const char* mapping_profile_name(MappingProfile p) {
    switch (p) {
        case MappingProfile::ma27: return "ma27";
        case MappingProfile::seer: return "seer";
        case MappingProfile::team: return "team";
    }
    return "?";
}

namespace {

const std::array<const char*, 13> kColumns = {
    "age",     "nodal_stage",  "node_count",   "laterality",  "er",
    "pr",      "size_mm",      "grade",        "radiotherapy", "chemotherapy",
    "trastuzumab", "time",     "event",
};

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& cell, std::size_t row, const char* col) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || p != cell.data() + cell.size())
        throw DataError("row " + std::to_string(row) + ": cannot parse " + col + " value '" + cell + "'");
    return v;
}

int parse_int(const std::string& cell, std::size_t row, const char* col) {
    int v = 0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || p != cell.data() + cell.size())
        throw DataError("row " + std::to_string(row) + ": cannot parse " + col + " value '" + cell + "'");
    return v;
}

int parse_binary(const std::string& cell, std::size_t row, const char* col) {
    int v = parse_int(cell, row, col);
    if (v != 0 && v != 1)
        throw DataError("row " + std::to_string(row) + ": " + col + " must be 0 or 1, got '" + cell + "'");
    return v;
}

} // namespace

IngestResult ingest_csv_text(const std::string& text, double horizon, const std::string& provenance) {
    if (horizon <= 0.0) throw ConfigError("horizon must be positive");
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty input, no header line");

    auto header = split_line(line);
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
        if (i >= header.size() || header[i] != kColumns[i]) {
            std::string got = i < header.size() ? header[i] : "<absent>";
            throw SchemaError("header column " + std::to_string(i + 1) + " should be '" + kColumns[i] +
                              "', got '" + got + "'");
        }
    }
    if (header.size() != kColumns.size())
        throw SchemaError("header has " + std::to_string(header.size()) + " columns, expected " +
                          std::to_string(kColumns.size()));

    IngestResult out;
    out.cohort.horizon = horizon;
    out.cohort.provenance = provenance;

    std::size_t row = 1; // header is row 0
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            ++row;
            continue;
        }
        auto cells = split_line(line);
        if (cells.size() != kColumns.size())
            throw DataError("row " + std::to_string(row) + ": " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(kColumns.size()));

        PatientRecord r;
        r.age = parse_double(cells[0], row, "age");
        if (r.age <= 0.0) throw DataError("row " + std::to_string(row) + ": age must be positive");

        if (!cells[1].empty()) {
            const std::string& s = cells[1];
            if (s == "N0") r.nodal_stage = NodalStage::n0;
            else if (s == "N1") r.nodal_stage = NodalStage::n1;
            else if (s == "N2") r.nodal_stage = NodalStage::n2;
            else if (s == "N3") r.nodal_stage = NodalStage::n3;
            else throw DataError("row " + std::to_string(row) + ": bad nodal_stage '" + s + "'");
        }
        if (!cells[2].empty()) {
            int n = parse_int(cells[2], row, "node_count");
            if (n < 0) throw DataError("row " + std::to_string(row) + ": node_count must be >= 0");
            r.node_count = n;
        }
        if (!cells[3].empty()) {
            const std::string& s = cells[3];
            if (s == "left") r.laterality = Laterality::left;
            else if (s == "right") r.laterality = Laterality::right;
            else if (s == "bilateral") r.laterality = Laterality::bilateral;
            else throw DataError("row " + std::to_string(row) + ": bad laterality '" + s + "'");
        }
        if (!cells[4].empty()) r.er = parse_binary(cells[4], row, "er");
        if (!cells[5].empty()) r.pr = parse_binary(cells[5], row, "pr");
        if (!cells[6].empty()) {
            double v = parse_double(cells[6], row, "size_mm");
            if (v <= 0.0) throw DataError("row " + std::to_string(row) + ": size_mm must be positive");
            r.size_mm = v;
        }
        if (!cells[7].empty()) {
            int g = parse_int(cells[7], row, "grade");
            if (g < 1 || g > 3) throw DataError("row " + std::to_string(row) + ": grade must be 1..3");
            r.grade = g;
        }
        if (!cells[8].empty()) r.radiotherapy = parse_binary(cells[8], row, "radiotherapy");
        if (!cells[9].empty()) r.chemotherapy = parse_binary(cells[9], row, "chemotherapy");
        if (!cells[10].empty()) r.trastuzumab = parse_binary(cells[10], row, "trastuzumab");

        r.time = parse_double(cells[11], row, "time");
        r.event = parse_binary(cells[12], row, "event");

        if (r.time <= 0.0) {
            ++out.dropped_nonpositive_time;
            ++row;
            continue;
        }
        // An event recorded past the horizon is outside the observation
        // window: recode as censored at the horizon.
        if (r.event == 1 && r.time > horizon) {
            r.event = 0;
            r.time = horizon;
            ++out.censored_beyond_horizon;
        }
        out.cohort.records.push_back(r);
        ++row;
    }
    if (out.cohort.records.empty()) throw DataError("no usable rows after filtering");
    return out;
}

IngestResult ingest_csv(const std::string& path, double horizon) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << f.rdbuf();
    return ingest_csv_text(buf.str(), horizon, path);
}

BaselineInput map_to_baseline_input(const PatientRecord& r, MappingProfile profile) {
    BaselineInput x;
    x.year_dx = 2003;
    x.age = r.age;
    x.postmenopausal = 1;
    x.smoker = 0;
    x.er = r.er;
    x.pr = r.pr;
    x.her2 = (r.trastuzumab && *r.trastuzumab == 1) ? 1 : 0;
    x.ki67 = std::nullopt; // never recorded in these sources
    x.size_mm = r.size_mm;
    x.grade = r.grade;
    x.detection_mode = (r.age >= 50.0 && r.age <= 75.0) ? 0.5 : 0.0;

    // Node count directly when the registry recorded one; otherwise the
    // N-stage approximation N0/N1/N2/N3 -> 0/2/7/10.
    bool prefer_count = profile == MappingProfile::seer || profile == MappingProfile::team;
    if (prefer_count && r.node_count) {
        x.nodes = static_cast<double>(*r.node_count);
    } else if (r.nodal_stage) {
        switch (*r.nodal_stage) {
            case NodalStage::n0: x.nodes = 0.0; break;
            case NodalStage::n1: x.nodes = 2.0; break;
            case NodalStage::n2: x.nodes = 7.0; break;
            case NodalStage::n3: x.nodes = 10.0; break;
        }
    } else if (r.node_count) {
        x.nodes = static_cast<double>(*r.node_count);
    }

    x.micrometastases_half_node = 0;
    x.radiotherapy = r.radiotherapy;
    if (r.radiotherapy && *r.radiotherapy == 1) {
        if (!r.laterality) x.heart_dose_gy = 1.0;
        else if (*r.laterality == Laterality::right) x.heart_dose_gy = 0.0;
        else x.heart_dose_gy = 2.0; // left; bilateral treated as left-sided
    } else {
        x.heart_dose_gy = 0.0;
    }

    x.hormone_tx = 1;
    x.chemo_tx = (r.chemotherapy && *r.chemotherapy == 1) ? 1 : 0;
    x.trastuzumab_tx = (r.trastuzumab && *r.trastuzumab == 1) ? 1 : 0;
    x.bisphosphonate_tx = 0;
    if (x.chemo_tx == 0) {
        x.chemo_regimen = ChemoRegimen::none;
    } else if (profile == MappingProfile::team) {
        x.chemo_regimen = ChemoRegimen::standard_anthracycline;
    } else {
        x.chemo_regimen = ChemoRegimen::taxane_or_highdose;
    }
    return x;
}

SplitTriple split_cohort(const Cohort& c, std::uint64_t seed) {
    const std::size_t n = c.size();
    if (n < 10) throw DataError("cohort of " + std::to_string(n) + " records is too small to split");

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng = Rng(seed).derive(0x5eedu);
    rng.shuffle(idx);

    std::size_t na = n * 6 / 10, nb = n * 2 / 10, nc = n * 2 / 10;
    std::size_t rem = n - na - nb - nc;
    if (rem > 0) { ++na; --rem; }
    if (rem > 0) { ++nb; --rem; }
    nc = n - na - nb;

    SplitTriple s;
    s.seed = seed;
    s.train_a.horizon = s.test_b.horizon = s.valid_c.horizon = c.horizon;
    s.train_a.provenance = c.provenance + "/A";
    s.test_b.provenance = c.provenance + "/B";
    s.valid_c.provenance = c.provenance + "/C";
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = idx[i];
        if (i < na) {
            s.train_a.records.push_back(c.records[j]);
            s.idx_a.push_back(j);
        } else if (i < na + nb) {
            s.test_b.records.push_back(c.records[j]);
            s.idx_b.push_back(j);
        } else {
            s.valid_c.records.push_back(c.records[j]);
            s.idx_c.push_back(j);
        }
    }
    return s;
}

void GeneratorConfig::validate() const {
    auto rate = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0))
            throw ConfigError(std::string(name) + " must be in [0,1]");
    };
    if (n == 0) throw ConfigError("n must be positive");
    if (horizon <= 0.0) throw ConfigError("horizon must be positive");
    rate(event_rate_target, "event_rate_target");
    if (event_rate_target <= 0.0) throw ConfigError("event_rate_target must be > 0");
    rate(censor_rate, "censor_rate");
    rate(p_er, "p_er");
    rate(p_pr, "p_pr");
    rate(p_radiotherapy, "p_radiotherapy");
    rate(p_chemotherapy, "p_chemotherapy");
    rate(p_trastuzumab, "p_trastuzumab");
    rate(miss_size, "miss_size");
    rate(miss_grade, "miss_grade");
    rate(miss_radiotherapy, "miss_radiotherapy");
    rate(miss_trastuzumab, "miss_trastuzumab");
    rate(miss_pr, "miss_pr");
    rate(missing_correlation, "missing_correlation");
    if (weibull_shape <= 0.0) throw ConfigError("weibull_shape must be positive");
    for (const auto* c : {&nodal_stage, &laterality, &grade}) {
        double sum = 0.0;
        for (double p : c->probs) {
            rate(p, "categorical probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("categorical probabilities must sum to 1");
    }
}

GeneratorConfig GeneratorConfig::ma27_like() {
    GeneratorConfig g;
    g.miss_size = 0.207;
    g.miss_grade = 0.219;
    g.miss_radiotherapy = 0.289;
    g.miss_trastuzumab = 0.747;
    g.miss_pr = 0.020;
    g.missing_correlation = 1.0;
    return g;
}

namespace {

std::size_t draw_categorical(Rng& rng, const CategoricalSpec& spec) {
    double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t k = 0; k < spec.probs.size(); ++k) {
        acc += spec.probs[k];
        if (u < acc) return k;
    }
    return spec.probs.size() - 1;
}

} // namespace

SyntheticCohort generate_synthetic(const GeneratorConfig& config, std::uint64_t seed) {
    config.validate();
    const std::size_t n = config.n;
    const double h = config.horizon;
    const double b = config.weibull_shape;

    Rng root(seed);
    Rng cov_rng = root.derive(1);
    Rng cens_rng = root.derive(2);
    Rng event_rng = root.derive(3);
    Rng miss_rng = root.derive(4);

    SyntheticCohort out;
    out.cohort.horizon = h;
    out.cohort.provenance = "synthetic";
    out.cohort.records.resize(n);
    out.true_survival.resize(n);

    std::vector<double> eta(n), censor_t(n), u_event(n);
    static const double kStageNodes[4] = {0.0, 2.0, 7.0, 10.0};

    for (std::size_t i = 0; i < n; ++i) {
        PatientRecord& r = out.cohort.records[i];
        r.age = std::clamp(cov_rng.normal(config.age_mean, config.age_sd), config.age_min, config.age_max);
        double size = std::clamp(std::exp(cov_rng.normal(config.log_size_mean, config.log_size_sd)),
                                 config.size_min, config.size_max);
        r.size_mm = size;
        std::size_t stage = draw_categorical(cov_rng, config.nodal_stage);
        r.nodal_stage = static_cast<NodalStage>(stage);
        r.node_count = static_cast<int>(kStageNodes[stage]);
        r.laterality = static_cast<Laterality>(draw_categorical(cov_rng, config.laterality));
        r.er = cov_rng.bernoulli(config.p_er) ? 1 : 0;
        r.pr = cov_rng.bernoulli(config.p_pr) ? 1 : 0;
        int grade = static_cast<int>(draw_categorical(cov_rng, config.grade)) + 1;
        r.grade = grade;
        r.radiotherapy = cov_rng.bernoulli(config.p_radiotherapy) ? 1 : 0;
        r.chemotherapy = cov_rng.bernoulli(config.p_chemotherapy) ? 1 : 0;
        r.trastuzumab = cov_rng.bernoulli(config.p_trastuzumab) ? 1 : 0;

        eta[i] = config.beta_age * (r.age - 64.0) / 10.0 +
                 config.beta_log_size * (std::log(size) - std::log(15.0)) +
                 config.beta_nodes * std::log(kStageNodes[stage] + 1.0) +
                 (grade == 2 ? config.beta_grade2 : 0.0) + (grade == 3 ? config.beta_grade3 : 0.0) +
                 config.beta_er * *r.er + config.beta_pr * *r.pr +
                 config.beta_chemo * *r.chemotherapy + config.beta_trastuzumab * *r.trastuzumab +
                 config.beta_radiotherapy * *r.radiotherapy;

        censor_t[i] = cens_rng.bernoulli(config.censor_rate) ? cens_rng.uniform(0.0, h) : h;
        u_event[i] = event_rng.uniform01();
    }

    // Calibrate the baseline log-scale so the expected observed-event
    // fraction hits the target, given the realized covariates and censoring.
    auto expected_rate = [&](double a) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += 1.0 - std::exp(-std::exp(a + eta[i]) * std::pow(censor_t[i], b));
        return s / static_cast<double>(n);
    };
    double lo = -40.0, hi = 10.0;
    if (expected_rate(hi) < config.event_rate_target)
        throw ConfigError("event_rate_target unreachable with the configured censoring");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (expected_rate(mid) < config.event_rate_target) lo = mid; else hi = mid;
    }
    const double a = 0.5 * (lo + hi);
    out.calibrated_log_scale = a;

    for (std::size_t i = 0; i < n; ++i) {
        PatientRecord& r = out.cohort.records[i];
        double scale = std::exp(a + eta[i]);
        double t_event = std::pow(-std::log1p(-u_event[i]) / scale, 1.0 / b);
        if (t_event <= censor_t[i]) {
            r.time = t_event;
            r.event = 1;
        } else {
            r.time = censor_t[i];
            r.event = 0;
        }
        if (r.time <= 0.0) r.time = 1e-12; // guards against underflow at u ~ 0
        out.true_survival[i] = std::exp(-scale * std::pow(h, b));
    }

    // Missingness: each field is erased when its effective uniform falls
    // below the field rate; with probability `missing_correlation` that
    // uniform is a record-level shared draw, which nests the missing sets.
    for (std::size_t i = 0; i < n; ++i) {
        PatientRecord& r = out.cohort.records[i];
        double shared = miss_rng.uniform01();
        auto erased = [&](double field_rate) {
            double u_own = miss_rng.uniform01();
            bool use_shared = miss_rng.bernoulli(config.missing_correlation);
            return (use_shared ? shared : u_own) < field_rate;
        };
        if (erased(config.miss_size)) r.size_mm.reset();
        if (erased(config.miss_grade)) r.grade.reset();
        if (erased(config.miss_radiotherapy)) r.radiotherapy.reset();
        if (erased(config.miss_trastuzumab)) r.trastuzumab.reset();
        if (erased(config.miss_pr)) r.pr.reset();
    }
    return out;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string cohort_to_csv(const Cohort& c) {
    std::string out = "age,nodal_stage,node_count,laterality,er,pr,size_mm,grade,"
                      "radiotherapy,chemotherapy,trastuzumab,time,event\n";
    static const char* kStages[4] = {"N0", "N1", "N2", "N3"};
    static const char* kSides[3] = {"left", "right", "bilateral"};
    for (const auto& r : c.records) {
        out += fmt_double(r.age);
        out += ',';
        if (r.nodal_stage) out += kStages[static_cast<int>(*r.nodal_stage)];
        out += ',';
        if (r.node_count) out += std::to_string(*r.node_count);
        out += ',';
        if (r.laterality) out += kSides[static_cast<int>(*r.laterality)];
        out += ',';
        if (r.er) out += std::to_string(*r.er);
        out += ',';
        if (r.pr) out += std::to_string(*r.pr);
        out += ',';
        if (r.size_mm) out += fmt_double(*r.size_mm);
        out += ',';
        if (r.grade) out += std::to_string(*r.grade);
        out += ',';
        if (r.radiotherapy) out += std::to_string(*r.radiotherapy);
        out += ',';
        if (r.chemotherapy) out += std::to_string(*r.chemotherapy);
        out += ',';
        if (r.trastuzumab) out += std::to_string(*r.trastuzumab);
        out += ',';
        out += fmt_double(r.time);
        out += ',';
        out += std::to_string(r.event);
        out += '\n';
    }
    return out;
}

namespace {

using nlohmann::json;

void get_if(const json& j, const char* key, double& v) {
    if (j.contains(key)) v = j.at(key).get<double>();
}
void get_if(const json& j, const char* key, std::size_t& v) {
    if (j.contains(key)) v = j.at(key).get<std::size_t>();
}
void get_if(const json& j, const char* key, CategoricalSpec& v) {
    if (j.contains(key)) v.probs = j.at(key).get<std::vector<double>>();
}

} // namespace

std::string GeneratorConfig::to_json() const {
    json j;
    j["version"] = version;
    j["n"] = n;
    j["horizon"] = horizon;
    j["event_rate_target"] = event_rate_target;
    j["censor_rate"] = censor_rate;
    j["age_mean"] = age_mean;
    j["age_sd"] = age_sd;
    j["age_min"] = age_min;
    j["age_max"] = age_max;
    j["log_size_mean"] = log_size_mean;
    j["log_size_sd"] = log_size_sd;
    j["size_min"] = size_min;
    j["size_max"] = size_max;
    j["nodal_stage"] = nodal_stage.probs;
    j["laterality"] = laterality.probs;
    j["p_er"] = p_er;
    j["p_pr"] = p_pr;
    j["grade"] = grade.probs;
    j["p_radiotherapy"] = p_radiotherapy;
    j["p_chemotherapy"] = p_chemotherapy;
    j["p_trastuzumab"] = p_trastuzumab;
    j["beta_age"] = beta_age;
    j["beta_log_size"] = beta_log_size;
    j["beta_nodes"] = beta_nodes;
    j["beta_grade2"] = beta_grade2;
    j["beta_grade3"] = beta_grade3;
    j["beta_er"] = beta_er;
    j["beta_pr"] = beta_pr;
    j["beta_chemo"] = beta_chemo;
    j["beta_trastuzumab"] = beta_trastuzumab;
    j["beta_radiotherapy"] = beta_radiotherapy;
    j["weibull_shape"] = weibull_shape;
    j["miss_size"] = miss_size;
    j["miss_grade"] = miss_grade;
    j["miss_radiotherapy"] = miss_radiotherapy;
    j["miss_trastuzumab"] = miss_trastuzumab;
    j["miss_pr"] = miss_pr;
    j["missing_correlation"] = missing_correlation;
    return j.dump(2);
}

GeneratorConfig GeneratorConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("generator config is not valid JSON: ") + e.what());
    }
    GeneratorConfig g;
    if (!j.contains("version")) throw ConfigError("generator config lacks a version field");
    if (j.at("version").get<int>() != g.version)
        throw ConfigError("unsupported generator config version");
    try {
        get_if(j, "n", g.n);
        get_if(j, "horizon", g.horizon);
        get_if(j, "event_rate_target", g.event_rate_target);
        get_if(j, "censor_rate", g.censor_rate);
        get_if(j, "age_mean", g.age_mean);
        get_if(j, "age_sd", g.age_sd);
        get_if(j, "age_min", g.age_min);
        get_if(j, "age_max", g.age_max);
        get_if(j, "log_size_mean", g.log_size_mean);
        get_if(j, "log_size_sd", g.log_size_sd);
        get_if(j, "size_min", g.size_min);
        get_if(j, "size_max", g.size_max);
        get_if(j, "nodal_stage", g.nodal_stage);
        get_if(j, "laterality", g.laterality);
        get_if(j, "p_er", g.p_er);
        get_if(j, "p_pr", g.p_pr);
        get_if(j, "grade", g.grade);
        get_if(j, "p_radiotherapy", g.p_radiotherapy);
        get_if(j, "p_chemotherapy", g.p_chemotherapy);
        get_if(j, "p_trastuzumab", g.p_trastuzumab);
        get_if(j, "beta_age", g.beta_age);
        get_if(j, "beta_log_size", g.beta_log_size);
        get_if(j, "beta_nodes", g.beta_nodes);
        get_if(j, "beta_grade2", g.beta_grade2);
        get_if(j, "beta_grade3", g.beta_grade3);
        get_if(j, "beta_er", g.beta_er);
        get_if(j, "beta_pr", g.beta_pr);
        get_if(j, "beta_chemo", g.beta_chemo);
        get_if(j, "beta_trastuzumab", g.beta_trastuzumab);
        get_if(j, "beta_radiotherapy", g.beta_radiotherapy);
        get_if(j, "weibull_shape", g.weibull_shape);
        get_if(j, "miss_size", g.miss_size);
        get_if(j, "miss_grade", g.miss_grade);
        get_if(j, "miss_radiotherapy", g.miss_radiotherapy);
        get_if(j, "miss_trastuzumab", g.miss_trastuzumab);
        get_if(j, "miss_pr", g.miss_pr);
        get_if(j, "missing_correlation", g.missing_correlation);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad generator config field: ") + e.what());
    }
    g.validate();
    return g;
}

} // namespace survtk
