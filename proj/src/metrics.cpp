#include "survtk/metrics.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

#include "survtk/linalg.hpp"
#include "survtk/parallel.hpp"
#include "survtk/rng.hpp"

namespace survtk {

namespace {

void check_outcomes(const std::vector<double>& times, const std::vector<int>& events) {
    if (times.empty()) throw DataError("empty outcome vector");
    if (times.size() != events.size()) throw DataError("times/events length mismatch");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] > 0.0)) throw DataError("nonpositive time in outcome vector");
        if (events[i] != 0 && events[i] != 1) throw DataError("event indicator must be 0 or 1");
    }
}

// indices sorted by ascending time
std::vector<std::size_t> time_order(const std::vector<double>& times) {
    std::vector<std::size_t> idx(times.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    return idx;
}

} // namespace

StepFunction kaplan_meier(const std::vector<double>& times, const std::vector<int>& events) {
    check_outcomes(times, events);
    auto idx = time_order(times);
    const std::size_t n = idx.size();

    StepFunction s;
    s.initial = 1.0;
    double surv = 1.0;
    std::size_t i = 0;
    while (i < n) {
        const double t = times[idx[i]];
        std::size_t at_risk = n - i;
        std::size_t d = 0;
        std::size_t j = i;
        while (j < n && times[idx[j]] == t) {
            d += static_cast<std::size_t>(events[idx[j]]);
            ++j;
        }
        if (d > 0) {
            surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
            s.times.push_back(t);
            s.values.push_back(surv);
        }
        i = j;
    }
    return s;
}

StepFunction censoring_km(const std::vector<double>& times, const std::vector<int>& events) {
    std::vector<int> flipped(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) flipped[i] = 1 - events[i];
    return kaplan_meier(times, flipped);
}

StepFunction nelson_aalen(const std::vector<double>& times, const std::vector<int>& events) {
    check_outcomes(times, events);
    auto idx = time_order(times);
    const std::size_t n = idx.size();

    StepFunction h;
    h.initial = 0.0;
    double chf = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double t = times[idx[i]];
        std::size_t at_risk = n - i;
        std::size_t d = 0;
        std::size_t j = i;
        while (j < n && times[idx[j]] == t) {
            d += static_cast<std::size_t>(events[idx[j]]);
            ++j;
        }
        if (d > 0) {
            chf += static_cast<double>(d) / static_cast<double>(at_risk);
            h.times.push_back(t);
            h.values.push_back(chf);
        }
        i = j;
    }
    return h;
}

namespace {

struct WeightedRisk {
    double risk = 0.0;
    double w = 0.0;
};

struct IpcwSets {
    std::vector<WeightedRisk> cases;    // event by t
    std::vector<WeightedRisk> controls; // survived past t
    double case_w = 0.0;
    double ctrl_w = 0.0;
};

IpcwSets build_ipcw_sets(const std::vector<double>& risks, const std::vector<double>& times,
                         const std::vector<int>& events, double t) {
    check_outcomes(times, events);
    if (risks.size() != times.size()) throw DataError("risks/times length mismatch");
    if (!(t > 0.0)) throw ConfigError("evaluation horizon must be positive");

    StepFunction sc = censoring_km(times, events);
    // Records censored exactly at t were observed event-free through t, so
    // they count as controls; this keeps the metric defined at the follow-up
    // boundary of an administratively censored cohort.  The left limit keeps
    // the control weight finite there, and since that weight is one shared
    // constant it cancels in the ratio anyway.
    const double sc_t = sc.left_value(t);

    IpcwSets out;
    for (std::size_t i = 0; i < risks.size(); ++i) {
        if (times[i] <= t && events[i] == 1) {
            double denom = sc.left_value(times[i]);
            assert(denom > 0.0); // a case at T guarantees censor-survival mass before T
            out.cases.push_back({risks[i], 1.0 / denom});
            out.case_w += 1.0 / denom;
        } else if (times[i] > t || (times[i] == t && events[i] == 0)) {
            assert(sc_t > 0.0);
            out.controls.push_back({risks[i], 1.0 / sc_t});
            out.ctrl_w += 1.0 / sc_t;
        }
    }
    if (out.cases.empty()) throw MetricUndefinedError("no events by the horizon; AUC undefined");
    if (out.controls.empty()) throw MetricUndefinedError("no records surviving the horizon; AUC undefined");
    return out;
}

} // namespace

double ipcw_auc(const std::vector<double>& risks, const std::vector<double>& times,
                const std::vector<int>& events, double t) {
    IpcwSets s = build_ipcw_sets(risks, times, events, t);
    auto by_risk = [](const WeightedRisk& a, const WeightedRisk& b) { return a.risk < b.risk; };
    std::sort(s.cases.begin(), s.cases.end(), by_risk);
    std::sort(s.controls.begin(), s.controls.end(), by_risk);

    // Sweep case groups in ascending risk, tracking the control weight
    // strictly below the group and tied with it.
    double num = 0.0;
    double below = 0.0;
    std::size_t j = 0;
    std::size_t i = 0;
    while (i < s.cases.size()) {
        const double v = s.cases[i].risk;
        double group_w = 0.0;
        while (i < s.cases.size() && s.cases[i].risk == v) {
            group_w += s.cases[i].w;
            ++i;
        }
        while (j < s.controls.size() && s.controls[j].risk < v) {
            below += s.controls[j].w;
            ++j;
        }
        double tied = 0.0;
        for (std::size_t k = j; k < s.controls.size() && s.controls[k].risk == v; ++k) tied += s.controls[k].w;
        num += group_w * (below + 0.5 * tied);
    }
    return num / (s.case_w * s.ctrl_w);
}

// ---------------------------------------------------------------------------
// Proportional-hazards machinery for the calibration smoother.

namespace {

struct CoxFit {
    std::vector<double> beta;
    std::vector<double> col_mean;
    StepFunction h0; // Breslow baseline cumulative hazard at the column means
};

double cox_nll(const std::vector<std::vector<double>>& cols, const std::vector<double>& beta,
               const std::vector<std::size_t>& desc, const std::vector<double>& times,
               const std::vector<int>& events) {
    const std::size_t n = desc.size();
    const std::size_t p = cols.size();
    auto lp = [&](std::size_t i) {
        double v = 0.0;
        for (std::size_t c = 0; c < p; ++c) v += beta[c] * cols[c][i];
        return v;
    };
    double nll = 0.0;
    double s0 = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double t = times[desc[i]];
        std::size_t d = 0;
        while (i < n && times[desc[i]] == t) {
            const std::size_t r = desc[i];
            s0 += std::exp(lp(r));
            if (events[r] == 1) {
                ++d;
                nll -= lp(r);
            }
            ++i;
        }
        if (d > 0) nll += static_cast<double>(d) * std::log(s0);
    }
    return nll;
}

// Newton iterations on the Breslow partial likelihood; columns are centered
// by the caller.  Exact gradient and Hessian via a descending-time sweep.
CoxFit fit_cox_breslow(std::vector<std::vector<double>> cols, const std::vector<double>& times,
                       const std::vector<int>& events) {
    const std::size_t p = cols.size();
    const std::size_t n = times.size();

    CoxFit fit;
    fit.col_mean.assign(p, 0.0);
    for (std::size_t c = 0; c < p; ++c) {
        double m = std::accumulate(cols[c].begin(), cols[c].end(), 0.0) / static_cast<double>(n);
        fit.col_mean[c] = m;
        for (double& v : cols[c]) v -= m;
    }

    std::vector<std::size_t> desc = time_order(times);
    std::reverse(desc.begin(), desc.end());

    fit.beta.assign(p, 0.0);
    double nll = cox_nll(cols, fit.beta, desc, times, events);

    std::vector<double> grad(p), s1(p);
    std::vector<double> hess(p * p), s2(p * p);

    for (int iter = 0; iter < 50; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(hess.begin(), hess.end(), 0.0);
        std::fill(s1.begin(), s1.end(), 0.0);
        std::fill(s2.begin(), s2.end(), 0.0);
        double s0 = 0.0;

        std::size_t i = 0;
        while (i < n) {
            const double t = times[desc[i]];
            std::size_t d = 0;
            while (i < n && times[desc[i]] == t) {
                const std::size_t r = desc[i];
                double lp = 0.0;
                for (std::size_t c = 0; c < p; ++c) lp += fit.beta[c] * cols[c][r];
                const double w = std::exp(lp);
                s0 += w;
                for (std::size_t c = 0; c < p; ++c) {
                    s1[c] += w * cols[c][r];
                    for (std::size_t c2 = 0; c2 <= c; ++c2) s2[c * p + c2] += w * cols[c][r] * cols[c2][r];
                }
                if (events[r] == 1) {
                    ++d;
                    for (std::size_t c = 0; c < p; ++c) grad[c] -= cols[c][r];
                }
                ++i;
            }
            if (d > 0) {
                const double dd = static_cast<double>(d);
                for (std::size_t c = 0; c < p; ++c) {
                    const double mean_c = s1[c] / s0;
                    grad[c] += dd * mean_c;
                    for (std::size_t c2 = 0; c2 <= c; ++c2)
                        hess[c * p + c2] += dd * (s2[c * p + c2] / s0 - mean_c * s1[c2] / s0);
                }
            }
        }
        for (std::size_t c = 0; c < p; ++c)
            for (std::size_t c2 = c + 1; c2 < p; ++c2) hess[c * p + c2] = hess[c2 * p + c];

        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));
        if (gmax < 1e-9) break;

        for (std::size_t c = 0; c < p; ++c) hess[c * p + c] += 1e-8;
        std::vector<double> step;
        try {
            step = Cholesky::factor(hess, p).solve(grad);
        } catch (const NumericError&) {
            break; // flat direction; current beta is as good as it gets
        }

        double scale = 1.0;
        bool moved = false;
        for (int half = 0; half < 40; ++half) {
            std::vector<double> cand(p);
            for (std::size_t c = 0; c < p; ++c) cand[c] = fit.beta[c] - scale * step[c];
            double cand_nll = cox_nll(cols, cand, desc, times, events);
            if (std::isfinite(cand_nll) && cand_nll <= nll + 1e-12) {
                fit.beta = cand;
                nll = cand_nll;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!moved) break;
    }

    // Breslow baseline: increments d/S0 collected in descending time order,
    // then accumulated forward.
    std::vector<double> jump_t, jump_v;
    double s0 = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double t = times[desc[i]];
        std::size_t d = 0;
        while (i < n && times[desc[i]] == t) {
            const std::size_t r = desc[i];
            double lp = 0.0;
            for (std::size_t c = 0; c < p; ++c) lp += fit.beta[c] * cols[c][r];
            s0 += std::exp(lp);
            d += static_cast<std::size_t>(events[r]);
            ++i;
        }
        if (d > 0) {
            jump_t.push_back(t);
            jump_v.push_back(static_cast<double>(d) / s0);
        }
    }
    std::reverse(jump_t.begin(), jump_t.end());
    std::reverse(jump_v.begin(), jump_v.end());
    fit.h0.initial = 0.0;
    fit.h0.times = std::move(jump_t);
    double acc = 0.0;
    for (double v : jump_v) {
        acc += v;
        fit.h0.values.push_back(acc);
    }
    return fit;
}

constexpr double kProbClamp = 1e-6;

double cll(double p) { return std::log(-std::log(p)); }

// Restricted cubic spline columns (Harrell normalization): k knots give the
// identity plus k-2 truncated-cubic terms.
std::vector<std::vector<double>> rcs_columns(const std::vector<double>& x,
                                             const std::vector<double>& knots) {
    const std::size_t k = knots.size();
    std::vector<std::vector<double>> cols;
    cols.push_back(x);
    if (k < 3) return cols;
    const double t_last = knots[k - 1], t_prev = knots[k - 2], t_first = knots[0];
    const double denom = t_last - t_prev;
    const double norm = (t_last - t_first) * (t_last - t_first);
    auto cube_plus = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
    for (std::size_t j = 0; j + 2 < k; ++j) {
        std::vector<double> col(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            double v = cube_plus(x[i] - knots[j]) -
                       cube_plus(x[i] - t_prev) * (t_last - knots[j]) / denom +
                       cube_plus(x[i] - t_last) * (t_prev - knots[j]) / denom;
            col[i] = v / norm;
        }
        cols.push_back(std::move(col));
    }
    return cols;
}

} // namespace

std::vector<double> smoothed_observed(const std::vector<double>& preds,
                                      const std::vector<double>& times,
                                      const std::vector<int>& events, double t) {
    check_outcomes(times, events);
    if (preds.size() != times.size()) throw DataError("preds/times length mismatch");
    const std::size_t n = preds.size();
    if (n < 50) throw MetricUndefinedError("calibration smoothing needs at least 50 records");
    std::size_t n_events = 0;
    for (int e : events) n_events += static_cast<std::size_t>(e);
    if (n_events < 5) throw MetricUndefinedError("calibration smoothing needs at least 5 events");

    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double p = std::clamp(preds[i], kProbClamp, 1.0 - kProbClamp);
        x[i] = cll(p);
    }

    auto km_fallback = [&] {
        double s = kaplan_meier(times, events)(t);
        return std::vector<double>(n, s);
    };

    auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    if (*mx - *mn < 1e-10) return km_fallback();

    std::vector<double> sorted_x = x;
    std::sort(sorted_x.begin(), sorted_x.end());
    std::vector<double> knots;
    for (double q : {0.05, 0.275, 0.5, 0.725, 0.95}) {
        double v = quantile_sorted(sorted_x, q);
        if (knots.empty() || v > knots.back() + 1e-12) knots.push_back(v);
    }

    auto cols = rcs_columns(x, knots);
    // prune columns with no variation so the Newton system stays regular
    std::vector<std::vector<double>> kept;
    for (auto& col : cols) {
        auto [lo, hi] = std::minmax_element(col.begin(), col.end());
        if (*hi - *lo > 1e-12) kept.push_back(std::move(col));
    }
    if (kept.empty()) return km_fallback();

    CoxFit fit = fit_cox_breslow(kept, times, events);

    const double h0_t = fit.h0(t);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double lp = 0.0;
        for (std::size_t c = 0; c < kept.size(); ++c)
            lp += fit.beta[c] * (kept[c][i] - fit.col_mean[c]);
        out[i] = std::exp(-h0_t * std::exp(lp));
    }
    return out;
}

double ici(const std::vector<double>& preds, const std::vector<double>& times,
           const std::vector<int>& events, double t) {
    std::vector<double> obs = smoothed_observed(preds, times, events, t);
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) acc += std::abs(obs[i] - preds[i]);
    return acc / static_cast<double>(preds.size());
}

CalibrationCurve calibration_plot_data(const std::vector<double>& preds,
                                       const std::vector<double>& times,
                                       const std::vector<int>& events, double t) {
    std::vector<double> obs = smoothed_observed(preds, times, events, t);

    std::vector<double> sorted_p = preds;
    std::sort(sorted_p.begin(), sorted_p.end());
    const double p10 = quantile_sorted(sorted_p, 0.10);
    const double p90 = quantile_sorted(sorted_p, 0.90);

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] >= p10 && preds[i] <= p90) keep.push_back(i);
    if (keep.empty()) throw MetricUndefinedError("percentile trimming removed every record");

    std::sort(keep.begin(), keep.end(),
              [&](std::size_t a, std::size_t b) { return preds[a] < preds[b]; });

    CalibrationCurve curve;
    for (std::size_t i : keep) {
        curve.predicted.push_back(preds[i]);
        curve.observed.push_back(obs[i]);
    }

    const std::size_t m = keep.size();
    for (int q = 0; q < 4; ++q) {
        std::size_t lo = m * static_cast<std::size_t>(q) / 4;
        std::size_t hi = m * static_cast<std::size_t>(q + 1) / 4;
        if (m < 4) { lo = 0; hi = m; } // too few records to subdivide: identical bins
        QuartileSummary s;
        s.count = hi - lo;
        for (std::size_t i = lo; i < hi; ++i) {
            s.mean_pred += curve.predicted[i];
            s.mean_obs += curve.observed[i];
        }
        s.mean_pred /= static_cast<double>(s.count);
        s.mean_obs /= static_cast<double>(s.count);
        if (s.count > 1) {
            double vp = 0.0, vo = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                vp += (curve.predicted[i] - s.mean_pred) * (curve.predicted[i] - s.mean_pred);
                vo += (curve.observed[i] - s.mean_obs) * (curve.observed[i] - s.mean_obs);
            }
            s.sd_pred = std::sqrt(vp / static_cast<double>(s.count - 1));
            s.sd_obs = std::sqrt(vo / static_cast<double>(s.count - 1));
        }
        curve.quartiles.push_back(s);
    }
    return curve;
}

std::vector<RocPoint> roc_curve_data(const std::vector<double>& risks,
                                     const std::vector<double>& times,
                                     const std::vector<int>& events, double t) {
    IpcwSets s = build_ipcw_sets(risks, times, events, t);
    auto desc = [](const WeightedRisk& a, const WeightedRisk& b) { return a.risk > b.risk; };
    std::sort(s.cases.begin(), s.cases.end(), desc);
    std::sort(s.controls.begin(), s.controls.end(), desc);

    std::vector<double> thresholds;
    for (const auto& c : s.cases) thresholds.push_back(c.risk);
    for (const auto& c : s.controls) thresholds.push_back(c.risk);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::vector<RocPoint> pts;
    pts.push_back({0.0, 0.0});
    double tp = 0.0, fp = 0.0;
    std::size_t i = 0, j = 0;
    for (double c : thresholds) {
        while (i < s.cases.size() && s.cases[i].risk >= c) tp += s.cases[i++].w;
        while (j < s.controls.size() && s.controls[j].risk >= c) fp += s.controls[j++].w;
        pts.push_back({fp / s.ctrl_w, tp / s.case_w});
    }
    if (pts.back().fpr != 1.0 || pts.back().tpr != 1.0) pts.push_back({1.0, 1.0});
    return pts;
}

BootstrapCi bootstrap_ci(const std::function<double(const std::vector<std::size_t>&)>& metric,
                         std::size_t n, std::size_t b, std::uint64_t seed) {
    if (n == 0) throw DataError("cannot bootstrap an empty sample");
    if (b == 0) throw ConfigError("bootstrap count must be positive");

    std::vector<double> values(b);
    std::vector<char> defined(b, 0);
    Rng root(seed);

    parallel_for(b, [&](std::size_t r) {
        Rng rng = root.derive(r);
        std::vector<std::size_t> idx(n);
        for (auto& v : idx) v = static_cast<std::size_t>(rng.uniform_int(n));
        try {
            values[r] = metric(idx);
            defined[r] = 1;
        } catch (const MetricUndefinedError&) {
            defined[r] = 0;
        }
    });

    BootstrapCi ci;
    std::vector<double> ok;
    for (std::size_t r = 0; r < b; ++r) {
        if (defined[r]) ok.push_back(values[r]);
        else ++ci.skipped;
    }
    if (ci.skipped * 2 > b)
        throw MetricUndefinedError("metric undefined on more than half of the bootstrap resamples");
    std::sort(ok.begin(), ok.end());
    ci.lo = quantile_sorted(ok, 0.025);
    ci.hi = quantile_sorted(ok, 0.975);
    return ci;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw DataError("quantile of empty vector");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double h = q * static_cast<double>(sorted.size() - 1);
    const std::size_t i = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(i);
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

} // namespace survtk
