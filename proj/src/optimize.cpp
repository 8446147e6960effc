#include "survtk/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "survtk/linalg.hpp"
#include "survtk/rng.hpp"

namespace survtk {

void NMConfig::validate(std::size_t dim) const {
    if (reflection <= 0.0 || expansion <= 0.0 || contraction <= 0.0 || shrink <= 0.0)
        throw ConfigError("simplex coefficients must be positive");
    if (expansion <= reflection) throw ConfigError("expansion must exceed reflection");
    if (!initial_step.empty() && initial_step.size() != dim)
        throw ConfigError("initial_step length does not match the dimension");
    if (max_evals < dim + 2) throw ConfigError("max_evals too small for one simplex");
}

NMResult nelder_mead(const Objective& f, const std::vector<double>& x0, const NMConfig& cfg) {
    const std::size_t d = x0.size();
    if (d == 0) throw ConfigError("empty start point");
    cfg.validate(d);

    NMResult res;
    res.evals = 0;

    double best_seen = std::numeric_limits<double>::infinity();
    auto eval = [&](const std::vector<double>& x) {
        double v = f(x);
        if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
        ++res.evals;
        best_seen = std::min(best_seen, v);
        res.trace.push_back(best_seen);
        return v;
    };

    double f0 = f(x0);
    if (!std::isfinite(f0)) throw DataError("objective is not finite at the start point");
    ++res.evals;
    best_seen = f0;
    res.trace.push_back(f0);

    // vertices plus objective values, kept sorted ascending by value
    std::vector<std::vector<double>> v(d + 1, x0);
    std::vector<double> fv(d + 1);
    fv[0] = f0;
    for (std::size_t i = 0; i < d; ++i) {
        double step = cfg.initial_step.empty() ? cfg.scalar_step : cfg.initial_step[i];
        v[i + 1][i] += step;
        fv[i + 1] = eval(v[i + 1]);
    }

    auto order = [&] {
        std::vector<std::size_t> idx(d + 1);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> nv;
        std::vector<double> nf;
        for (auto i : idx) {
            nv.push_back(std::move(v[i]));
            nf.push_back(fv[i]);
        }
        v = std::move(nv);
        fv = std::move(nf);
    };

    order();
    while (res.evals + 1 < cfg.max_evals) {
        if (std::isfinite(fv[d]) && fv[d] - fv[0] < cfg.spread_tol) {
            double diameter = 0.0;
            for (std::size_t i = 1; i <= d; ++i)
                for (std::size_t c = 0; c < d; ++c)
                    diameter = std::max(diameter, std::abs(v[i][c] - v[0][c]));
            if (diameter < cfg.x_tol) break;
        }

        std::vector<double> centroid(d, 0.0);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t c = 0; c < d; ++c) centroid[c] += v[i][c];
        for (double& c : centroid) c /= static_cast<double>(d);

        auto blend = [&](double coef) {
            std::vector<double> x(d);
            for (std::size_t c = 0; c < d; ++c) x[c] = centroid[c] + coef * (centroid[c] - v[d][c]);
            return x;
        };

        std::vector<double> xr = blend(cfg.reflection);
        double fr = eval(xr);

        if (fr < fv[0]) {
            if (res.evals + 1 >= cfg.max_evals) {
                v[d] = xr;
                fv[d] = fr;
                order();
                break;
            }
            std::vector<double> xe = blend(cfg.expansion);
            double fe = eval(xe);
            if (fe < fr) {
                v[d] = std::move(xe);
                fv[d] = fe;
            } else {
                v[d] = std::move(xr);
                fv[d] = fr;
            }
        } else if (fr < fv[d - 1]) {
            v[d] = std::move(xr);
            fv[d] = fr;
        } else {
            bool outside = fr < fv[d];
            std::vector<double> xc(d);
            if (outside) {
                for (std::size_t c = 0; c < d; ++c)
                    xc[c] = centroid[c] + cfg.contraction * (xr[c] - centroid[c]);
            } else {
                for (std::size_t c = 0; c < d; ++c)
                    xc[c] = centroid[c] - cfg.contraction * (centroid[c] - v[d][c]);
            }
            double fc = eval(xc);
            if (fc < (outside ? fr : fv[d])) {
                v[d] = std::move(xc);
                fv[d] = fc;
            } else {
                // shrink everything toward the best vertex
                for (std::size_t i = 1; i <= d; ++i) {
                    for (std::size_t c = 0; c < d; ++c)
                        v[i][c] = v[0][c] + cfg.shrink * (v[i][c] - v[0][c]);
                    if (res.evals + 1 >= cfg.max_evals) break;
                    fv[i] = eval(v[i]);
                }
            }
        }
        order();
    }

    res.x = v[0];
    res.fx = fv[0];
    res.simplex = v;
    return res;
}

void BOConfig::validate() const {
    if (dim == 0) throw ConfigError("dimension must be positive");
    if (lower.size() != dim || upper.size() != dim) throw ConfigError("bounds must match the dimension");
    for (std::size_t i = 0; i < dim; ++i) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] >= upper[i])
            throw ConfigError("bounds must be finite with lower < upper");
    }
    if (initial_points < dim + 1) throw ConfigError("need at least dim + 1 initial points");
    if (total_evals <= initial_points + seeded_points.size())
        throw ConfigError("total evaluations must exceed the initial design");
    if (candidates_per_iter < 2) throw ConfigError("candidate set too small");
    for (const auto& p : seeded_points)
        if (p.size() != dim) throw ConfigError("seeded point has wrong dimension");
}

namespace {

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846); }

double halton(std::size_t index, std::size_t base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(index % base);
        index /= base;
    }
    return r;
}

constexpr std::size_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

struct GpModel {
    Cholesky chol;
    std::vector<double> alpha; // K^{-1} y
    double length = 0.5;
    bool ok = false;
};

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

GpModel fit_gp(const std::vector<std::vector<double>>& x01, const std::vector<double>& y_std,
               double noise) {
    const std::size_t n = x01.size();
    GpModel best;
    double best_ml = -std::numeric_limits<double>::infinity();
    for (double len : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
        std::vector<double> k(n * n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double v = std::exp(-sq_dist(x01[i], x01[j]) / (2.0 * len * len));
                k[i * n + j] = k[j * n + i] = v;
            }
            k[i * n + i] += noise;
        }
        Cholesky ch;
        try {
            ch = Cholesky::factor(k, n);
        } catch (const NumericError&) {
            continue;
        }
        std::vector<double> alpha = ch.solve(y_std);
        double quad = std::inner_product(y_std.begin(), y_std.end(), alpha.begin(), 0.0);
        double ml = -0.5 * quad - 0.5 * ch.log_det();
        if (ml > best_ml) {
            best_ml = ml;
            best.chol = std::move(ch);
            best.alpha = std::move(alpha);
            best.length = len;
            best.ok = true;
        }
    }
    return best;
}

} // namespace

BOResult bayes_opt_maximize(const Objective& f, const BOConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.dim;
    Rng rng(cfg.seed);

    BOResult res;
    auto to01 = [&](const std::vector<double>& x) {
        std::vector<double> u(d);
        for (std::size_t i = 0; i < d; ++i) u[i] = (x[i] - cfg.lower[i]) / (cfg.upper[i] - cfg.lower[i]);
        return u;
    };
    auto eval = [&](std::vector<double> x) {
        double v = f(x);
        if (!std::isfinite(v)) v = -std::numeric_limits<double>::infinity();
        res.eval_x.push_back(std::move(x));
        res.eval_f.push_back(v);
    };

    for (const auto& p : cfg.seeded_points) eval(p);
    for (std::size_t i = 0; i < cfg.initial_points; ++i) {
        std::vector<double> x(d);
        for (std::size_t c = 0; c < d; ++c) x[c] = rng.uniform(cfg.lower[c], cfg.upper[c]);
        eval(std::move(x));
    }

    std::size_t halton_cursor = 1;
    while (res.eval_x.size() < cfg.total_evals) {
        const std::size_t n = res.eval_x.size();

        double mean = 0.0;
        std::size_t n_fin = 0;
        for (double yv : res.eval_f)
            if (std::isfinite(yv)) {
                mean += yv;
                ++n_fin;
            }
        mean = n_fin > 0 ? mean / static_cast<double>(n_fin) : 0.0;
        double var = 0.0;
        for (double yv : res.eval_f)
            if (std::isfinite(yv)) var += (yv - mean) * (yv - mean);
        var = n_fin > 1 ? var / static_cast<double>(n_fin - 1) : 0.0;
        const double sd = std::sqrt(var);

        std::vector<double> next;
        if (sd < 1e-12) {
            // flat observations carry no gradient for the surrogate
            next.resize(d);
            for (std::size_t c = 0; c < d; ++c) next[c] = rng.uniform(cfg.lower[c], cfg.upper[c]);
        } else {
            std::vector<std::vector<double>> x01;
            std::vector<double> y_std;
            for (std::size_t i = 0; i < n; ++i) {
                if (!std::isfinite(res.eval_f[i])) continue;
                x01.push_back(to01(res.eval_x[i]));
                y_std.push_back((res.eval_f[i] - mean) / sd);
            }
            GpModel gp = fit_gp(x01, y_std, cfg.noise_floor);
            if (!gp.ok) {
                next.resize(d);
                for (std::size_t c = 0; c < d; ++c) next[c] = rng.uniform(cfg.lower[c], cfg.upper[c]);
            } else {
                double y_best = *std::max_element(y_std.begin(), y_std.end());
                double best_ei = -1.0;
                const std::size_t m = x01.size();
                std::vector<double> kstar(m);
                for (std::size_t cand = 0; cand < cfg.candidates_per_iter; ++cand) {
                    std::vector<double> u(d);
                    for (std::size_t c = 0; c < d; ++c)
                        u[c] = halton(halton_cursor + cand, kPrimes[c % std::size(kPrimes)]);
                    for (std::size_t i = 0; i < m; ++i)
                        kstar[i] = std::exp(-sq_dist(u, x01[i]) / (2.0 * gp.length * gp.length));
                    double mu = std::inner_product(kstar.begin(), kstar.end(), gp.alpha.begin(), 0.0);
                    std::vector<double> v = gp.chol.solve(kstar);
                    double s2 = 1.0 + cfg.noise_floor - std::inner_product(kstar.begin(), kstar.end(), v.begin(), 0.0);
                    double s = std::sqrt(std::max(s2, 1e-12));
                    double gamma = (mu - y_best - cfg.ei_jitter) / s;
                    double ei = s * (gamma * std_normal_cdf(gamma) + std_normal_pdf(gamma));
                    if (ei > best_ei) {
                        best_ei = ei;
                        next.resize(d);
                        for (std::size_t c = 0; c < d; ++c)
                            next[c] = cfg.lower[c] + u[c] * (cfg.upper[c] - cfg.lower[c]);
                    }
                }
                halton_cursor += cfg.candidates_per_iter;
            }
        }
        eval(std::move(next));
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < res.eval_f.size(); ++i)
        if (res.eval_f[i] > res.eval_f[best]) best = i;
    res.x = res.eval_x[best];
    res.fx = res.eval_f[best];
    return res;
}

BOResult grid_oracle_maximize(const Objective& f, const std::vector<double>& lower,
                              const std::vector<double>& upper, double resolution) {
    if (lower.empty() || lower.size() > 2 || lower.size() != upper.size())
        throw ConfigError("grid oracle supports 1 or 2 dimensions");
    if (resolution <= 0.0) throw ConfigError("resolution must be positive");

    BOResult res;
    res.fx = -std::numeric_limits<double>::infinity();
    auto consider = [&](const std::vector<double>& x) {
        double v = f(x);
        if (std::isfinite(v) && v > res.fx) {
            res.fx = v;
            res.x = x;
        }
    };

    const std::size_t n0 = static_cast<std::size_t>(std::round((upper[0] - lower[0]) / resolution));
    if (lower.size() == 1) {
        for (std::size_t i = 0; i <= n0; ++i) consider({lower[0] + resolution * static_cast<double>(i)});
    } else {
        const std::size_t n1 = static_cast<std::size_t>(std::round((upper[1] - lower[1]) / resolution));
        for (std::size_t i = 0; i <= n0; ++i)
            for (std::size_t j = 0; j <= n1; ++j)
                consider({lower[0] + resolution * static_cast<double>(i),
                          lower[1] + resolution * static_cast<double>(j)});
    }
    if (res.x.empty()) throw FitError("objective was nonfinite on the entire grid");
    return res;
}

} // namespace survtk
