#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "survtk/error.hpp"

namespace survtk {

using Objective = std::function<double(const std::vector<double>&)>;

struct NMConfig {
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
    std::vector<double> initial_step; // per coordinate; scalar_step used when empty
    double scalar_step = 0.05;
    std::size_t max_evals = 2000;
    double spread_tol = 1e-6;
    // The objective-spread test alone stalls on symmetric brackets around a
    // minimum (equal values at both vertices), so convergence also requires
    // the simplex to be geometrically small.
    double x_tol = 1e-4;

    void validate(std::size_t dim) const;
};

struct NMResult {
    std::vector<double> x;
    double fx = 0.0;
    std::vector<double> trace; // best-so-far objective after each evaluation
    std::size_t evals = 0;
    std::vector<std::vector<double>> simplex; // final vertices, best first
};

// Downhill simplex minimization.  Nonfinite objective values after the start
// are treated as +inf; the result is never worse than any evaluated point.
NMResult nelder_mead(const Objective& f, const std::vector<double>& x0, const NMConfig& cfg);

struct BOConfig {
    std::size_t dim = 1;
    std::vector<double> lower, upper;
    std::size_t initial_points = 8;  // m0 >= dim + 1
    std::size_t total_evals = 60;
    double ei_jitter = 0.01;
    double noise_floor = 1e-6;
    std::size_t candidates_per_iter = 1024;
    std::uint64_t seed = 0;
    // extra points evaluated before the random design (e.g. simplex vertices)
    std::vector<std::vector<double>> seeded_points;

    void validate() const;
};

struct BOResult {
    std::vector<double> x;
    double fx = 0.0;
    std::vector<std::vector<double>> eval_x;
    std::vector<double> eval_f;
};

// Gaussian-process expected-improvement maximization over a box.  The
// surrogate uses a squared-exponential kernel on inputs scaled to the unit
// cube, with observations standardized and the length-scale chosen by
// marginal likelihood over a small grid.  Candidates come from a Halton set
// each iteration.  If the observations carry no spread the proposal falls
// back to uniform random points.
BOResult bayes_opt_maximize(const Objective& f, const BOConfig& cfg);

// Exhaustive lattice maximization at fixed resolution, for checking the
// optimizers on 1-D and 2-D problems.
BOResult grid_oracle_maximize(const Objective& f, const std::vector<double>& lower,
                              const std::vector<double>& upper, double resolution = 0.01);

} // namespace survtk
