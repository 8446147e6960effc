#include <doctest.h>

#include <cmath>

#include "survtk/optimize.hpp"

using namespace survtk;

TEST_SUITE("optimize") {

TEST_CASE("nelder_mead finds the minimum of a shifted parabola") {
    auto f = [](const std::vector<double>& x) { return (x[0] - 3.0) * (x[0] - 3.0); };
    NMConfig cfg;
    NMResult r = nelder_mead(f, {0.0}, cfg);
    CHECK(std::abs(r.x[0] - 3.0) < 1e-4);
    CHECK(r.fx < 1e-8);
}

TEST_CASE("nelder_mead solves Rosenbrock from the classic start") {
    auto rosen = [](const std::vector<double>& x) {
        double a = 1.0 - x[0];
        double b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
    };
    NMConfig cfg;
    cfg.max_evals = 4000;
    cfg.spread_tol = 1e-12;
    NMResult r = nelder_mead(rosen, {-1.2, 1.0}, cfg);
    CHECK(std::abs(r.x[0] - 1.0) < 1e-3);
    CHECK(std::abs(r.x[1] - 1.0) < 1e-3);

    // cross-check the minimum location against a fine local lattice
    BOResult grid = grid_oracle_maximize(
        [&](const std::vector<double>& x) { return -rosen(x); }, {0.9, 0.9}, {1.1, 1.1}, 0.002);
    CHECK(rosen(r.x) <= -grid.fx + 1e-6);
}

TEST_CASE("nelder_mead on a constant objective returns the start") {
    auto f = [](const std::vector<double>&) { return 4.5; };
    NMResult r = nelder_mead(f, {1.0, 2.0}, NMConfig{});
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(0.1));
    CHECK(r.x[1] == doctest::Approx(2.0).epsilon(0.1));
    CHECK(r.fx == 4.5);
    // repeated shrinks collapse the simplex onto the best vertex
    for (const auto& vertex : r.simplex) {
        CHECK(std::abs(vertex[0] - r.x[0]) < 0.05);
        CHECK(std::abs(vertex[1] - r.x[1]) < 0.05);
    }
}

TEST_CASE("nelder_mead best-so-far trace never increases") {
    auto f = [](const std::vector<double>& x) {
        return std::sin(3.0 * x[0]) + 0.5 * x[0] * x[0] + std::cos(2.0 * x[1]);
    };
    NMResult r = nelder_mead(f, {2.0, -1.0}, NMConfig{});
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
    double best = r.trace.back();
    CHECK(r.fx == best);
}

TEST_CASE("nelder_mead treats nonfinite excursions as infinite") {
    auto f = [](const std::vector<double>& x) {
        if (x[0] < -0.5) return std::nan("");
        return (x[0] - 0.2) * (x[0] - 0.2);
    };
    NMResult r = nelder_mead(f, {0.0}, NMConfig{});
    CHECK(std::abs(r.x[0] - 0.2) < 1e-3);

    auto bad = [](const std::vector<double>&) { return std::nan(""); };
    CHECK_THROWS_AS(nelder_mead(bad, {0.0}, NMConfig{}), DataError);
}

TEST_CASE("nelder_mead validates its configuration") {
    NMConfig cfg;
    cfg.expansion = 0.5; // must exceed reflection
    auto f = [](const std::vector<double>& x) { return x[0] * x[0]; };
    CHECK_THROWS_AS(nelder_mead(f, {1.0}, cfg), ConfigError);
}

TEST_CASE("bayes_opt locates a 1-d quadratic peak within grid-oracle distance") {
    auto f = [](const std::vector<double>& x) { return -(x[0] - 0.3) * (x[0] - 0.3); };
    BOConfig cfg;
    cfg.dim = 1;
    cfg.lower = {0.0};
    cfg.upper = {1.0};
    cfg.initial_points = 6;
    cfg.total_evals = 30;
    cfg.seed = 11;
    BOResult r = bayes_opt_maximize(f, cfg);
    CHECK(std::abs(r.x[0] - 0.3) < 0.05);

    BOResult grid = grid_oracle_maximize(f, {0.0}, {1.0}, 0.01);
    CHECK(std::abs(grid.x[0] - 0.3) < 1e-9);
    CHECK(r.fx >= grid.fx - 0.05 * 0.05);
}

TEST_CASE("bayes_opt returns the best point it actually evaluated") {
    auto f = [](const std::vector<double>& x) {
        return std::sin(7.0 * x[0]) * std::cos(3.0 * x[1]);
    };
    BOConfig cfg;
    cfg.dim = 2;
    cfg.lower = {0.0, 0.0};
    cfg.upper = {1.0, 1.0};
    cfg.initial_points = 6;
    cfg.total_evals = 25;
    cfg.seed = 3;
    BOResult r = bayes_opt_maximize(f, cfg);
    double best = -1e300;
    for (std::size_t i = 0; i < r.eval_f.size(); ++i) best = std::max(best, r.eval_f[i]);
    CHECK(r.fx == best);
    CHECK(r.eval_x.size() == cfg.total_evals);
}

TEST_CASE("bayes_opt on a constant objective still completes") {
    auto f = [](const std::vector<double>&) { return 2.0; };
    BOConfig cfg;
    cfg.dim = 1;
    cfg.lower = {0.0};
    cfg.upper = {1.0};
    cfg.initial_points = 4;
    cfg.total_evals = 12;
    BOResult r = bayes_opt_maximize(f, cfg);
    CHECK(r.fx == 2.0);
    CHECK(r.eval_x.size() == 12);
}

TEST_CASE("bayes_opt is deterministic in the seed and honors seeded points") {
    auto f = [](const std::vector<double>& x) { return -(x[0] - 0.7) * (x[0] - 0.7); };
    BOConfig cfg;
    cfg.dim = 1;
    cfg.lower = {0.0};
    cfg.upper = {1.0};
    cfg.initial_points = 5;
    cfg.total_evals = 20;
    cfg.seed = 5;
    cfg.seeded_points = {{0.0}, {1.0}};
    BOResult a = bayes_opt_maximize(f, cfg);
    BOResult b = bayes_opt_maximize(f, cfg);
    CHECK(a.eval_x == b.eval_x);
    CHECK(a.x == b.x);
    CHECK(a.eval_x[0][0] == 0.0);
    CHECK(a.eval_x[1][0] == 1.0);
}

TEST_CASE("bayes_opt validates bounds and budgets") {
    auto f = [](const std::vector<double>&) { return 0.0; };
    BOConfig cfg;
    cfg.dim = 2;
    cfg.lower = {0.0, 0.0};
    cfg.upper = {1.0, 1.0};
    cfg.initial_points = 2; // below dim + 1
    CHECK_THROWS_AS(bayes_opt_maximize(f, cfg), ConfigError);
    cfg.initial_points = 30;
    cfg.total_evals = 30; // must exceed the design
    CHECK_THROWS_AS(bayes_opt_maximize(f, cfg), ConfigError);
}

} // TEST_SUITE
