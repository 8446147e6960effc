#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "survtk/error.hpp"

namespace survtk {

// Dense symmetric positive-definite solver, enough for the small systems this
// library needs (spline-basis Newton steps, Gaussian-process posteriors).
// Matrices are row-major n*n.
struct Cholesky {
    std::size_t n = 0;
    std::vector<double> l; // lower triangular factor, row-major

    // Factor a; throws NumericError if the matrix is not positive definite.
    static Cholesky factor(const std::vector<double>& a, std::size_t n) {
        Cholesky ch;
        ch.n = n;
        ch.l.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double sum = a[i * n + j];
                for (std::size_t k = 0; k < j; ++k) sum -= ch.l[i * n + k] * ch.l[j * n + k];
                if (i == j) {
                    if (!(sum > 0.0)) throw NumericError("matrix not positive definite");
                    ch.l[i * n + i] = std::sqrt(sum);
                } else {
                    ch.l[i * n + j] = sum / ch.l[j * n + j];
                }
            }
        }
        return ch;
    }

    // Solve A x = b.
    std::vector<double> solve(std::vector<double> b) const {
        for (std::size_t i = 0; i < n; ++i) {
            double sum = b[i];
            for (std::size_t k = 0; k < i; ++k) sum -= l[i * n + k] * b[k];
            b[i] = sum / l[i * n + i];
        }
        for (std::size_t i = n; i-- > 0;) {
            double sum = b[i];
            for (std::size_t k = i + 1; k < n; ++k) sum -= l[k * n + i] * b[k];
            b[i] = sum / l[i * n + i];
        }
        return b;
    }

    double log_det() const {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::log(l[i * n + i]);
        return 2.0 * s;
    }
};

} // namespace survtk
