#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pmcpower {

// Minimal dense row-major matrix; all the regression code needs.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Ordinary least squares of y on a single predictor x, with the Pearson
// coefficient and the two-sided p-value of the slope t-test (dof = n - 2).
struct SimpleFit {
    double slope = 0.0;
    double intercept = 0.0;
    double pcc = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

SimpleFit simple_lls(std::span<const double> x, std::span<const double> y);

double pearson(std::span<const double> x, std::span<const double> y);

// Two-sided tail probability of Student's t with `dof` degrees of freedom,
// computed through the regularized incomplete beta function.
double student_t_p_value(double t, int dof);

// Regularized incomplete beta I_x(a, b); exposed mostly for the test oracle.
double regularized_incomplete_beta(double a, double b, double x);

struct NnlsSolution {
    std::vector<double> weights;
    double residual_norm = 0.0; // ||b - A w||_2 at the solution
    int iterations = 0;         // passive-set insertions performed
};

// Lawson-Hanson active-set NNLS: min ||A w - b||_2 subject to w >= 0.
// tol < 0 selects the default 1e-10 * max(1, ||A^T b||_inf); max_iter < 0
// selects 3 * cols.  Throws NnlsConvergenceError when the budget runs out.
NnlsSolution nnls(const Matrix& a, std::span<const double> b, double tol = -1.0,
                  int max_iter = -1);

} // namespace pmcpower
