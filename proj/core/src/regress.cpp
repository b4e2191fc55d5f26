#include "pmcpower/regress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pmcpower/error.hpp"

namespace pmcpower {

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin)
        d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin)
            d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin)
            c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin)
            d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin)
            c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps)
            return h;
    }
    throw std::runtime_error("incomplete beta continued fraction did not converge");
}

} // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0))
        throw DataError("incomplete beta needs a > 0 and b > 0");
    if (x <= 0.0)
        return 0.0;
    if (x >= 1.0)
        return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
        b * std::log1p(-x);
    const double front = std::exp(ln_front);
    // Use the fraction directly where it converges fast, else the symmetry.
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_p_value(double t, int dof) {
    if (dof < 1)
        throw DataError("t-test needs dof >= 1, got " + std::to_string(dof));
    const double nu = static_cast<double>(dof);
    const double x = nu / (nu + t * t);
    return regularized_incomplete_beta(nu / 2.0, 0.5, x);
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DataError("pearson: size mismatch");
    const std::size_t n = x.size();
    if (n < 2)
        throw DataError("pearson needs at least 2 samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw DataError("pearson undefined for zero-variance input");
    double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

SimpleFit simple_lls(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DataError("simple_lls: size mismatch");
    const std::size_t n = x.size();
    if (n < 3)
        throw DataError("simple_lls needs at least 3 samples (dof = n - 2)");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0)
        throw DataError("simple_lls: zero-variance predictor");

    SimpleFit fit;
    fit.n = n;
    if (syy == 0.0) {
        // Response is constant: the constant model fits exactly, no linear
        // association to speak of.
        fit.slope = 0.0;
        fit.intercept = my;
        fit.pcc = 0.0;
        fit.p_value = 1.0;
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.pcc = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double r2 = fit.pcc * fit.pcc;
    if (r2 >= 1.0) {
        fit.p_value = 0.0;
        return fit;
    }
    const double nu = static_cast<double>(n - 2);
    const double t = fit.pcc * std::sqrt(nu / (1.0 - r2));
    fit.p_value = student_t_p_value(t, static_cast<int>(n) - 2);
    return fit;
}

namespace {

// Solves the square system M z = rhs by Gaussian elimination with partial
// pivoting.  M is destroyed.  Used for the small passive-set subproblems.
void solve_inplace(Matrix& m, std::vector<double>& rhs) {
    const std::size_t n = m.rows;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::fabs(m.at(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::fabs(m.at(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best == 0.0)
            throw DataError("nnls: singular passive-set system");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j)
                std::swap(m.at(k, j), m.at(piv, j));
            std::swap(rhs[k], rhs[piv]);
        }
        const double inv = 1.0 / m.at(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = m.at(i, k) * inv;
            if (f == 0.0)
                continue;
            for (std::size_t j = k; j < n; ++j)
                m.at(i, j) -= f * m.at(k, j);
            rhs[i] -= f * rhs[k];
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        double v = rhs[k];
        for (std::size_t j = k + 1; j < n; ++j)
            v -= m.at(k, j) * rhs[j];
        rhs[k] = v / m.at(k, k);
    }
}

// Unconstrained least squares restricted to the columns in `passive`,
// via the normal equations (the subproblems are tiny and well separated).
// The Gram matrix is symmetrically equilibrated to unit diagonal before the
// solve: event-rate columns span many orders of magnitude against the
// intercept column, and without the rescale the squared condition number of
// the normal equations eats most of the double mantissa.  The rescale leaves
// the minimizer itself unchanged.
std::vector<double> ls_on_passive(const Matrix& a, std::span<const double> b,
                                  const std::vector<std::size_t>& passive) {
    const std::size_t p = passive.size();
    Matrix g(p, p);
    std::vector<double> rhs(p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = i; j < p; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < a.rows; ++r)
                s += a.at(r, passive[i]) * a.at(r, passive[j]);
            g.at(i, j) = s;
            g.at(j, i) = s;
        }
        double s = 0.0;
        for (std::size_t r = 0; r < a.rows; ++r)
            s += a.at(r, passive[i]) * b[r];
        rhs[i] = s;
    }
    std::vector<double> scale(p, 1.0);
    for (std::size_t i = 0; i < p; ++i) {
        if (g.at(i, i) > 0.0)
            scale[i] = 1.0 / std::sqrt(g.at(i, i));
    }
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j)
            g.at(i, j) *= scale[i] * scale[j];
        rhs[i] *= scale[i];
    }
    solve_inplace(g, rhs);
    for (std::size_t i = 0; i < p; ++i)
        rhs[i] *= scale[i];
    return rhs;
}

} // namespace

NnlsSolution nnls(const Matrix& a, std::span<const double> b, double tol, int max_iter) {
    if (a.rows == 0 || a.cols == 0)
        throw DataError("nnls: empty system");
    if (b.size() != a.rows)
        throw DataError("nnls: rhs size mismatch");

    const std::size_t n = a.cols;
    std::vector<double> w(n, 0.0);       // current iterate
    std::vector<double> grad(n, 0.0);    // A^T (b - A w)
    std::vector<char> in_passive(n, 0);
    std::vector<std::size_t> passive;

    // Default dual tolerance scales with the problem.
    if (tol < 0.0) {
        double atb_inf = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < a.rows; ++r)
                s += a.at(r, j) * b[r];
            atb_inf = std::max(atb_inf, std::fabs(s));
        }
        tol = 1e-10 * std::max(1.0, atb_inf);
    }
    if (max_iter < 0)
        max_iter = 3 * static_cast<int>(n);

    std::vector<double> residual(b.begin(), b.end());
    const auto refresh = [&] {
        for (std::size_t r = 0; r < a.rows; ++r) {
            double s = b[r];
            for (std::size_t j : passive)
                s -= a.at(r, j) * w[j];
            residual[r] = s;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < a.rows; ++r)
                s += a.at(r, j) * residual[r];
            grad[j] = s;
        }
    };

    int iterations = 0;
    refresh();
    for (;;) {
        // Pick the most violated dual coordinate; ties fall to the lowest
        // index because only a strictly larger gradient displaces the choice.
        std::size_t enter = n;
        double best = tol;
        for (std::size_t j = 0; j < n; ++j) {
            if (!in_passive[j] && grad[j] > best) {
                best = grad[j];
                enter = j;
            }
        }
        if (enter == n)
            break; // KKT point reached

        if (iterations >= max_iter)
            throw NnlsConvergenceError("nnls: iteration budget exhausted after " +
                                           std::to_string(iterations) + " insertions",
                                       w, iterations);
        ++iterations;
        in_passive[enter] = 1;
        passive.push_back(enter);
        std::sort(passive.begin(), passive.end());

        // Inner loop: retreat until the passive solution is interior.
        // Each pass removes at least one index, so it terminates.
        for (;;) {
            std::vector<double> z = ls_on_passive(a, b, passive);
            bool all_positive = true;
            for (double v : z) {
                if (v <= 0.0) {
                    all_positive = false;
                    break;
                }
            }
            if (all_positive) {
                for (std::size_t k = 0; k < passive.size(); ++k)
                    w[passive[k]] = z[k];
                break;
            }
            double alpha = std::numeric_limits<double>::infinity();
            std::size_t drop = passive.size();
            for (std::size_t k = 0; k < passive.size(); ++k) {
                if (z[k] > 0.0)
                    continue;
                const double denom = w[passive[k]] - z[k];
                const double step = denom > 0.0 ? w[passive[k]] / denom : 0.0;
                if (step < alpha) {
                    alpha = step;
                    drop = k;
                }
            }
            for (std::size_t k = 0; k < passive.size(); ++k)
                w[passive[k]] += alpha * (z[k] - w[passive[k]]);
            if (drop < passive.size())
                w[passive[drop]] = 0.0;
            std::vector<std::size_t> kept;
            for (std::size_t j : passive) {
                if (w[j] > 0.0) {
                    kept.push_back(j);
                } else {
                    w[j] = 0.0;
                    in_passive[j] = 0;
                }
            }
            passive = std::move(kept);
            if (passive.empty())
                break;
        }
        refresh();
    }

    NnlsSolution sol;
    sol.weights = std::move(w);
    sol.iterations = iterations;
    double rss = 0.0;
    for (std::size_t r = 0; r < a.rows; ++r) {
        double s = b[r];
        for (std::size_t j = 0; j < n; ++j)
            s -= a.at(r, j) * sol.weights[j];
        rss += s * s;
    }
    sol.residual_norm = std::sqrt(rss);
    return sol;
}

} // namespace pmcpower
