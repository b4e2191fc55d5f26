#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace pmcpower {

// Raised for malformed or inconsistent input data (traces, catalogs, model
// files, command-line fixtures).  The CLI maps this to exit code 2; every
// other exception maps to exit code 1.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// NNLS failed to reach the KKT point within the iteration budget.  Carries
// the best iterate so a caller that wants a degraded answer can still get one.
class NnlsConvergenceError : public std::runtime_error {
public:
    NnlsConvergenceError(const std::string& what, std::vector<double> best, int iterations)
        : std::runtime_error(what), best_weights(std::move(best)), iterations(iterations) {}

    std::vector<double> best_weights;
    int iterations = 0;
};

} // namespace pmcpower
