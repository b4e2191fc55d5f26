#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmcpower/trace.hpp"

namespace pmcpower {

// Per-frequency linear power model of one subsystem:
//   P = intercept + sum_units sum_j rate[unit][j] * weight[j]
// One weight per event, shared by every unit of the subsystem.
struct ModelEntry {
    std::string subsystem;
    std::int64_t frequency_hz = 0;
    std::int64_t train_period_ns = 0; // median sampling period of the training set
    double intercept_mw = 0.0;        // leakage + idle floor, constrained >= 0
    std::vector<std::string> selected;
    std::vector<double> weights; // mW per (event/s), aligned with selected

    std::optional<double> validation_mape; // percent, when a holdout was scored
    std::size_t n_train = 0;
};

// Rates of the selected events at one instant: rates[unit][j] is aligned
// with ModelEntry::selected.
using RateGrid = std::vector<std::vector<double>>;

struct ValidationReport {
    double mape = 0.0;             // mean absolute percentage error
    double mape_std = 0.0;         // population stddev of the per-sample APEs
    double energy_error_pct = 0.0; // |E_est - E_meas| / E_meas * 100
    std::size_t n_samples = 0;     // rows scored
    std::size_t n_excluded = 0;    // zero-power rows left out of both metrics
};

// Deterministic split: Fisher-Yates on mt19937_64(seed); the first
// round(train_fraction * n) shuffled rows train, the rest validate.  Row
// order within each part keeps the original time order.
std::pair<RateMatrix, RateMatrix> split_dataset(const RateMatrix& m, double train_fraction,
                                                std::uint64_t seed);

// NNLS fit of power on the selected events.  Each design column is the
// event's rate summed across units; a trailing ones column carries the
// intercept, so the floor is constrained nonnegative like the weights.
ModelEntry train_entry(const RateMatrix& train, const std::vector<std::string>& selected,
                       const std::string& subsystem, std::int64_t frequency_hz);

// Extracts the selected-event rates of one matrix row.
RateGrid rate_grid_at(const RateMatrix& m, std::size_t row,
                      const std::vector<std::string>& selected);

double predict(const ModelEntry& entry, const RateGrid& rates);

// Dynamic power attributed to each unit; the intercept is per-subsystem and
// belongs to no unit, so predict() == intercept + sum(unit_contributions()).
std::vector<double> unit_contributions(const ModelEntry& entry, const RateGrid& rates);

ValidationReport validate_entry(const ModelEntry& entry, const RateMatrix& validation);

// DVFS lookup table: one trained entry per (subsystem, frequency) pair.
struct PowerLut {
    std::vector<ModelEntry> entries; // sorted by (subsystem, frequency_hz)

    const ModelEntry* find(const std::string& subsystem, std::int64_t frequency_hz) const;
};

PowerLut compose_lut(std::vector<ModelEntry> entries);

// Full-system power: the sum of per-subsystem predictions at the exact
// frequencies in `state`.  Every subsystem in `state` needs a LUT entry at
// that frequency and a rate grid; anything else is an error.
double system_power(const PowerLut& lut, const std::map<std::string, std::int64_t>& state,
                    const std::map<std::string, RateGrid>& rates);

void save_model(const ModelEntry& entry, const std::filesystem::path& json_path);
ModelEntry load_model(const std::filesystem::path& json_path);
void save_lut(const PowerLut& lut, const std::filesystem::path& json_path);
PowerLut load_lut(const std::filesystem::path& json_path);

} // namespace pmcpower
