#include "pmcpower/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include <json.hpp>

#include "pmcpower/error.hpp"
#include "pmcpower/io_util.hpp"
#include "pmcpower/regress.hpp"
#include "pmcpower/rng.hpp"

namespace pmcpower {

namespace {

RateMatrix take_rows(const RateMatrix& m, const std::vector<std::size_t>& rows) {
    RateMatrix out;
    out.subsystem = m.subsystem;
    out.frequency_hz = m.frequency_hz;
    out.pass_id = m.pass_id;
    out.n_units = m.n_units;
    out.columns = m.columns;
    out.rates.reserve(rows.size() * m.n_cols());
    for (std::size_t r : rows) {
        out.t_ns.push_back(m.t_ns[r]);
        out.period_ns.push_back(m.period_ns[r]);
        out.power_mw.push_back(m.power_mw[r]);
        out.rates.insert(out.rates.end(), m.rates.begin() + r * m.n_cols(),
                         m.rates.begin() + (r + 1) * m.n_cols());
    }
    return out;
}

// Column indices of (unit, event) for each selected event, unit-major.
std::vector<std::vector<std::size_t>> selected_columns(const RateMatrix& m,
                                                       const std::vector<std::string>& selected) {
    std::vector<std::vector<std::size_t>> idx(static_cast<std::size_t>(m.n_units),
                                              std::vector<std::size_t>(selected.size()));
    for (std::size_t j = 0; j < selected.size(); ++j) {
        for (int u = 0; u < m.n_units; ++u) {
            const auto it = std::find(m.columns.begin(), m.columns.end(),
                                      std::make_pair(u, selected[j]));
            if (it == m.columns.end())
                throw DataError("selected event '" + selected[j] +
                                "' is missing from the trace columns (unit " +
                                std::to_string(u) + ")");
            idx[static_cast<std::size_t>(u)][j] =
                static_cast<std::size_t>(it - m.columns.begin());
        }
    }
    return idx;
}

} // namespace

std::pair<RateMatrix, RateMatrix> split_dataset(const RateMatrix& m, double train_fraction,
                                                std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw DataError("train_fraction must be in (0, 1)");
    const std::size_t n = m.n_rows();
    if (n < 2)
        throw DataError("split_dataset needs at least 2 rows");
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train == n)
        throw DataError("split leaves an empty part (n=" + std::to_string(n) +
                        ", fraction=" + std::to_string(train_fraction) + ")");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    shuffle(order, rng);

    std::vector<std::size_t> train_rows(order.begin(), order.begin() + n_train);
    std::vector<std::size_t> val_rows(order.begin() + n_train, order.end());
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    return {take_rows(m, train_rows), take_rows(m, val_rows)};
}

ModelEntry train_entry(const RateMatrix& train, const std::vector<std::string>& selected,
                       const std::string& subsystem, std::int64_t frequency_hz) {
    if (selected.empty())
        throw DataError("train_entry: empty event selection");
    {
        std::set<std::string> uniq(selected.begin(), selected.end());
        if (uniq.size() != selected.size())
            throw DataError("train_entry: duplicate event in selection");
    }
    const std::size_t n = train.n_rows();
    const std::size_t k = selected.size();
    if (n < k + 1)
        throw DataError("train_entry: " + std::to_string(n) + " rows cannot fit " +
                        std::to_string(k) + " weights plus an intercept");

    const auto idx = selected_columns(train, selected);
    Matrix a(n, k + 1);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (int u = 0; u < train.n_units; ++u)
                s += train.at(r, idx[static_cast<std::size_t>(u)][j]);
            a.at(r, j) = s;
        }
        a.at(r, k) = 1.0; // intercept column, constrained >= 0 like the rest
    }

    // Rates run around 1e9 events/s while the intercept column is all ones;
    // fed raw, the solver's gradient tolerance (relative to the largest
    // column) would treat the intercept as noise.  Scaling every column to
    // unit infinity-norm makes the gradients commensurable and leaves the
    // optimum unchanged: the fitted coefficients are simply unscaled after.
    std::vector<double> col_scale(k + 1, 1.0);
    for (std::size_t j = 0; j <= k; ++j) {
        double peak = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            peak = std::max(peak, std::fabs(a.at(r, j)));
        if (peak > 0.0) {
            col_scale[j] = 1.0 / peak;
            for (std::size_t r = 0; r < n; ++r)
                a.at(r, j) *= col_scale[j];
        }
    }
    const NnlsSolution sol = nnls(a, train.power_mw);

    ModelEntry entry;
    entry.subsystem = subsystem;
    entry.frequency_hz = frequency_hz;
    entry.selected = selected;
    entry.weights.resize(k);
    for (std::size_t j = 0; j < k; ++j)
        entry.weights[j] = sol.weights[j] * col_scale[j];
    entry.intercept_mw = sol.weights[k] * col_scale[k];
    entry.n_train = n;

    std::vector<std::int64_t> periods = train.period_ns;
    std::sort(periods.begin(), periods.end());
    entry.train_period_ns = periods[(periods.size() - 1) / 2]; // lower median, stays integral
    return entry;
}

RateGrid rate_grid_at(const RateMatrix& m, std::size_t row,
                      const std::vector<std::string>& selected) {
    if (row >= m.n_rows())
        throw DataError("rate_grid_at: row out of range");
    const auto idx = selected_columns(m, selected);
    RateGrid grid(static_cast<std::size_t>(m.n_units),
                  std::vector<double>(selected.size(), 0.0));
    for (std::size_t u = 0; u < grid.size(); ++u)
        for (std::size_t j = 0; j < selected.size(); ++j)
            grid[u][j] = m.at(row, idx[u][j]);
    return grid;
}

double predict(const ModelEntry& entry, const RateGrid& rates) {
    double p = entry.intercept_mw;
    for (const std::vector<double>& unit : rates) {
        if (unit.size() != entry.weights.size())
            throw DataError("predict: rate grid width does not match the model");
        for (std::size_t j = 0; j < unit.size(); ++j) {
            if (unit[j] < 0.0)
                throw DataError("predict: negative rate");
            p += unit[j] * entry.weights[j];
        }
    }
    return p;
}

std::vector<double> unit_contributions(const ModelEntry& entry, const RateGrid& rates) {
    std::vector<double> out;
    out.reserve(rates.size());
    for (const std::vector<double>& unit : rates) {
        if (unit.size() != entry.weights.size())
            throw DataError("unit_contributions: rate grid width does not match the model");
        double p = 0.0;
        for (std::size_t j = 0; j < unit.size(); ++j) {
            if (unit[j] < 0.0)
                throw DataError("unit_contributions: negative rate");
            p += unit[j] * entry.weights[j];
        }
        out.push_back(p);
    }
    return out;
}

ValidationReport validate_entry(const ModelEntry& entry, const RateMatrix& validation) {
    const auto idx = selected_columns(validation, entry.selected);
    ValidationReport report;
    std::vector<double> apes;
    double e_meas = 0.0, e_est = 0.0;
    for (std::size_t r = 0; r < validation.n_rows(); ++r) {
        const double actual = validation.power_mw[r];
        if (actual == 0.0) {
            ++report.n_excluded; // APE undefined at zero power
            continue;
        }
        double est = entry.intercept_mw;
        for (std::size_t u = 0; u < idx.size(); ++u)
            for (std::size_t j = 0; j < entry.weights.size(); ++j)
                est += validation.at(r, idx[u][j]) * entry.weights[j];
        apes.push_back(std::fabs(est - actual) / actual * 100.0);
        const double period_s = static_cast<double>(validation.period_ns[r]) * 1e-9;
        e_meas += actual * period_s;
        e_est += est * period_s;
    }
    if (apes.empty())
        throw DataError("validate_entry: no rows with nonzero power");
    report.n_samples = apes.size();
    double mean = 0.0;
    for (double a : apes)
        mean += a;
    mean /= static_cast<double>(apes.size());
    double var = 0.0;
    for (double a : apes)
        var += (a - mean) * (a - mean);
    var /= static_cast<double>(apes.size());
    report.mape = mean;
    report.mape_std = std::sqrt(var);
    report.energy_error_pct = std::fabs(e_est - e_meas) / e_meas * 100.0;
    return report;
}

const ModelEntry* PowerLut::find(const std::string& subsystem,
                                 std::int64_t frequency_hz) const {
    for (const ModelEntry& e : entries) {
        if (e.subsystem == subsystem && e.frequency_hz == frequency_hz)
            return &e;
    }
    return nullptr;
}

PowerLut compose_lut(std::vector<ModelEntry> entries) {
    if (entries.empty())
        throw DataError("compose_lut: no entries");
    std::sort(entries.begin(), entries.end(), [](const ModelEntry& a, const ModelEntry& b) {
        return std::tie(a.subsystem, a.frequency_hz) < std::tie(b.subsystem, b.frequency_hz);
    });
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].subsystem == entries[i - 1].subsystem &&
            entries[i].frequency_hz == entries[i - 1].frequency_hz)
            throw DataError("compose_lut: duplicate entry for (" + entries[i].subsystem +
                            ", " + std::to_string(entries[i].frequency_hz) + " Hz)");
    }
    PowerLut lut;
    lut.entries = std::move(entries);
    return lut;
}

double system_power(const PowerLut& lut, const std::map<std::string, std::int64_t>& state,
                    const std::map<std::string, RateGrid>& rates) {
    if (state.empty())
        throw DataError("system_power: empty frequency state");
    for (const auto& [subsystem, grid] : rates) {
        if (!state.contains(subsystem))
            throw DataError("system_power: rates given for '" + subsystem +
                            "' which has no frequency state");
    }
    double total = 0.0;
    for (const auto& [subsystem, freq] : state) {
        const ModelEntry* entry = lut.find(subsystem, freq);
        if (!entry)
            throw DataError("system_power: no LUT entry for (" + subsystem + ", " +
                            std::to_string(freq) + " Hz)");
        const auto it = rates.find(subsystem);
        if (it == rates.end())
            throw DataError("system_power: no rates for subsystem '" + subsystem + "'");
        total += predict(*entry, it->second);
    }
    return total;
}

namespace {

nlohmann::json entry_to_json(const ModelEntry& entry) {
    nlohmann::json j;
    j["subsystem"] = entry.subsystem;
    j["frequency_hz"] = entry.frequency_hz;
    j["train_period_ns"] = entry.train_period_ns;
    j["intercept_mw"] = entry.intercept_mw;
    j["events"] = entry.selected;
    j["weights_mw_per_eps"] = entry.weights;
    nlohmann::json meta;
    meta["n_train"] = entry.n_train;
    if (entry.validation_mape)
        meta["validation_mape"] = *entry.validation_mape;
    j["metadata"] = std::move(meta);
    return j;
}

ModelEntry entry_from_json(const nlohmann::json& j, const std::string& where) {
    ModelEntry entry;
    try {
        entry.subsystem = j.at("subsystem").get<std::string>();
        entry.frequency_hz = j.at("frequency_hz").get<std::int64_t>();
        entry.train_period_ns = j.at("train_period_ns").get<std::int64_t>();
        entry.intercept_mw = j.at("intercept_mw").get<double>();
        entry.selected = j.at("events").get<std::vector<std::string>>();
        entry.weights = j.at("weights_mw_per_eps").get<std::vector<double>>();
        if (j.contains("metadata")) {
            const auto& meta = j.at("metadata");
            if (meta.contains("n_train"))
                entry.n_train = meta.at("n_train").get<std::size_t>();
            if (meta.contains("validation_mape"))
                entry.validation_mape = meta.at("validation_mape").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": " + e.what());
    }
    if (entry.weights.size() != entry.selected.size())
        throw DataError(where + ": weights/events length mismatch");
    if (entry.intercept_mw < 0.0)
        throw DataError(where + ": negative intercept");
    for (double w : entry.weights) {
        if (w < 0.0)
            throw DataError(where + ": negative weight");
    }
    if (entry.frequency_hz <= 0)
        throw DataError(where + ": frequency_hz must be > 0");
    if (entry.train_period_ns <= 0)
        throw DataError(where + ": train_period_ns must be > 0");
    return entry;
}

} // namespace

void save_model(const ModelEntry& entry, const std::filesystem::path& json_path) {
    nlohmann::json j = entry_to_json(entry);
    j["type"] = "pmc-power-model";
    io::atomic_write(json_path, j.dump(2) + "\n");
}

ModelEntry load_model(const std::filesystem::path& json_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(json_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(json_path.string() + ": " + e.what());
    }
    if (j.value("type", "") != "pmc-power-model")
        throw DataError(json_path.string() + ": not a pmc-power-model file");
    return entry_from_json(j, json_path.string());
}

void save_lut(const PowerLut& lut, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["type"] = "pmc-power-lut";
    j["entries"] = nlohmann::json::array();
    for (const ModelEntry& e : lut.entries)
        j["entries"].push_back(entry_to_json(e));
    io::atomic_write(json_path, j.dump(2) + "\n");
}

PowerLut load_lut(const std::filesystem::path& json_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(json_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(json_path.string() + ": " + e.what());
    }
    if (j.value("type", "") != "pmc-power-lut")
        throw DataError(json_path.string() + ": not a pmc-power-lut file");
    std::vector<ModelEntry> entries;
    if (!j.contains("entries") || !j["entries"].is_array())
        throw DataError(json_path.string() + ": missing entries array");
    for (const auto& je : j["entries"])
        entries.push_back(entry_from_json(je, json_path.string()));
    return compose_lut(std::move(entries));
}

} // namespace pmcpower
