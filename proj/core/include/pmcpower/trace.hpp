#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace pmcpower {

// A counter name qualified by the subsystem it belongs to.
struct EventId {
    std::string subsystem;
    std::string name;

    auto operator<=>(const EventId&) const = default;
};

// One sampling record for a single unit (core / GPU cluster / ...).
// counts is aligned with the owning trace's event list.
struct TraceRow {
    std::int64_t t_ns = 0;      // timestamp at the end of the sampling period
    std::int64_t period_ns = 0; // length of the sampling period
    int unit = 0;
    std::vector<std::int64_t> counts;
    std::int64_t power_mw = 0; // subsystem power, replicated across units
};

// Raw characterization recording for one (subsystem, frequency, pass).
struct ActivityTrace {
    std::string subsystem;
    std::int64_t frequency_hz = 0;
    int pass_id = 0;
    int n_units = 1;
    std::vector<std::string> events; // column order of the source file
    std::vector<TraceRow> rows;      // sorted by (t_ns, unit)
    bool stable = true;              // cleared by stability_filter()

    // Throws DataError when any structural invariant is broken.
    void validate() const;
};

// Sidecar metadata stored next to the per-pass CSV files.
struct TraceMeta {
    std::string subsystem;
    std::int64_t frequency_hz = 0;
    int n_units = 1;
};

// Normalized samples: one row per timestamp, one column per (unit, event),
// count columns divided by the row's period so entries are rates in events/s.
struct RateMatrix {
    std::string subsystem;
    std::int64_t frequency_hz = 0;
    int pass_id = 0;
    int n_units = 1;
    std::vector<std::pair<int, std::string>> columns; // (unit, event), unit-major
    std::vector<std::int64_t> t_ns;                   // per row
    std::vector<std::int64_t> period_ns;              // per row
    std::vector<double> power_mw;                     // per row
    std::vector<double> rates;                        // row-major

    std::size_t n_rows() const { return power_mw.size(); }
    std::size_t n_cols() const { return columns.size(); }
    double at(std::size_t row, std::size_t col) const { return rates[row * columns.size() + col]; }
};

TraceMeta load_meta(const std::filesystem::path& json_path);
void save_meta(const TraceMeta& meta, const std::filesystem::path& json_path);

// Parses one pass CSV.  Header: t_ns,period_ns,unit,power_mw,<event>...
// The overload without metadata leaves subsystem/frequency at defaults.
ActivityTrace ingest_trace(const std::filesystem::path& csv_path);
ActivityTrace ingest_trace(const std::filesystem::path& csv_path, const TraceMeta& meta,
                           int pass_id);

// Loads every pass_<k>.csv under dir (plus meta.json), ordered by pass id.
std::vector<ActivityTrace> ingest_pass_dir(const std::filesystem::path& dir);

void write_trace_csv(const ActivityTrace& trace, const std::filesystem::path& csv_path);

// Collapses the per-unit rows of each timestamp into one matrix row.  Every
// timestamp must carry exactly one row per unit 0..n_units-1 with matching
// period; power becomes the mean of the per-unit copies.
RateMatrix normalize(const ActivityTrace& trace);

// Coefficient of variation (population stddev / mean) of per-timestamp power.
double power_cv(const ActivityTrace& trace);

// Returns a copy with `stable` cleared when power_cv() exceeds max_cv.
// Rows are never dropped or altered.
ActivityTrace stability_filter(const ActivityTrace& trace, double max_cv);

// Row-wise concatenation; all parts must agree on subsystem, frequency,
// n_units and column layout.  pass_id of the result is -1 (mixed).
RateMatrix stack(const std::vector<RateMatrix>& parts);

// Restriction to the given events, in the given order (unit-major columns).
// Errors when an event is missing for any unit.
RateMatrix project_events(const RateMatrix& m, const std::vector<std::string>& events);

} // namespace pmcpower
