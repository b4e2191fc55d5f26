#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmcpower/fixedpoint.hpp"
#include "pmcpower/model.hpp"

namespace pmcpower {

enum class SchedEventKind { context_switch, tick };

// One scheduler-side observation: counter increments on `core` since the
// previous event on that core.
struct SchedEvent {
    std::int64_t t_ns = 0;
    int core = 0;
    SchedEventKind kind = SchedEventKind::context_switch;
    std::vector<std::int64_t> deltas; // aligned with SchedStream::events
};

struct SchedStream {
    int n_cores = 1;
    std::vector<std::string> events; // counter column order of the source file
    std::vector<SchedEvent> rows;    // ordered by t_ns; strictly increasing per core
};

SchedStream load_sched_csv(const std::filesystem::path& csv_path);
void save_sched_csv(const SchedStream& stream, const std::filesystem::path& csv_path);

// Counter deltas accumulated on one core since its previous trigger.
struct RawSample {
    std::int64_t t_ns = 0;
    int core = 0;
    std::int64_t duration_ns = 0;
    std::vector<std::int64_t> deltas;
};

// Trigger policy: a context switch always fires; ticks fire once
// `tick_threshold` of them accumulate on a core.  Any fire resets that
// core's tick count.
std::vector<RawSample> trigger_stream(const SchedStream& stream, int tick_threshold);

// Fixed-capacity ring of raw samples with running totals, one per core.
// Single writer; concurrent readers get consistent totals through a seqlock.
class MovingWindow {
public:
    struct Totals {
        std::int64_t duration_ns = 0;
        std::vector<std::int64_t> counts;
        std::size_t size = 0;
    };

    MovingWindow(std::size_t capacity, std::size_t n_events);

    // Adds a sample, evicting the oldest when full; O(n_events).  Returns the
    // post-push totals (the synthetic sample emitted at this trigger).
    Totals push(std::int64_t duration_ns, std::span<const std::int64_t> deltas);

    // Reader-side consistent snapshot.
    Totals totals() const;

    void reset();

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::size_t n_events_;
    std::vector<std::int64_t> ring_; // capacity * (1 + n_events), duration first
    std::size_t head_ = 0;
    std::size_t size_ = 0;
    std::int64_t duration_sum_ = 0;
    std::vector<std::int64_t> count_sums_;
    std::atomic<std::uint64_t> version_{0}; // odd while the writer is inside push/reset
};

struct FreqChange {
    std::int64_t t_ns = 0;
    std::string subsystem;
    std::int64_t frequency_hz = 0;
};

std::vector<FreqChange> load_freq_csv(const std::filesystem::path& csv_path);
void save_freq_csv(std::span<const FreqChange> timeline, const std::filesystem::path& csv_path);

struct EstimatePoint {
    std::int64_t t_ns = 0;
    std::int64_t frequency_hz = 0;
    std::optional<Fx> power_fx;
    std::optional<double> power_float;
    bool overflow = false; // fixed-point path saturated somewhere
};

struct MonitorConfig {
    std::size_t window_capacity = 10;
    int tick_threshold = 1;
    bool eval_fx = true;
    bool eval_float = true;
};

// Replays a recorded scheduler stream against the LUT(s) for one subsystem:
// per-core moving windows, one estimate per synthetic sample.  A frequency
// change switches the active entry and drops all window history.  Pass
// nullptr for the path(s) not being evaluated.
std::vector<EstimatePoint> online_estimate(const FxLut* fx_lut, const PowerLut* float_lut,
                                           const std::string& subsystem,
                                           std::span<const FreqChange> timeline,
                                           const SchedStream& stream,
                                           const MonitorConfig& cfg);

} // namespace pmcpower
