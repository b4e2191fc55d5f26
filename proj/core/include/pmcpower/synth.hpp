#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pmcpower/model.hpp"
#include "pmcpower/trace.hpp"

namespace pmcpower {

// A stretch of workload with constant per-event activity rates.  Every unit
// of the subsystem runs the same mix.
struct SynthPhase {
    std::int64_t duration_ns = 0;       // must be a whole number of periods
    std::vector<double> rates;          // events/s, aligned with SynthSpec::events
};

// Ground-truth description a synthetic characterization run is drawn from.
struct SynthSpec {
    std::string subsystem;
    std::int64_t frequency_hz = 0;
    int n_units = 1;
    std::int64_t period_ns = 0;
    double intercept_mw = 0.0;
    std::vector<std::string> events;
    std::vector<double> weights_mw_per_eps; // aligned with events
    std::vector<SynthPhase> phases;
    double noise_sigma = 0.0; // gaussian sigma as a fraction of the mean power
    std::uint64_t seed = 0;
    // Optional multi-pass tracking plan: disjoint subsets covering `events`.
    // Empty means a single pass that tracks everything.
    std::vector<std::vector<std::string>> passes;
};

SynthSpec load_synth_spec(const std::filesystem::path& json_path);
void save_synth_spec(const SynthSpec& spec, const std::filesystem::path& json_path);

// One trace tracking every event.  Power is the spec's model evaluated on
// the phase rates plus measurement noise, clamped at zero and quantized to
// 1 mW; identical across the units of a timestamp, like a shared sensor.
ActivityTrace generate(const SynthSpec& spec);

// One trace per subset of spec.passes.  Each pass replays the same workload
// (the counters are deterministic) but the power measurement noise is drawn
// fresh per pass, as separate recordings would be.
std::vector<ActivityTrace> generate_multipass(const SynthSpec& spec);

// The model the generator embodies, for recovery checks.
ModelEntry ground_truth_entry(const SynthSpec& spec);

} // namespace pmcpower
