#include "pmcpower/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "pmcpower/error.hpp"
#include "pmcpower/io_util.hpp"
#include "pmcpower/rng.hpp"

namespace pmcpower {

namespace {

void validate_spec(const SynthSpec& spec) {
    if (spec.n_units < 1)
        throw DataError("synth spec: n_units must be >= 1");
    if (spec.period_ns <= 0)
        throw DataError("synth spec: period_ns must be > 0");
    if (spec.frequency_hz <= 0)
        throw DataError("synth spec: frequency_hz must be > 0");
    if (spec.intercept_mw < 0.0)
        throw DataError("synth spec: negative intercept");
    if (spec.events.empty())
        throw DataError("synth spec: no events");
    if (spec.weights_mw_per_eps.size() != spec.events.size())
        throw DataError("synth spec: weights/events length mismatch");
    std::set<std::string> names(spec.events.begin(), spec.events.end());
    if (names.size() != spec.events.size())
        throw DataError("synth spec: duplicate event");
    for (double w : spec.weights_mw_per_eps) {
        if (w < 0.0 || !std::isfinite(w))
            throw DataError("synth spec: weights must be finite and >= 0");
    }
    if (spec.phases.empty())
        throw DataError("synth spec: no phases");
    for (const SynthPhase& ph : spec.phases) {
        if (ph.duration_ns <= 0 || ph.duration_ns % spec.period_ns != 0)
            throw DataError("synth spec: phase duration must be a positive multiple of the "
                            "period");
        if (ph.rates.size() != spec.events.size())
            throw DataError("synth spec: phase rates/events length mismatch");
        for (double r : ph.rates) {
            if (r < 0.0 || !std::isfinite(r))
                throw DataError("synth spec: rates must be finite and >= 0");
        }
    }
    if (spec.noise_sigma < 0.0)
        throw DataError("synth spec: negative noise_sigma");
    if (!spec.passes.empty()) {
        std::set<std::string> seen;
        for (const auto& subset : spec.passes) {
            if (subset.empty())
                throw DataError("synth spec: empty pass subset");
            for (const std::string& name : subset) {
                if (!names.contains(name))
                    throw DataError("synth spec: pass tracks unknown event '" + name + "'");
                if (!seen.insert(name).second)
                    throw DataError("synth spec: overlapping pass subsets at '" + name + "'");
            }
        }
        if (seen.size() != spec.events.size())
            throw DataError("synth spec: passes must cover every event");
    }
}

// Noise-free subsystem power of one phase.
double phase_power(const SynthSpec& spec, const SynthPhase& ph) {
    double dyn = 0.0;
    for (std::size_t j = 0; j < ph.rates.size(); ++j)
        dyn += ph.rates[j] * spec.weights_mw_per_eps[j];
    return spec.intercept_mw + static_cast<double>(spec.n_units) * dyn;
}

// Tracks `subset` (empty = all events), drawing noise from `rng`.
ActivityTrace generate_tracking(const SynthSpec& spec, const std::vector<std::string>& subset,
                                int pass_id, std::mt19937_64& rng) {
    ActivityTrace trace;
    trace.subsystem = spec.subsystem;
    trace.frequency_hz = spec.frequency_hz;
    trace.pass_id = pass_id;
    trace.n_units = spec.n_units;
    trace.events = subset.empty() ? spec.events : subset;

    std::vector<std::size_t> cols; // tracked event -> spec event index
    for (const std::string& name : trace.events) {
        const auto it = std::find(spec.events.begin(), spec.events.end(), name);
        cols.push_back(static_cast<std::size_t>(it - spec.events.begin()));
    }

    const double period_s = static_cast<double>(spec.period_ns) * 1e-9;

    // True per-row power first; the noise scale is relative to its mean.
    std::vector<double> true_power;
    for (const SynthPhase& ph : spec.phases) {
        const auto n = static_cast<std::size_t>(ph.duration_ns / spec.period_ns);
        true_power.insert(true_power.end(), n, phase_power(spec, ph));
    }
    double mean_power = 0.0;
    for (double p : true_power)
        mean_power += p;
    mean_power /= static_cast<double>(true_power.size());

    std::int64_t t = 0;
    std::size_t row = 0;
    for (const SynthPhase& ph : spec.phases) {
        // Counts are deterministic workload activity, identical per unit.
        std::vector<std::int64_t> counts;
        counts.reserve(cols.size());
        for (std::size_t c : cols) {
            const double expected = ph.rates[c] * period_s;
            if (expected >= 9.2e18)
                throw DataError("synth spec: count overflows 64 bits for '" +
                                spec.events[c] + "'");
            counts.push_back(std::llround(expected));
        }
        const auto n = static_cast<std::size_t>(ph.duration_ns / spec.period_ns);
        for (std::size_t k = 0; k < n; ++k, ++row) {
            t += spec.period_ns;
            double p = true_power[row];
            if (spec.noise_sigma > 0.0)
                p += gaussian(rng) * spec.noise_sigma * mean_power;
            const std::int64_t power_mw = std::llround(std::max(p, 0.0));
            for (int u = 0; u < spec.n_units; ++u) {
                TraceRow r;
                r.t_ns = t;
                r.period_ns = spec.period_ns;
                r.unit = u;
                r.counts = counts;
                r.power_mw = power_mw; // one sensor, replicated per unit row
                trace.rows.push_back(std::move(r));
            }
        }
    }
    trace.validate();
    return trace;
}

} // namespace

ActivityTrace generate(const SynthSpec& spec) {
    validate_spec(spec);
    std::mt19937_64 rng(spec.seed);
    return generate_tracking(spec, {}, 0, rng);
}

std::vector<ActivityTrace> generate_multipass(const SynthSpec& spec) {
    validate_spec(spec);
    std::mt19937_64 rng(spec.seed);
    std::vector<ActivityTrace> out;
    if (spec.passes.empty()) {
        out.push_back(generate_tracking(spec, {}, 0, rng));
        return out;
    }
    for (std::size_t k = 0; k < spec.passes.size(); ++k)
        out.push_back(generate_tracking(spec, spec.passes[k], static_cast<int>(k), rng));
    return out;
}

ModelEntry ground_truth_entry(const SynthSpec& spec) {
    validate_spec(spec);
    ModelEntry entry;
    entry.subsystem = spec.subsystem;
    entry.frequency_hz = spec.frequency_hz;
    entry.train_period_ns = spec.period_ns;
    entry.intercept_mw = spec.intercept_mw;
    entry.selected = spec.events;
    entry.weights = spec.weights_mw_per_eps;
    return entry;
}

SynthSpec load_synth_spec(const std::filesystem::path& json_path) {
    const std::string where = json_path.string();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(json_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": " + e.what());
    }
    SynthSpec spec;
    try {
        spec.subsystem = j.at("subsystem").get<std::string>();
        spec.frequency_hz = j.at("frequency_hz").get<std::int64_t>();
        spec.n_units = j.at("n_units").get<int>();
        spec.period_ns = j.at("period_ns").get<std::int64_t>();
        spec.intercept_mw = j.at("intercept_mw").get<double>();
        for (const auto& je : j.at("events")) {
            spec.events.push_back(je.at("name").get<std::string>());
            spec.weights_mw_per_eps.push_back(je.at("weight_mw_per_eps").get<double>());
        }
        for (const auto& jp : j.at("phases")) {
            SynthPhase ph;
            ph.duration_ns = jp.at("duration_ns").get<std::int64_t>();
            ph.rates.assign(spec.events.size(), 0.0);
            for (const auto& [name, rate] : jp.at("rates").items()) {
                const auto it = std::find(spec.events.begin(), spec.events.end(), name);
                if (it == spec.events.end())
                    throw DataError(where + ": phase rate for unknown event '" + name + "'");
                ph.rates[static_cast<std::size_t>(it - spec.events.begin())] =
                    rate.get<double>();
            }
            spec.phases.push_back(std::move(ph));
        }
        spec.noise_sigma = j.value("noise_sigma", 0.0);
        spec.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("passes"))
            spec.passes = j.at("passes").get<std::vector<std::vector<std::string>>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": " + e.what());
    }
    validate_spec(spec);
    return spec;
}

void save_synth_spec(const SynthSpec& spec, const std::filesystem::path& json_path) {
    validate_spec(spec);
    nlohmann::json j;
    j["subsystem"] = spec.subsystem;
    j["frequency_hz"] = spec.frequency_hz;
    j["n_units"] = spec.n_units;
    j["period_ns"] = spec.period_ns;
    j["intercept_mw"] = spec.intercept_mw;
    j["events"] = nlohmann::json::array();
    for (std::size_t i = 0; i < spec.events.size(); ++i) {
        nlohmann::json je;
        je["name"] = spec.events[i];
        je["weight_mw_per_eps"] = spec.weights_mw_per_eps[i];
        j["events"].push_back(std::move(je));
    }
    j["phases"] = nlohmann::json::array();
    for (const SynthPhase& ph : spec.phases) {
        nlohmann::json jp;
        jp["duration_ns"] = ph.duration_ns;
        nlohmann::json rates;
        for (std::size_t i = 0; i < spec.events.size(); ++i)
            rates[spec.events[i]] = ph.rates[i];
        jp["rates"] = std::move(rates);
        j["phases"].push_back(std::move(jp));
    }
    j["noise_sigma"] = spec.noise_sigma;
    j["seed"] = spec.seed;
    if (!spec.passes.empty())
        j["passes"] = spec.passes;
    io::atomic_write(json_path, j.dump(2) + "\n");
}

} // namespace pmcpower
