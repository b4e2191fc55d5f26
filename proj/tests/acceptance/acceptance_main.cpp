// Acceptance gate for the toolchain.  Each criterion prints one line,
//
//   [PASS] <name> - <measured numbers>
//   [FAIL] <name> - <what broke>
//
// and the process exits non-zero when any of them fails.  The checks run the
// public library APIs end to end plus the installed CLI binary (argv[1]) for
// the determinism criterion; tolerances are asserted, never just printed.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pmcpower/characterize.hpp"
#include "pmcpower/error.hpp"
#include "pmcpower/fixedpoint.hpp"
#include "pmcpower/io_util.hpp"
#include "pmcpower/model.hpp"
#include "pmcpower/monitor.hpp"
#include "pmcpower/regress.hpp"
#include "pmcpower/rng.hpp"
#include "pmcpower/synth.hpp"
#include "pmcpower/trace.hpp"

#include "data/stats_fixtures.hpp"
#include "support/oracles.hpp"
#include "support/temp_dir.hpp"

namespace fs = std::filesystem;
using namespace pmcpower;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome pass(std::string detail) { return {true, std::move(detail)}; }
Outcome fail(std::string detail) { return {false, std::move(detail)}; }

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

std::int64_t index_of(const std::vector<std::string>& names, const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name)
            return static_cast<std::int64_t>(i);
    }
    return -1;
}

// Signed uniform draw in [-bound, bound].
std::int64_t uniform_signed(std::mt19937_64& rng, std::int64_t bound) {
    return static_cast<std::int64_t>(
               uniform_below(rng, static_cast<std::uint64_t>(2 * bound + 1))) -
           bound;
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo * std::exp(uniform_unit(rng) * std::log(hi / lo));
}

// ---------------------------------------------------------------------------
// 1. Pipeline recovery on synthetic ground truth.
//
// Three per-frequency campaigns, each 12 constant-rate phases x 20 samples at
// 100 ms over 4 units, tracking 6 events in two passes: two truly driving
// events, one constant, three decoys whose phase patterns were chosen
// orthogonal to every frequency's power vector.  Noise-free runs must select
// exactly the drivers and recover intercept and weights to 1e-6 relative with
// holdout MAPE under 0.1%; 1% gaussian-noise runs must stay within 2.5% MAPE
// and 0.5% energy error on the 30% holdout.  The whole criterion must finish
// in under 10 s.
// ---------------------------------------------------------------------------

SynthSpec pipeline_spec(std::size_t fi, bool noisy) {
    static const double kCyc[12] = {1, 3, 2, 5, 4, 7, 6, 9, 8, 10, 2, 6};
    static const double kMem[12] = {5, 1, 4, 2, 6, 3, 8, 4, 9, 5, 7, 10};
    static const double kDecA[12] = {6, 12, 6, 12, 5, 11, 5, 10, 4, 10, 6, 10};
    static const double kDecB[12] = {7, 6, 4, 6, 5, 6, 6, 7, 6, 5, 8, 6};
    static const double kDecC[12] = {4, 4, 12, 12, 4, 4, 12, 12, 4, 4, 12, 12};
    static const std::int64_t kFreqHz[3] = {1000000000, 1200000000, 1500000000};
    static const double kIntercept[3] = {500.0, 800.0, 1400.0};
    static const double kW1[3] = {2e-6, 3e-6, 6e-6};
    static const double kW2[3] = {8e-7, 1.2e-6, 2.5e-6};

    SynthSpec spec;
    spec.subsystem = "cpu";
    spec.frequency_hz = kFreqHz[fi];
    spec.n_units = 4;
    spec.period_ns = 100000000;
    spec.intercept_mw = kIntercept[fi];
    spec.events = {"cyc", "mem", "flat", "dec_a", "dec_b", "dec_c"};
    spec.weights_mw_per_eps = {kW1[fi], kW2[fi], 0.0, 0.0, 0.0, 0.0};
    for (int p = 0; p < 12; ++p) {
        SynthPhase phase;
        phase.duration_ns = 2000000000; // 20 rows per phase, 240 per frequency
        phase.rates = {kCyc[p] * 1e8,  kMem[p] * 1e8,  2e8,
                       kDecA[p] * 5e7, kDecB[p] * 5e7, kDecC[p] * 5e7};
        spec.phases.push_back(std::move(phase));
    }
    // The drivers share a pass so the trainer has rows tracking both; the
    // decoys live in a second pass, as a real multi-pass campaign would.
    spec.passes = {{"cyc", "mem", "flat"}, {"dec_a", "dec_b", "dec_c"}};
    spec.noise_sigma = noisy ? 0.01 : 0.0;
    spec.seed = 20260814 + fi;
    return spec;
}

Outcome criterion_pipeline() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_rel = 0.0;
    double worst_clean_mape = 0.0;
    double worst_noisy_mape = 0.0;
    double worst_noisy_energy = 0.0;
    std::vector<ModelEntry> clean_entries;

    for (std::size_t fi = 0; fi < 3; ++fi) {
        // Noise-free: structure recovery must be exact.
        const SynthSpec clean = pipeline_spec(fi, false);
        std::vector<RateMatrix> passes;
        for (const ActivityTrace& t : generate_multipass(clean))
            passes.push_back(normalize(t));
        const std::vector<RankedEvent> ranking = correlate_events(passes, 0.05);
        std::vector<std::string> selected = select_top(ranking, 4);
        std::sort(selected.begin(), selected.end());
        if (selected != std::vector<std::string>{"cyc", "mem"}) {
            std::string got;
            for (const std::string& s : selected)
                got += s + " ";
            return fail(fmt("noise-free selection at %lld Hz picked {%s}, want {cyc mem}",
                            static_cast<long long>(clean.frequency_hz), got.c_str()));
        }

        const RateMatrix design = project_events(passes[0], selected);
        const auto [train, holdout] = split_dataset(design, 0.7, 42);
        const ModelEntry entry = train_entry(train, selected, "cpu", clean.frequency_hz);

        const double rel_l =
            std::fabs(entry.intercept_mw - clean.intercept_mw) / clean.intercept_mw;
        worst_rel = std::max(worst_rel, rel_l);
        for (const std::string& name : {std::string("cyc"), std::string("mem")}) {
            const double truth =
                clean.weights_mw_per_eps[static_cast<std::size_t>(index_of(clean.events, name))];
            const std::int64_t j = index_of(entry.selected, name);
            if (j < 0)
                return fail("trained entry lost event '" + name + "'");
            const double rel =
                std::fabs(entry.weights[static_cast<std::size_t>(j)] - truth) / truth;
            worst_rel = std::max(worst_rel, rel);
        }
        if (worst_rel > 1e-6)
            return fail(fmt("noise-free recovery error %.3e exceeds 1e-6 relative", worst_rel));

        const ValidationReport clean_val = validate_entry(entry, holdout);
        worst_clean_mape = std::max(worst_clean_mape, clean_val.mape);
        if (clean_val.mape >= 0.1)
            return fail(fmt("noise-free holdout MAPE %.4f%% not under 0.1%%", clean_val.mape));
        clean_entries.push_back(entry);

        // 1% gaussian noise: aggregate accuracy on the 30% holdout.
        const SynthSpec noisy = pipeline_spec(fi, true);
        std::vector<RateMatrix> noisy_passes;
        for (const ActivityTrace& t : generate_multipass(noisy))
            noisy_passes.push_back(normalize(t));
        const std::vector<RankedEvent> noisy_ranking = correlate_events(noisy_passes, 0.05);
        std::vector<std::string> noisy_sel = select_top(noisy_ranking, 2);
        std::sort(noisy_sel.begin(), noisy_sel.end());
        if (noisy_sel != std::vector<std::string>{"cyc", "mem"})
            return fail(fmt("noisy selection at %lld Hz missed a driver",
                            static_cast<long long>(noisy.frequency_hz)));
        const RateMatrix noisy_design = project_events(noisy_passes[0], noisy_sel);
        const auto [noisy_train, noisy_holdout] = split_dataset(noisy_design, 0.7, 42);
        const ModelEntry noisy_entry =
            train_entry(noisy_train, noisy_sel, "cpu", noisy.frequency_hz);
        const ValidationReport val = validate_entry(noisy_entry, noisy_holdout);
        worst_noisy_mape = std::max(worst_noisy_mape, val.mape);
        worst_noisy_energy = std::max(worst_noisy_energy, val.energy_error_pct);
        if (val.mape > 2.5)
            return fail(fmt("noisy holdout MAPE %.3f%% exceeds 2.5%%", val.mape));
        if (val.energy_error_pct > 0.5)
            return fail(fmt("noisy energy error %.3f%% exceeds 0.5%%", val.energy_error_pct));
    }

    // The three per-frequency models must compose into one searchable LUT.
    const PowerLut lut = compose_lut(clean_entries);
    for (std::size_t fi = 0; fi < 3; ++fi) {
        const SynthSpec spec = pipeline_spec(fi, false);
        if (lut.find("cpu", spec.frequency_hz) == nullptr)
            return fail(fmt("composed LUT lost the %lld Hz entry",
                            static_cast<long long>(spec.frequency_hz)));
    }

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (elapsed >= 10.0)
        return fail(fmt("pipeline took %.1f s, budget is 10 s", elapsed));
    return pass(fmt("recovery err %.2e, clean MAPE %.2e%%, noisy MAPE %.2f%% / "
                    "energy %.2f%%, %.2f s",
                    worst_rel, worst_clean_mape, worst_noisy_mape, worst_noisy_energy, elapsed));
}

// ---------------------------------------------------------------------------
// 2. NNLS against exhaustive support enumeration: 500 random problems with up
// to 4 columns, weights within 1e-6 infinity-norm of the brute-force optimum
// and KKT conditions re-verified on every solution.
// ---------------------------------------------------------------------------

Outcome criterion_nnls() {
    std::mt19937_64 rng(77001);
    double worst_diff = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        // Strictly overdetermined shapes: with rows <= cols the minimum-norm
        // residual hits zero on many supports at once and the optimum is no
        // longer unique, which would make the weight comparison ill-posed.
        const std::size_t cols = 1 + uniform_below(rng, 4);
        const std::size_t rows = cols + 1 + uniform_below(rng, 7);
        Matrix a(rows, cols);
        for (double& v : a.data)
            v = 2.0 * uniform_unit(rng) - 1.0;
        std::vector<double> b(rows);
        if (uniform_below(rng, 2) == 0) {
            // Consistent-ish system: planted nonnegative weights plus noise,
            // which lands solutions in the interior of the feasible set.
            std::vector<double> w(cols);
            for (double& v : w)
                v = 2.0 * uniform_unit(rng);
            for (std::size_t r = 0; r < rows; ++r) {
                double s = 0.1 * gaussian(rng);
                for (std::size_t j = 0; j < cols; ++j)
                    s += a.at(r, j) * w[j];
                b[r] = s;
            }
        } else {
            // Unstructured right-hand side, which pushes the optimum onto the
            // w = 0 boundary far more often.
            for (double& v : b)
                v = 4.0 * uniform_unit(rng) - 2.0;
        }

        NnlsSolution sol;
        try {
            sol = nnls(a, b);
        } catch (const NnlsConvergenceError& e) {
            return fail(fmt("trial %d did not converge: %s", trial, e.what()));
        }
        const oracles::ExhaustiveNnls ref = oracles::exhaustive_nnls(a, b);
        for (std::size_t j = 0; j < cols; ++j)
            worst_diff = std::max(worst_diff, std::fabs(sol.weights[j] - ref.weights[j]));
        if (worst_diff > 1e-6)
            return fail(fmt("trial %d weight off by %.3e (limit 1e-6)", trial, worst_diff));

        double atb_inf = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double g = 0.0;
            for (std::size_t r = 0; r < rows; ++r)
                g += a.at(r, j) * b[r];
            atb_inf = std::max(atb_inf, std::fabs(g));
        }
        if (!oracles::kkt_ok(a, b, sol.weights, 1e-8 * std::max(1.0, atb_inf)))
            return fail(fmt("trial %d violates the KKT conditions", trial));
    }
    return pass(fmt("500 problems, worst weight diff %.2e, KKT clean", worst_diff));
}

// ---------------------------------------------------------------------------
// 3. Statistics against 50 frozen reference fixtures at 1e-9 absolute.
// ---------------------------------------------------------------------------

Outcome criterion_statistics() {
    const auto fixtures = testdata::stats_fixtures();
    if (fixtures.size() != 50)
        return fail(fmt("expected 50 fixtures, found %zu", fixtures.size()));
    double worst = 0.0;
    for (std::size_t i = 0; i < fixtures.size(); ++i) {
        const auto& f = fixtures[i];
        const SimpleFit fit = simple_lls(f.x, f.y);
        const double err = std::max({std::fabs(fit.slope - f.slope),
                                     std::fabs(fit.intercept - f.intercept),
                                     std::fabs(fit.pcc - f.pcc),
                                     std::fabs(fit.p_value - f.p_value),
                                     std::fabs(pearson(f.x, f.y) - f.pcc)});
        worst = std::max(worst, err);
        if (err > 1e-9)
            return fail(fmt("fixture %zu off by %.3e (limit 1e-9)", i, err));
    }
    return pass(fmt("50 fixtures, worst abs err %.2e", worst));
}

// ---------------------------------------------------------------------------
// 4. PMU-aware selection over 200 random catalogs (up to 10 events, random
// pairwise conflicts).  Every output must be feasible, within the PMU limit,
// contain the best individually-feasible event, match an independent greedy
// reference, and collapse to plain top-k when everything is compatible.
// ---------------------------------------------------------------------------

Outcome criterion_selection() {
    for (int seed = 0; seed < 200; ++seed) {
        std::mt19937_64 rng(31000 + static_cast<std::uint64_t>(seed));
        const std::size_t n = 1 + uniform_below(rng, 10);
        const int pmu_limit = static_cast<int>(1 + uniform_below(rng, n));
        const std::size_t limit = 1 + uniform_below(rng, n);

        std::vector<RankedEvent> ranking(n);
        EventCatalog catalog;
        catalog.subsystem = "cpu";
        catalog.pmu_limit = pmu_limit;
        for (std::size_t i = 0; i < n; ++i) {
            ranking[i].name = "e" + std::to_string(i);
            ranking[i].fit.slope = 1.0;
            ranking[i].fit.pcc = 0.95 - 0.05 * static_cast<double>(i);
            ranking[i].fit.p_value = 1e-4;
            ranking[i].fit.n = 50;
            catalog.events.push_back({ranking[i].name, {}, false});
        }
        // Random pairwise conflicts, one group per conflicting pair.
        std::vector<std::pair<std::size_t, std::size_t>> conflicts;
        int group = 0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (uniform_below(rng, 4) == 0) {
                    const std::string g = "g" + std::to_string(group++);
                    catalog.events[i].conflict_groups.push_back(g);
                    catalog.events[j].conflict_groups.push_back(g);
                    conflicts.emplace_back(i, j);
                }
            }
        }

        const std::vector<std::string> got = select_pmu_aware(ranking, catalog, limit);

        // Independent feasibility: size caps plus no conflicting pair.
        const auto feasible = [&](const std::vector<std::string>& set) {
            if (set.size() > static_cast<std::size_t>(pmu_limit) || set.size() > limit)
                return false;
            for (const auto& [i, j] : conflicts) {
                if (index_of(set, "e" + std::to_string(i)) >= 0 &&
                    index_of(set, "e" + std::to_string(j)) >= 0)
                    return false;
            }
            return true;
        };
        if (!feasible(got))
            return fail(fmt("seed %d: selection is infeasible or over the limit", seed));
        if (index_of(got, ranking[0].name) < 0)
            return fail(fmt("seed %d: best individually-feasible event '%s' missing", seed,
                            ranking[0].name.c_str()));

        std::vector<std::string> names(n);
        for (std::size_t i = 0; i < n; ++i)
            names[i] = ranking[i].name;
        if (got != oracles::greedy_select_ref(names, feasible))
            return fail(fmt("seed %d: selection diverges from the greedy reference", seed));

        // With every event compatible the picker must degrade to plain top-k.
        EventCatalog open = catalog;
        for (CatalogEvent& e : open.events)
            e.conflict_groups.clear();
        const std::size_t open_cap = std::min<std::size_t>(pmu_limit, limit);
        if (select_pmu_aware(ranking, open, limit) != select_top(ranking, open_cap))
            return fail(fmt("seed %d: all-compatible selection is not plain top-k", seed));
    }
    return pass("200 catalogs: feasible, reference-exact, top-k degradation holds");
}

// ---------------------------------------------------------------------------
// 5. Fixed-point accuracy: a million random multiply-accumulates against a
// 128-bit exact oracle (each step within half an output ulp), then the full
// integer inference path against the float model on randomized realistic
// models: max relative error under 0.8%, mean under 0.05%.
// ---------------------------------------------------------------------------

Outcome criterion_fixed_point() {
    std::mt19937_64 rng(55001);
    for (int i = 0; i < 1000000; ++i) {
        const Fx acc{uniform_signed(rng, INT64_C(1) << 50)};
        const Fx a{uniform_signed(rng, INT64_C(1) << 45)};
        const Fx b{uniform_signed(rng, INT64_C(1) << 45)};
        bool overflow = false;
        const Fx r = fx_mul_acc(acc, a, b, overflow);
        const __int128 exact = (static_cast<__int128>(acc.raw) << kFxFracBits) +
                               static_cast<__int128>(a.raw) * b.raw;
        if (overflow)
            return fail(fmt("mul-acc %d saturated inside the headroom bounds", i));
        if (!oracles::within_half_ulp(r.raw, exact, kFxFracBits))
            return fail(fmt("mul-acc %d off by more than half an ulp", i));
    }

    std::mt19937_64 mrng(55002);
    double max_rel = 0.0, sum_rel = 0.0;
    int samples = 0;
    for (int m = 0; m < 300; ++m) {
        const std::size_t n_events = 1 + uniform_below(mrng, 4);
        const std::size_t n_units = 1 + uniform_below(mrng, 4);
        ModelEntry entry;
        entry.subsystem = "cpu";
        entry.frequency_hz = 1000000000;
        entry.train_period_ns = 100000000;
        entry.intercept_mw = 100.0 + 1900.0 * uniform_unit(mrng);
        for (std::size_t j = 0; j < n_events; ++j) {
            entry.selected.push_back("e" + std::to_string(j));
            entry.weights.push_back(log_uniform(mrng, 1e-8, 5e-6));
        }
        const FxModelEntry fx_entry = to_fixed_point(entry);
        const std::int64_t window_ns =
            10000000 + static_cast<std::int64_t>(uniform_below(mrng, 990000000));

        for (int s = 0; s < 10; ++s) {
            CountGrid counts(n_units, std::vector<std::int64_t>(n_events));
            double want = entry.intercept_mw;
            for (std::size_t u = 0; u < n_units; ++u) {
                for (std::size_t j = 0; j < n_events; ++j) {
                    const double rate = log_uniform(mrng, 1e6, 5e9);
                    counts[u][j] = std::llround(rate * static_cast<double>(window_ns) / 1e9);
                    want += static_cast<double>(counts[u][j]) * 1e9 /
                            static_cast<double>(window_ns) * entry.weights[j];
                }
            }
            bool overflow = false;
            const double got = to_double(fx_predict(fx_entry, counts, window_ns, overflow));
            if (overflow)
                return fail(fmt("model %d sample %d overflowed unexpectedly", m, s));
            const double rel = std::fabs(got - want) / want;
            max_rel = std::max(max_rel, rel);
            sum_rel += rel;
            ++samples;
        }
    }
    const double mean_rel = sum_rel / samples;
    if (max_rel >= 0.008)
        return fail(fmt("end-to-end max relative error %.3e not under 0.8%%", max_rel));
    if (mean_rel >= 0.0005)
        return fail(fmt("end-to-end mean relative error %.3e not under 0.05%%", mean_rel));
    return pass(fmt("1e6 mul-accs within 0.5 ulp; end-to-end max %.2e, mean %.2e", max_rel,
                    mean_rel));
}

// ---------------------------------------------------------------------------
// 6. Moving window vs a shadow deque (exact sums for every capacity 1..64
// over 1e5 pushes each) and the trigger's tick bound over 1e4 random tapes.
// ---------------------------------------------------------------------------

Outcome criterion_window_and_trigger() {
    std::mt19937_64 rng(66001);
    for (std::size_t cap = 1; cap <= 64; ++cap) {
        MovingWindow win(cap, 2);
        oracles::ShadowWindow ref(cap, 2);
        for (int i = 0; i < 100000; ++i) {
            const std::int64_t duration = 1 + static_cast<std::int64_t>(uniform_below(rng, 1000000));
            const std::array<std::int64_t, 2> deltas = {
                static_cast<std::int64_t>(uniform_below(rng, 1000000000)),
                static_cast<std::int64_t>(uniform_below(rng, 1000000))};
            const MovingWindow::Totals t = win.push(duration, deltas);
            ref.push(duration, deltas);
            if (t.duration_ns != ref.duration_sum() || t.counts != ref.count_sums() ||
                t.size != ref.size())
                return fail(fmt("capacity %zu push %d diverged from the shadow window", cap, i));
            if (i % 9973 == 0) {
                const MovingWindow::Totals snap = win.totals();
                if (snap.duration_ns != t.duration_ns || snap.counts != t.counts)
                    return fail(fmt("capacity %zu reader snapshot diverged", cap));
            }
        }
    }

    std::mt19937_64 trng(66002);
    for (int tape = 0; tape < 10000; ++tape) {
        const int n_cores = static_cast<int>(1 + uniform_below(trng, 3));
        const int threshold = static_cast<int>(1 + uniform_below(trng, 5));
        SchedStream stream;
        stream.n_cores = n_cores;
        stream.events = {"ev"};
        std::int64_t t = 0;
        const int rows = static_cast<int>(1 + uniform_below(trng, 60));
        for (int i = 0; i < rows; ++i) {
            t += 1 + static_cast<std::int64_t>(uniform_below(trng, 1000));
            SchedEvent e;
            e.t_ns = t;
            e.core = static_cast<int>(uniform_below(trng, static_cast<std::uint64_t>(n_cores)));
            e.kind = uniform_below(trng, 4) == 0 ? SchedEventKind::context_switch
                                                 : SchedEventKind::tick;
            e.deltas = {static_cast<std::int64_t>(uniform_below(trng, 1000))};
            stream.rows.push_back(std::move(e));
        }
        const std::vector<RawSample> samples = trigger_stream(stream, threshold);

        // Replay: the tick count on a core may never exceed the threshold
        // between consecutive samples, and every sample resets it.
        std::vector<int> ticks(static_cast<std::size_t>(n_cores), 0);
        std::size_t idx = 0;
        for (const SchedEvent& row : stream.rows) {
            if (row.kind == SchedEventKind::tick) {
                if (++ticks[static_cast<std::size_t>(row.core)] > threshold)
                    return fail(fmt("tape %d: core %d passed %d ticks without a sample", tape,
                                    row.core, threshold));
            }
            if (idx < samples.size() && samples[idx].t_ns == row.t_ns &&
                samples[idx].core == row.core) {
                ticks[static_cast<std::size_t>(row.core)] = 0;
                ++idx;
            }
        }
        if (idx != samples.size())
            return fail(fmt("tape %d: %zu samples not aligned with the stream", tape,
                            samples.size() - idx));
    }
    return pass("64 capacities x 1e5 pushes exact; tick bound held over 1e4 tapes");
}

// ---------------------------------------------------------------------------
// 7. Time rescaling: a constant-rate workload sampled at T, 2T and 10T must
// produce identical fixed-point estimates (within one raw ulp) because the
// counts scale with the window exactly as the 1/T' factor shrinks.
// ---------------------------------------------------------------------------

Outcome criterion_time_rescaling() {
    ModelEntry entry;
    entry.subsystem = "cpu";
    entry.frequency_hz = 1000000000;
    entry.train_period_ns = 100000000;
    entry.intercept_mw = 500.0;
    entry.selected = {"cyc", "mem"};
    entry.weights = {2e-6, 8e-7};
    const FxLut fx_lut = to_fixed_point(compose_lut({entry}));
    const std::vector<FreqChange> timeline = {{0, "cpu", 1000000000}};

    std::array<std::vector<std::int64_t>, 3> raws;
    const std::array<std::int64_t, 3> scales = {1, 2, 10};
    for (std::size_t si = 0; si < scales.size(); ++si) {
        const std::int64_t scale = scales[si];
        SchedStream stream;
        stream.n_cores = 1;
        stream.events = {"cyc", "mem"};
        for (std::int64_t k = 1; k <= 40; ++k) {
            SchedEvent e;
            e.t_ns = k * scale * 100000000;
            e.core = 0;
            e.kind = SchedEventKind::context_switch;
            e.deltas = {30000000 * scale, 12000000 * scale};
            stream.rows.push_back(std::move(e));
        }
        MonitorConfig cfg;
        cfg.window_capacity = 1; // one sample per estimate: the pure 1/T' path
        cfg.tick_threshold = 1;
        cfg.eval_float = false;
        const std::vector<EstimatePoint> est =
            online_estimate(&fx_lut, nullptr, "cpu", timeline, stream, cfg);
        if (est.size() != 40)
            return fail(fmt("scale %lld produced %zu estimates, want 40",
                            static_cast<long long>(scale), est.size()));
        for (const EstimatePoint& p : est) {
            if (!p.power_fx || p.overflow)
                return fail("fixed-point estimate missing or saturated");
            raws[si].push_back(p.power_fx->raw);
        }
    }
    std::int64_t worst = 0;
    for (std::size_t si = 0; si < raws.size(); ++si) {
        for (std::size_t k = 0; k < raws[si].size(); ++k)
            worst = std::max<std::int64_t>(worst, std::llabs(raws[si][k] - raws[0][k]));
    }
    if (worst > 1)
        return fail(fmt("estimates at rescaled periods differ by %lld raw ulps",
                        static_cast<long long>(worst)));

    // Direct single-window checks across random weights and counts.
    std::mt19937_64 rng(77002);
    for (int trial = 0; trial < 200; ++trial) {
        ModelEntry one;
        one.subsystem = "cpu";
        one.frequency_hz = 1000000000;
        one.train_period_ns = 100000000;
        one.intercept_mw = 0.0;
        one.selected = {"ev"};
        one.weights = {log_uniform(rng, 1e-8, 5e-6)};
        const FxModelEntry fe = to_fixed_point(one);
        const std::int64_t c =
            10000 + static_cast<std::int64_t>(uniform_below(rng, 1000000000));
        bool o1 = false, o2 = false, o3 = false;
        const std::array<std::int64_t, 1> c1 = {c}, c2 = {2 * c}, c3 = {10 * c};
        const std::int64_t r1 = fx_dyn(fe, c1, 100000000, o1).raw;
        const std::int64_t r2 = fx_dyn(fe, c2, 200000000, o2).raw;
        const std::int64_t r3 = fx_dyn(fe, c3, 1000000000, o3).raw;
        worst = std::max({worst, static_cast<std::int64_t>(std::llabs(r2 - r1)),
                          static_cast<std::int64_t>(std::llabs(r3 - r1))});
        if (o1 || o2 || o3 || worst > 1)
            return fail(fmt("trial %d: rescaled windows differ by %lld raw ulps", trial,
                            static_cast<long long>(worst)));
    }
    return pass(fmt("T/2T/10T estimates agree, worst diff %lld raw ulp",
                    static_cast<long long>(worst)));
}

// ---------------------------------------------------------------------------
// 8. CLI determinism: every command runs three times on identical inputs and
// must produce byte-identical output trees, run manifests included.
// ---------------------------------------------------------------------------

std::string sh_quote(const fs::path& p) { return "'" + p.string() + "'"; }

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file())
            files[e.path().filename().string()] = io::read_file(e.path());
    }
    return files;
}

std::string run_stage_x3(const std::string& tool, const fs::path& root, const std::string& stage,
                         const std::function<std::string(const fs::path&)>& args_for,
                         std::size_t& files_compared) {
    std::array<std::map<std::string, std::string>, 3> outputs;
    for (int r = 0; r < 3; ++r) {
        const fs::path dir = root / (stage + "_r" + std::to_string(r + 1));
        fs::create_directories(dir);
        const std::string cmd =
            sh_quote(tool) + " " + args_for(dir) + " >> " + sh_quote(root / "cli.log") + " 2>&1";
        if (std::system(cmd.c_str()) != 0)
            return stage + ": run " + std::to_string(r + 1) + " exited non-zero";
        outputs[static_cast<std::size_t>(r)] = dir_contents(dir);
    }
    if (outputs[0].empty())
        return stage + ": produced no output files";
    for (int r = 1; r < 3; ++r) {
        if (outputs[static_cast<std::size_t>(r)] != outputs[0])
            return stage + ": run " + std::to_string(r + 1) + " is not byte-identical to run 1";
    }
    files_compared += outputs[0].size();
    return "";
}

Outcome criterion_cli_determinism(const std::string& tool) {
    testsupport::TempDir tmp;
    const fs::path root = tmp.path;
    const fs::path shared = root / "shared";
    fs::create_directories(shared);

    save_synth_spec(pipeline_spec(0, true), shared / "spec.json");

    EventCatalog catalog;
    catalog.subsystem = "cpu";
    catalog.pmu_limit = 4;
    for (const char* name : {"cyc", "mem", "flat", "dec_a", "dec_b", "dec_c"})
        catalog.events.push_back({name, {}, false});
    catalog.events[3].conflict_groups.push_back("gA");
    catalog.events[4].conflict_groups.push_back("gA");
    save_catalog(catalog, shared / "catalog.json");

    SchedStream sched;
    sched.n_cores = 2;
    sched.events = {"cyc", "mem"};
    for (std::int64_t k = 1; k <= 24; ++k) {
        SchedEvent e;
        e.t_ns = k * 50000000;
        e.core = static_cast<int>(k % 2);
        e.kind = k % 3 == 0 ? SchedEventKind::context_switch : SchedEventKind::tick;
        e.deltas = {1500000 * (k % 5 + 1), 600000 * (k % 5 + 1)};
        sched.rows.push_back(std::move(e));
    }
    save_sched_csv(sched, shared / "sched.csv");
    const std::vector<FreqChange> timeline = {{0, "cpu", 1000000000}};
    save_freq_csv(timeline, shared / "freq.csv");

    // Later stages consume the *first* run's outputs, so every run of a stage
    // sees the same input paths and bytes.
    const fs::path spec = shared / "spec.json";
    const fs::path cat = shared / "catalog.json";
    const fs::path traces = root / "synth_r1";
    const fs::path report = root / "char_r1" / "report.json";
    const fs::path model = root / "train_r1" / "model.json";
    const fs::path lut = root / "comp_r1" / "lut.json";
    const fs::path lut_fx = root / "fx_r1" / "lut_fx.json";

    std::size_t files = 0;
    const std::vector<std::pair<std::string, std::function<std::string(const fs::path&)>>>
        stages = {
            {"synth",
             [&](const fs::path& d) {
                 return "synth --spec " + sh_quote(spec) + " --out " + sh_quote(d);
             }},
            {"char",
             [&](const fs::path& d) {
                 return "characterize --traces " + sh_quote(traces) + " --catalog " + sh_quote(cat) +
                        " --alpha 0.05 --limit 2 --selector pmu-aware --out " +
                        sh_quote(d / "report.json");
             }},
            {"train",
             [&](const fs::path& d) {
                 return "train --traces " + sh_quote(traces) + " --report " + sh_quote(report) +
                        " --train-fraction 0.7 --seed 42 --out " + sh_quote(d / "model.json");
             }},
            {"val",
             [&](const fs::path& d) {
                 return "validate --model " + sh_quote(model) + " --traces " + sh_quote(traces) +
                        " --out " + sh_quote(d / "validation.json");
             }},
            {"comp",
             [&](const fs::path& d) {
                 return "compose " + sh_quote(model) + " --out " + sh_quote(d / "lut.json");
             }},
            {"fx",
             [&](const fs::path& d) {
                 return "export-fx --lut " + sh_quote(lut) + " --prescale 20 --out " +
                        sh_quote(d / "lut_fx.json");
             }},
            {"sim",
             [&](const fs::path& d) {
                 return "simulate --lut-fx " + sh_quote(lut_fx) + " --lut " + sh_quote(lut) +
                        " --sched " + sh_quote(shared / "sched.csv") + " --freq " +
                        sh_quote(shared / "freq.csv") +
                        " --subsystem cpu --window 4 --tick-threshold 2 --mode both --out " +
                        sh_quote(d / "estimates.csv");
             }},
        };
    for (const auto& [name, args_for] : stages) {
        const std::string err = run_stage_x3(tool, root, name, args_for, files);
        if (!err.empty())
            return fail(err);
    }
    return pass(fmt("7 commands x 3 runs byte-identical (%zu files per run set)", files));
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <path-to-pmcpower-tool>\n");
        return 2;
    }
    const std::string tool = argv[1];

    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"pipeline-recovery", criterion_pipeline},
        {"nnls-oracle", criterion_nnls},
        {"statistics-reference", criterion_statistics},
        {"pmu-aware-selection", criterion_selection},
        {"fixed-point-accuracy", criterion_fixed_point},
        {"moving-window-and-trigger", criterion_window_and_trigger},
        {"time-rescaling", criterion_time_rescaling},
        {"cli-determinism", [&] { return criterion_cli_determinism(tool); }},
    };

    bool all_pass = true;
    for (const Criterion& c : criteria) {
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = fail(std::string("unexpected exception: ") + e.what());
        }
        std::printf("[%s] %s - %s\n", outcome.pass ? "PASS" : "FAIL", c.name,
                    outcome.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && outcome.pass;
    }
    return all_pass ? 0 : 1;
}
