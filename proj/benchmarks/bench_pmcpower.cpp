// Microbenchmarks for the hot paths: the NNLS trainer (offline, but run per
// frequency point during a sweep), the integer inference primitives that a
// kernel-side monitor would execute per sample, and the moving window the
// trigger feeds.  Data setup sits outside the timed regions.

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "pmcpower/fixedpoint.hpp"
#include "pmcpower/model.hpp"
#include "pmcpower/monitor.hpp"
#include "pmcpower/regress.hpp"
#include "pmcpower/rng.hpp"

using namespace pmcpower;

namespace {

// Trainer-shaped problem: two rate columns plus the ones intercept column,
// pre-scaled to unit infinity-norm the way train_entry feeds the solver.
Matrix training_design(std::size_t rows, std::vector<double>& b) {
    std::mt19937_64 rng(12);
    Matrix a(rows, 3);
    b.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double x0 = static_cast<double>(1 + uniform_below(rng, 40)) / 40.0;
        const double x1 = static_cast<double>(1 + uniform_below(rng, 80)) / 80.0;
        a.at(r, 0) = x0;
        a.at(r, 1) = x1;
        a.at(r, 2) = 1.0;
        b[r] = 8000.0 * x0 + 3200.0 * x1 + 500.0 + 5.0 * gaussian(rng);
    }
    return a;
}

void BM_NnlsTrain(benchmark::State& state) {
    std::vector<double> b;
    const Matrix a = training_design(static_cast<std::size_t>(state.range(0)), b);
    for (auto _ : state) {
        const NnlsSolution sol = nnls(a, b);
        benchmark::DoNotOptimize(sol.weights.data());
    }
}
BENCHMARK(BM_NnlsTrain)->Arg(168)->Arg(1024);

void BM_FxMulAcc(benchmark::State& state) {
    std::mt19937_64 rng(34);
    std::array<Fx, 256> xs{}, ws{};
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i].raw = static_cast<std::int64_t>(uniform_below(rng, INT64_C(1) << 45));
        ws[i].raw = static_cast<std::int64_t>(uniform_below(rng, INT64_C(1) << 30));
    }
    bool overflow = false;
    for (auto _ : state) {
        Fx acc{0};
        for (std::size_t i = 0; i < xs.size(); ++i)
            acc = fx_mul_acc(acc, xs[i], ws[i], overflow);
        benchmark::DoNotOptimize(acc.raw);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(xs.size()));
}
BENCHMARK(BM_FxMulAcc);

void BM_FxPredict(benchmark::State& state) {
    ModelEntry entry;
    entry.subsystem = "cpu";
    entry.frequency_hz = 1000000000;
    entry.train_period_ns = 100000000;
    entry.intercept_mw = 500.0;
    entry.selected = {"cyc", "mem"};
    entry.weights = {2e-6, 8e-7};
    const FxModelEntry fx = to_fixed_point(entry);
    const CountGrid counts(4, {30000000, 12000000});
    bool overflow = false;
    for (auto _ : state) {
        const Fx p = fx_predict(fx, counts, 100000000, overflow);
        benchmark::DoNotOptimize(p.raw);
    }
}
BENCHMARK(BM_FxPredict);

void BM_WindowPush(benchmark::State& state) {
    std::mt19937_64 rng(56);
    MovingWindow win(static_cast<std::size_t>(state.range(0)), 2);
    std::vector<std::array<std::int64_t, 2>> deltas(1024);
    for (auto& d : deltas)
        d = {static_cast<std::int64_t>(uniform_below(rng, 100000000)),
             static_cast<std::int64_t>(uniform_below(rng, 1000000))};
    std::size_t i = 0;
    for (auto _ : state) {
        const MovingWindow::Totals t = win.push(1000000, deltas[i++ & 1023]);
        benchmark::DoNotOptimize(t.duration_ns);
    }
}
BENCHMARK(BM_WindowPush)->Arg(4)->Arg(64);

void BM_OnlineEstimate(benchmark::State& state) {
    ModelEntry entry;
    entry.subsystem = "cpu";
    entry.frequency_hz = 1000000000;
    entry.train_period_ns = 100000000;
    entry.intercept_mw = 500.0;
    entry.selected = {"cyc", "mem"};
    entry.weights = {2e-6, 8e-7};
    const PowerLut lut = compose_lut({entry});
    const FxLut fx = to_fixed_point(lut);
    const std::vector<FreqChange> timeline = {{0, "cpu", 1000000000}};

    std::mt19937_64 rng(78);
    SchedStream stream;
    stream.n_cores = 4;
    stream.events = {"cyc", "mem"};
    std::int64_t t = 0;
    for (int i = 0; i < 4096; ++i) {
        t += 1 + static_cast<std::int64_t>(uniform_below(rng, 2000000));
        SchedEvent e;
        e.t_ns = t;
        e.core = static_cast<int>(uniform_below(rng, 4));
        e.kind = uniform_below(rng, 4) == 0 ? SchedEventKind::context_switch
                                            : SchedEventKind::tick;
        e.deltas = {static_cast<std::int64_t>(uniform_below(rng, 10000000)),
                    static_cast<std::int64_t>(uniform_below(rng, 4000000))};
        stream.rows.push_back(std::move(e));
    }
    MonitorConfig cfg;
    cfg.window_capacity = 10;
    cfg.tick_threshold = 2;
    cfg.eval_float = false;
    for (auto _ : state) {
        const auto est = online_estimate(&fx, nullptr, "cpu", timeline, stream, cfg);
        benchmark::DoNotOptimize(est.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.rows.size()));
}
BENCHMARK(BM_OnlineEstimate);

} // namespace

BENCHMARK_MAIN();
