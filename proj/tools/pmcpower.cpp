// pmcpower: build, validate and replay PMC-based DVFS power models.
//
// synth        generate characterization traces from a ground-truth spec
// characterize rank counters against power and pick a PMU-schedulable set
// train        fit a per-frequency NNLS model on a train/holdout split
// validate     score a model against recorded traces
// compose      merge per-frequency models into a DVFS lookup table
// export-fx    convert a LUT to Q34.29 fixed point for in-kernel use
// simulate     replay a scheduler stream through the moving-window monitor

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmcpower/characterize.hpp"
#include "pmcpower/error.hpp"
#include "pmcpower/fixedpoint.hpp"
#include "pmcpower/io_util.hpp"
#include "pmcpower/model.hpp"
#include "pmcpower/monitor.hpp"
#include "pmcpower/synth.hpp"
#include "pmcpower/trace.hpp"

namespace fs = std::filesystem;
using namespace pmcpower;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// Every command leaves a replay record beside its primary output: the exact
// configuration plus a content hash of each input. No timestamps, so reruns
// of the same invocation produce byte-identical manifests.
void write_manifest(const fs::path& out_dir, const std::string& command,
                    const nlohmann::json& config, std::vector<std::string> input_paths,
                    std::vector<std::string> output_names) {
    nlohmann::json j;
    j["tool"] = "pmcpower";
    j["version"] = kVersion;
    j["command"] = command;
    j["config"] = config;
    std::sort(input_paths.begin(), input_paths.end());
    j["inputs"] = nlohmann::json::array();
    for (const std::string& p : input_paths) {
        nlohmann::json ji;
        ji["path"] = p;
        ji["fnv1a64"] = io::fnv1a64_hex(io::read_file(p));
        j["inputs"].push_back(std::move(ji));
    }
    std::sort(output_names.begin(), output_names.end());
    j["outputs"] = std::move(output_names);
    io::atomic_write(out_dir / "run_manifest.json", j.dump(2) + "\n");
}

struct SynthOpts {
    std::string spec_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int run_synth(const SynthOpts& o) {
    SynthSpec spec = load_synth_spec(o.spec_path);
    if (o.seed_set)
        spec.seed = o.seed;
    const std::vector<ActivityTrace> traces = generate_multipass(spec);

    fs::create_directories(o.out_dir);
    const fs::path out(o.out_dir);
    save_meta(TraceMeta{spec.subsystem, spec.frequency_hz, spec.n_units}, out / "meta.json");
    std::vector<std::string> outputs = {"meta.json", "truth.json"};
    std::size_t rows = 0;
    for (const ActivityTrace& t : traces) {
        const std::string name = "pass_" + std::to_string(t.pass_id) + ".csv";
        write_trace_csv(t, out / name);
        outputs.push_back(name);
        rows += t.rows.size();
    }
    save_model(ground_truth_entry(spec), out / "truth.json");

    nlohmann::json config;
    config["spec"] = o.spec_path;
    config["seed"] = spec.seed;
    write_manifest(out, "synth", config, {o.spec_path}, outputs);
    std::cout << "synth: " << traces.size() << " passes, " << rows << " rows, subsystem "
              << spec.subsystem << " @ " << spec.frequency_hz << " Hz\n";
    return 0;
}

struct CharacterizeOpts {
    std::string traces_dir;
    std::string catalog_path;
    std::string out_path;
    double alpha = 0.05;
    std::size_t limit = 0;
    std::string selector = "pmu-aware";
    double max_cv = -1.0; // <0: no stability screening
};

int run_characterize(const CharacterizeOpts& o) {
    const std::vector<ActivityTrace> traces = ingest_pass_dir(o.traces_dir);
    const EventCatalog catalog = load_catalog(o.catalog_path);
    if (catalog.subsystem != traces[0].subsystem)
        throw DataError("catalog subsystem '" + catalog.subsystem +
                        "' does not match the traces' '" + traces[0].subsystem + "'");

    std::vector<RateMatrix> passes;
    for (const ActivityTrace& t : traces) {
        if (o.max_cv >= 0.0) {
            const ActivityTrace checked = stability_filter(t, o.max_cv);
            if (!checked.stable) {
                std::cerr << "note: pass " << t.pass_id << " excluded, power cv "
                          << format_double(power_cv(t)) << " above " << format_double(o.max_cv)
                          << "\n";
                continue;
            }
        }
        passes.push_back(normalize(t));
    }
    if (passes.empty())
        throw DataError("every pass failed the stability screen");

    CharacterizationReport report;
    report.subsystem = traces[0].subsystem;
    report.frequency_hz = traces[0].frequency_hz;
    report.alpha = o.alpha;
    report.ranking = correlate_events(passes, o.alpha);
    if (o.selector == "pmu-aware") {
        report.selected = select_pmu_aware(report.ranking, catalog, o.limit);
    } else if (o.selector == "top") {
        report.selected = select_top(report.ranking, catalog, o.limit);
    } else {
        throw DataError("unknown selector '" + o.selector + "' (pmu-aware or top)");
    }
    save_report(report, o.out_path);

    std::vector<std::string> inputs = {o.catalog_path,
                                       (fs::path(o.traces_dir) / "meta.json").string()};
    for (const ActivityTrace& t : traces)
        inputs.push_back(
            (fs::path(o.traces_dir) / ("pass_" + std::to_string(t.pass_id) + ".csv")).string());
    nlohmann::json config;
    config["traces"] = o.traces_dir;
    config["catalog"] = o.catalog_path;
    config["alpha"] = o.alpha;
    config["limit"] = o.limit;
    config["selector"] = o.selector;
    if (o.max_cv >= 0.0)
        config["max_cv"] = o.max_cv;
    write_manifest(fs::path(o.out_path).parent_path(), "characterize", config, inputs,
                   {fs::path(o.out_path).filename().string()});

    std::cout << "characterize: " << report.ranking.size() << " significant events, selected "
              << report.selected.size() << " of limit " << o.limit << "\n";
    return 0;
}

// Passes that track every selected event, normalized and stacked.  Passes
// tracking only part of the set cannot feed the weight-tied design matrix.
RateMatrix usable_rows(const std::vector<ActivityTrace>& traces,
                       const std::vector<std::string>& selected) {
    std::vector<RateMatrix> usable;
    for (const ActivityTrace& t : traces) {
        bool has_all = true;
        for (const std::string& name : selected) {
            if (std::find(t.events.begin(), t.events.end(), name) == t.events.end()) {
                has_all = false;
                break;
            }
        }
        if (has_all)
            usable.push_back(project_events(normalize(t), selected));
    }
    if (usable.empty())
        throw DataError("no pass tracks every selected event");
    return stack(usable);
}

struct TrainOpts {
    std::string traces_dir;
    std::string report_path;
    std::string out_path;
    double train_fraction = 0.7;
    std::uint64_t seed = 42;
};

int run_train(const TrainOpts& o) {
    const std::vector<ActivityTrace> traces = ingest_pass_dir(o.traces_dir);
    const CharacterizationReport report = load_report(o.report_path);
    if (report.selected.empty())
        throw DataError("report has an empty selection");
    if (report.subsystem != traces[0].subsystem)
        throw DataError("report subsystem does not match the traces");

    const RateMatrix all = usable_rows(traces, report.selected);
    const auto [train, holdout] = split_dataset(all, o.train_fraction, o.seed);
    ModelEntry entry =
        train_entry(train, report.selected, traces[0].subsystem, traces[0].frequency_hz);
    const ValidationReport val = validate_entry(entry, holdout);
    entry.validation_mape = val.mape;
    save_model(entry, o.out_path);

    std::vector<std::string> inputs = {o.report_path,
                                       (fs::path(o.traces_dir) / "meta.json").string()};
    for (const ActivityTrace& t : traces)
        inputs.push_back(
            (fs::path(o.traces_dir) / ("pass_" + std::to_string(t.pass_id) + ".csv")).string());
    nlohmann::json config;
    config["traces"] = o.traces_dir;
    config["report"] = o.report_path;
    config["train_fraction"] = o.train_fraction;
    config["seed"] = o.seed;
    write_manifest(fs::path(o.out_path).parent_path(), "train", config, inputs,
                   {fs::path(o.out_path).filename().string()});

    std::cout << "train: " << entry.selected.size() << " events on " << entry.n_train
              << " rows, intercept " << format_double(entry.intercept_mw)
              << " mW, holdout mape " << format_double(val.mape) << "% (std "
              << format_double(val.mape_std) << "%), energy err "
              << format_double(val.energy_error_pct) << "%\n";
    return 0;
}

struct ValidateOpts {
    std::string model_path;
    std::string traces_dir;
    std::string out_path; // optional
};

int run_validate(const ValidateOpts& o) {
    const ModelEntry entry = load_model(o.model_path);
    const std::vector<ActivityTrace> traces = ingest_pass_dir(o.traces_dir);
    if (entry.subsystem != traces[0].subsystem)
        throw DataError("model subsystem does not match the traces");
    const RateMatrix all = usable_rows(traces, entry.selected);
    const ValidationReport val = validate_entry(entry, all);

    std::cout << "validate: mape " << format_double(val.mape) << "% (std "
              << format_double(val.mape_std) << "%), energy err "
              << format_double(val.energy_error_pct) << "%, " << val.n_samples << " rows ("
              << val.n_excluded << " zero-power excluded)\n";

    if (!o.out_path.empty()) {
        nlohmann::json j;
        j["mape"] = val.mape;
        j["mape_std"] = val.mape_std;
        j["energy_error_pct"] = val.energy_error_pct;
        j["n_samples"] = val.n_samples;
        j["n_excluded"] = val.n_excluded;
        io::atomic_write(o.out_path, j.dump(2) + "\n");

        std::vector<std::string> inputs = {o.model_path,
                                           (fs::path(o.traces_dir) / "meta.json").string()};
        for (const ActivityTrace& t : traces)
            inputs.push_back((fs::path(o.traces_dir) /
                              ("pass_" + std::to_string(t.pass_id) + ".csv"))
                                 .string());
        nlohmann::json config;
        config["model"] = o.model_path;
        config["traces"] = o.traces_dir;
        write_manifest(fs::path(o.out_path).parent_path(), "validate", config, inputs,
                       {fs::path(o.out_path).filename().string()});
    }
    return 0;
}

struct ComposeOpts {
    std::vector<std::string> model_paths;
    std::string out_path;
};

int run_compose(const ComposeOpts& o) {
    std::vector<ModelEntry> entries;
    entries.reserve(o.model_paths.size());
    for (const std::string& p : o.model_paths)
        entries.push_back(load_model(p));
    const PowerLut lut = compose_lut(std::move(entries));
    save_lut(lut, o.out_path);

    nlohmann::json config;
    config["models"] = o.model_paths;
    write_manifest(fs::path(o.out_path).parent_path(), "compose", config, o.model_paths,
                   {fs::path(o.out_path).filename().string()});
    std::cout << "compose: " << lut.entries.size() << " LUT entries\n";
    return 0;
}

struct ExportFxOpts {
    std::string lut_path;
    std::string out_path;
    int prescale_bits = kWeightPrescaleBits;
};

int run_export_fx(const ExportFxOpts& o) {
    const PowerLut lut = load_lut(o.lut_path);
    const FxLut fx = to_fixed_point(lut, o.prescale_bits);
    save_fx_lut(fx, o.out_path);

    nlohmann::json config;
    config["lut"] = o.lut_path;
    config["prescale_bits"] = o.prescale_bits;
    write_manifest(fs::path(o.out_path).parent_path(), "export-fx", config, {o.lut_path},
                   {fs::path(o.out_path).filename().string()});
    std::cout << "export-fx: " << fx.entries.size() << " entries at prescale "
              << o.prescale_bits << "\n";
    return 0;
}

struct SimulateOpts {
    std::string fx_lut_path;
    std::string lut_path;
    std::string sched_path;
    std::string freq_path;
    std::string subsystem;
    std::string out_path;
    std::size_t window = 10;
    int tick_threshold = 1;
    std::string mode = "both";
};

int run_simulate(const SimulateOpts& o) {
    MonitorConfig cfg;
    cfg.window_capacity = o.window;
    cfg.tick_threshold = o.tick_threshold;
    if (o.mode == "both") {
        cfg.eval_fx = true;
        cfg.eval_float = true;
    } else if (o.mode == "fixed") {
        cfg.eval_fx = true;
        cfg.eval_float = false;
    } else if (o.mode == "float") {
        cfg.eval_fx = false;
        cfg.eval_float = true;
    } else {
        throw DataError("unknown mode '" + o.mode + "' (both, fixed or float)");
    }
    if (cfg.eval_fx && o.fx_lut_path.empty())
        throw DataError("mode '" + o.mode + "' needs --lut-fx");
    if (cfg.eval_float && o.lut_path.empty())
        throw DataError("mode '" + o.mode + "' needs --lut");

    FxLut fx_lut;
    PowerLut float_lut;
    if (cfg.eval_fx)
        fx_lut = load_fx_lut(o.fx_lut_path);
    if (cfg.eval_float)
        float_lut = load_lut(o.lut_path);
    const SchedStream stream = load_sched_csv(o.sched_path);
    const std::vector<FreqChange> timeline = load_freq_csv(o.freq_path);

    const std::vector<EstimatePoint> estimates =
        online_estimate(cfg.eval_fx ? &fx_lut : nullptr,
                        cfg.eval_float ? &float_lut : nullptr, o.subsystem, timeline, stream,
                        cfg);

    std::string csv = "t_ns,subsystem,frequency_hz,power_mw_fx,power_mw_float,overflow_flag\n";
    for (const EstimatePoint& pt : estimates) {
        csv += std::to_string(pt.t_ns);
        csv += ',';
        csv += o.subsystem;
        csv += ',';
        csv += std::to_string(pt.frequency_hz);
        csv += ',';
        if (pt.power_fx)
            csv += format_double(to_double(*pt.power_fx));
        csv += ',';
        if (pt.power_float)
            csv += format_double(*pt.power_float);
        csv += ',';
        csv += pt.overflow ? '1' : '0';
        csv += '\n';
    }
    io::atomic_write(o.out_path, csv);

    std::vector<std::string> inputs = {o.sched_path, o.freq_path};
    if (cfg.eval_fx)
        inputs.push_back(o.fx_lut_path);
    if (cfg.eval_float)
        inputs.push_back(o.lut_path);
    nlohmann::json config;
    config["subsystem"] = o.subsystem;
    config["window"] = o.window;
    config["tick_threshold"] = o.tick_threshold;
    config["mode"] = o.mode;
    if (cfg.eval_fx)
        config["lut_fx"] = o.fx_lut_path;
    if (cfg.eval_float)
        config["lut"] = o.lut_path;
    config["sched"] = o.sched_path;
    config["freq"] = o.freq_path;
    write_manifest(fs::path(o.out_path).parent_path(), "simulate", config, inputs,
                   {fs::path(o.out_path).filename().string()});

    std::cout << "simulate: " << estimates.size() << " estimates for " << o.subsystem << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PMC-based DVFS power model toolchain"};
    app.set_version_flag("--version", std::string("pmcpower ") + kVersion);
    app.require_subcommand(1);

    SynthOpts synth_opts;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate characterization traces");
    synth_cmd->add_option("--spec", synth_opts.spec_path, "ground-truth spec JSON")
        ->required();
    synth_cmd->add_option("--out", synth_opts.out_dir, "output trace directory")->required();
    CLI::Option* seed_opt =
        synth_cmd->add_option("--seed", synth_opts.seed, "override the spec's noise seed");

    CharacterizeOpts char_opts;
    CLI::App* char_cmd = app.add_subcommand("characterize", "rank and select counters");
    char_cmd->add_option("--traces", char_opts.traces_dir, "trace directory")->required();
    char_cmd->add_option("--catalog", char_opts.catalog_path, "event catalog JSON")
        ->required();
    char_cmd->add_option("--alpha", char_opts.alpha, "slope significance threshold");
    char_cmd->add_option("--limit", char_opts.limit, "number of counters to select")
        ->required();
    char_cmd->add_option("--selector", char_opts.selector, "pmu-aware (default) or top");
    char_cmd->add_option("--max-cv", char_opts.max_cv,
                         "exclude passes whose power cv exceeds this");
    char_cmd->add_option("--out", char_opts.out_path, "report JSON path")->required();

    TrainOpts train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "fit a per-frequency model");
    train_cmd->add_option("--traces", train_opts.traces_dir, "trace directory")->required();
    train_cmd->add_option("--report", train_opts.report_path, "characterization report")
        ->required();
    train_cmd->add_option("--train-fraction", train_opts.train_fraction,
                          "share of rows used for fitting");
    train_cmd->add_option("--seed", train_opts.seed, "split shuffle seed");
    train_cmd->add_option("--out", train_opts.out_path, "model JSON path")->required();

    ValidateOpts val_opts;
    CLI::App* val_cmd = app.add_subcommand("validate", "score a model against traces");
    val_cmd->add_option("--model", val_opts.model_path, "model JSON")->required();
    val_cmd->add_option("--traces", val_opts.traces_dir, "trace directory")->required();
    val_cmd->add_option("--out", val_opts.out_path, "validation report JSON (optional)");

    ComposeOpts comp_opts;
    CLI::App* comp_cmd = app.add_subcommand("compose", "merge models into a DVFS LUT");
    comp_cmd->add_option("models", comp_opts.model_paths, "model JSON files")
        ->required()
        ->expected(-1);
    comp_cmd->add_option("--out", comp_opts.out_path, "LUT JSON path")->required();

    ExportFxOpts fx_opts;
    CLI::App* fx_cmd = app.add_subcommand("export-fx", "convert a LUT to Q34.29");
    fx_cmd->add_option("--lut", fx_opts.lut_path, "float LUT JSON")->required();
    fx_cmd->add_option("--prescale", fx_opts.prescale_bits, "weight prescale bits");
    fx_cmd->add_option("--out", fx_opts.out_path, "fixed-point LUT JSON path")->required();

    SimulateOpts sim_opts;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "replay a scheduler stream");
    sim_cmd->add_option("--lut-fx", sim_opts.fx_lut_path, "fixed-point LUT JSON");
    sim_cmd->add_option("--lut", sim_opts.lut_path, "float LUT JSON");
    sim_cmd->add_option("--sched", sim_opts.sched_path, "scheduler stream CSV")->required();
    sim_cmd->add_option("--freq", sim_opts.freq_path, "frequency timeline CSV")->required();
    sim_cmd->add_option("--subsystem", sim_opts.subsystem, "subsystem to estimate")
        ->required();
    sim_cmd->add_option("--window", sim_opts.window, "moving window capacity (samples)");
    sim_cmd->add_option("--tick-threshold", sim_opts.tick_threshold,
                        "ticks accumulated before a trigger");
    sim_cmd->add_option("--mode", sim_opts.mode, "both (default), fixed or float");
    sim_cmd->add_option("--out", sim_opts.out_path, "estimates CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // bad usage is a data problem, not an internal one
    }

    try {
        if (*synth_cmd) {
            synth_opts.seed_set = seed_opt->count() > 0;
            return run_synth(synth_opts);
        }
        if (*char_cmd)
            return run_characterize(char_opts);
        if (*train_cmd)
            return run_train(train_opts);
        if (*val_cmd)
            return run_validate(val_opts);
        if (*comp_cmd)
            return run_compose(comp_opts);
        if (*fx_cmd)
            return run_export_fx(fx_opts);
        if (*sim_cmd)
            return run_simulate(sim_opts);
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
