#include "pmcpower/monitor.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <map>
#include <memory>
#include <string_view>

#include "pmcpower/error.hpp"
#include "pmcpower/io_util.hpp"

namespace pmcpower {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::int64_t parse_i64(std::string_view field, const std::string& context) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw DataError("expected integer, got '" + std::string(field) + "' " + context);
    return value;
}

std::vector<std::string_view> read_lines(const std::string& text) {
    std::vector<std::string_view> lines;
    std::string_view rest = text;
    while (!rest.empty()) {
        std::size_t pos = rest.find('\n');
        std::string_view line = rest.substr(0, pos);
        if (line.ends_with('\r'))
            line.remove_suffix(1);
        lines.push_back(line);
        if (pos == std::string_view::npos)
            break;
        rest.remove_prefix(pos + 1);
    }
    while (!lines.empty() && lines.back().empty())
        lines.pop_back();
    return lines;
}

bool valid_name(std::string_view name) {
    if (name.empty())
        return false;
    for (char c : name) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' && c != '-')
            return false;
    }
    return true;
}

void validate_stream(const SchedStream& stream) {
    if (stream.n_cores < 1)
        throw DataError("sched stream: n_cores must be >= 1");
    if (stream.events.empty())
        throw DataError("sched stream: no counter columns");
    std::vector<std::int64_t> last_t(static_cast<std::size_t>(stream.n_cores), 0);
    std::int64_t prev_t = 0;
    std::size_t k = 0;
    for (const SchedEvent& e : stream.rows) {
        ++k;
        const std::string at = " at row " + std::to_string(k);
        if (e.t_ns <= 0)
            throw DataError("sched stream: non-positive timestamp" + at);
        if (e.t_ns < prev_t)
            throw DataError("sched stream: rows not time-ordered" + at);
        prev_t = e.t_ns;
        if (e.core < 0 || e.core >= stream.n_cores)
            throw DataError("sched stream: core out of range" + at);
        auto& lt = last_t[static_cast<std::size_t>(e.core)];
        if (e.t_ns <= lt)
            throw DataError("sched stream: timestamps not strictly increasing on core " +
                            std::to_string(e.core) + at);
        lt = e.t_ns;
        if (e.deltas.size() != stream.events.size())
            throw DataError("sched stream: delta width mismatch" + at);
        for (std::int64_t d : e.deltas) {
            if (d < 0)
                throw DataError("sched stream: counter went backwards" + at);
        }
    }
}

} // namespace

SchedStream load_sched_csv(const std::filesystem::path& csv_path) {
    const std::string text = io::read_file(csv_path);
    const auto lines = read_lines(text);
    if (lines.empty())
        throw DataError(csv_path.string() + ": empty file");

    const auto header = split(lines[0], ',');
    if (header.size() < 4 || header[0] != "t_ns" || header[1] != "core" || header[2] != "kind")
        throw DataError(csv_path.string() +
                        ": header must be t_ns,core,kind,<event>... with at least one event");
    SchedStream stream;
    for (std::size_t i = 3; i < header.size(); ++i) {
        if (!valid_name(header[i]))
            throw DataError(csv_path.string() + ": bad event name '" + std::string(header[i]) +
                            "'");
        stream.events.emplace_back(header[i]);
    }

    int max_core = 0;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::string ctx = "in " + csv_path.string() + " line " + std::to_string(li + 1);
        const auto fields = split(lines[li], ',');
        if (fields.size() != header.size())
            throw DataError("wrong field count " + ctx);
        SchedEvent e;
        e.t_ns = parse_i64(fields[0], ctx);
        e.core = static_cast<int>(parse_i64(fields[1], ctx));
        if (fields[2] == "context_switch") {
            e.kind = SchedEventKind::context_switch;
        } else if (fields[2] == "tick") {
            e.kind = SchedEventKind::tick;
        } else {
            throw DataError("unknown kind '" + std::string(fields[2]) + "' " + ctx);
        }
        for (std::size_t i = 3; i < fields.size(); ++i)
            e.deltas.push_back(parse_i64(fields[i], ctx));
        max_core = std::max(max_core, e.core);
        stream.rows.push_back(std::move(e));
    }
    stream.n_cores = max_core + 1;
    validate_stream(stream);
    return stream;
}

void save_sched_csv(const SchedStream& stream, const std::filesystem::path& csv_path) {
    validate_stream(stream);
    std::string out = "t_ns,core,kind";
    for (const std::string& e : stream.events) {
        out += ',';
        out += e;
    }
    out += '\n';
    for (const SchedEvent& e : stream.rows) {
        out += std::to_string(e.t_ns);
        out += ',';
        out += std::to_string(e.core);
        out += e.kind == SchedEventKind::context_switch ? ",context_switch" : ",tick";
        for (std::int64_t d : e.deltas) {
            out += ',';
            out += std::to_string(d);
        }
        out += '\n';
    }
    io::atomic_write(csv_path, out);
}

std::vector<RawSample> trigger_stream(const SchedStream& stream, int tick_threshold) {
    if (tick_threshold < 1)
        throw DataError("trigger_stream: tick_threshold must be >= 1");
    validate_stream(stream);

    struct CoreState {
        std::int64_t last_t = 0;
        std::int64_t pending_ns = 0;
        int ticks = 0;
        std::vector<std::int64_t> pending;
    };
    std::vector<CoreState> state(static_cast<std::size_t>(stream.n_cores));
    for (CoreState& s : state)
        s.pending.assign(stream.events.size(), 0);

    std::vector<RawSample> out;
    for (const SchedEvent& e : stream.rows) {
        CoreState& s = state[static_cast<std::size_t>(e.core)];
        s.pending_ns += e.t_ns - s.last_t;
        s.last_t = e.t_ns;
        for (std::size_t j = 0; j < e.deltas.size(); ++j)
            s.pending[j] += e.deltas[j];

        bool fire = false;
        if (e.kind == SchedEventKind::context_switch) {
            fire = true;
        } else if (++s.ticks >= tick_threshold) {
            fire = true;
        }
        if (!fire)
            continue;
        RawSample sample;
        sample.t_ns = e.t_ns;
        sample.core = e.core;
        sample.duration_ns = s.pending_ns;
        sample.deltas = s.pending;
        out.push_back(std::move(sample));
        s.pending_ns = 0;
        s.ticks = 0;
        std::fill(s.pending.begin(), s.pending.end(), 0);
    }
    return out;
}

MovingWindow::MovingWindow(std::size_t capacity, std::size_t n_events)
    : capacity_(capacity), n_events_(n_events) {
    if (capacity_ < 1)
        throw DataError("MovingWindow: capacity must be >= 1");
    ring_.assign(capacity_ * (1 + n_events_), 0);
    count_sums_.assign(n_events_, 0);
}

// The seqlock gives readers a consistent view against the single writer:
// they retry while the version is odd or moved.  The data words themselves
// are plain int64 (standard seqlock trade-off for a wait-free writer).
MovingWindow::Totals MovingWindow::push(std::int64_t duration_ns,
                                        std::span<const std::int64_t> deltas) {
    if (duration_ns < 0)
        throw DataError("MovingWindow::push: negative duration");
    if (deltas.size() != n_events_)
        throw DataError("MovingWindow::push: expected " + std::to_string(n_events_) +
                        " counters, got " + std::to_string(deltas.size()));
    for (std::int64_t d : deltas) {
        if (d < 0)
            throw DataError("MovingWindow::push: negative count");
    }

    version_.fetch_add(1, std::memory_order_acq_rel); // odd: write in progress
    const std::size_t stride = 1 + n_events_;
    std::int64_t* slot = ring_.data() + head_ * stride;
    if (size_ == capacity_) {
        duration_sum_ -= slot[0];
        for (std::size_t j = 0; j < n_events_; ++j)
            count_sums_[j] -= slot[1 + j];
        --size_;
    }
    slot[0] = duration_ns;
    duration_sum_ += duration_ns;
    for (std::size_t j = 0; j < n_events_; ++j) {
        slot[1 + j] = deltas[j];
        count_sums_[j] += deltas[j];
    }
    head_ = (head_ + 1) % capacity_;
    ++size_;

    Totals totals{duration_sum_, count_sums_, size_};
    version_.fetch_add(1, std::memory_order_release); // even again
    return totals;
}

MovingWindow::Totals MovingWindow::totals() const {
    for (;;) {
        const std::uint64_t v1 = version_.load(std::memory_order_acquire);
        if (v1 & 1)
            continue; // writer inside
        Totals t{duration_sum_, count_sums_, size_};
        std::atomic_thread_fence(std::memory_order_acquire);
        const std::uint64_t v2 = version_.load(std::memory_order_relaxed);
        if (v1 == v2)
            return t;
    }
}

void MovingWindow::reset() {
    version_.fetch_add(1, std::memory_order_acq_rel);
    std::fill(ring_.begin(), ring_.end(), 0);
    std::fill(count_sums_.begin(), count_sums_.end(), 0);
    duration_sum_ = 0;
    head_ = 0;
    size_ = 0;
    version_.fetch_add(1, std::memory_order_release);
}

std::vector<FreqChange> load_freq_csv(const std::filesystem::path& csv_path) {
    const std::string text = io::read_file(csv_path);
    const auto lines = read_lines(text);
    if (lines.empty())
        throw DataError(csv_path.string() + ": empty file");
    if (split(lines[0], ',') !=
        std::vector<std::string_view>{"t_ns", "subsystem", "frequency_hz"})
        throw DataError(csv_path.string() + ": header must be t_ns,subsystem,frequency_hz");

    std::vector<FreqChange> out;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::string ctx = "in " + csv_path.string() + " line " + std::to_string(li + 1);
        const auto fields = split(lines[li], ',');
        if (fields.size() != 3)
            throw DataError("wrong field count " + ctx);
        FreqChange c;
        c.t_ns = parse_i64(fields[0], ctx);
        if (!valid_name(fields[1]))
            throw DataError("bad subsystem name '" + std::string(fields[1]) + "' " + ctx);
        c.subsystem = std::string(fields[1]);
        c.frequency_hz = parse_i64(fields[2], ctx);
        if (c.t_ns < 0)
            throw DataError("negative timestamp " + ctx);
        if (c.frequency_hz <= 0)
            throw DataError("non-positive frequency " + ctx);
        if (!out.empty() && c.t_ns < out.back().t_ns)
            throw DataError("timeline not time-ordered " + ctx);
        out.push_back(std::move(c));
    }
    return out;
}

void save_freq_csv(std::span<const FreqChange> timeline,
                   const std::filesystem::path& csv_path) {
    std::string out = "t_ns,subsystem,frequency_hz\n";
    for (const FreqChange& c : timeline) {
        out += std::to_string(c.t_ns);
        out += ',';
        out += c.subsystem;
        out += ',';
        out += std::to_string(c.frequency_hz);
        out += '\n';
    }
    io::atomic_write(csv_path, out);
}

std::vector<EstimatePoint> online_estimate(const FxLut* fx_lut, const PowerLut* float_lut,
                                           const std::string& subsystem,
                                           std::span<const FreqChange> timeline,
                                           const SchedStream& stream,
                                           const MonitorConfig& cfg) {
    const bool want_fx = cfg.eval_fx;
    const bool want_float = cfg.eval_float;
    if (!want_fx && !want_float)
        throw DataError("online_estimate: both evaluation paths disabled");
    if (want_fx && !fx_lut)
        throw DataError("online_estimate: fixed-point path enabled without a LUT");
    if (want_float && !float_lut)
        throw DataError("online_estimate: float path enabled without a LUT");
    if (cfg.window_capacity < 1)
        throw DataError("online_estimate: window capacity must be >= 1");

    std::vector<FreqChange> changes;
    for (const FreqChange& c : timeline) {
        if (c.subsystem != subsystem)
            continue;
        if (!changes.empty()) {
            if (c.t_ns < changes.back().t_ns)
                throw DataError("online_estimate: timeline not time-ordered");
            if (c.t_ns == changes.back().t_ns)
                throw DataError("online_estimate: duplicate frequency change at t=" +
                                std::to_string(c.t_ns));
        }
        changes.push_back(c);
    }
    if (changes.empty())
        throw DataError("online_estimate: no frequency changes for subsystem '" + subsystem +
                        "'");

    const std::vector<RawSample> samples = trigger_stream(stream, cfg.tick_threshold);

    const FxModelEntry* fx_entry = nullptr;
    const ModelEntry* float_entry = nullptr;
    std::int64_t current_freq = 0;
    std::vector<std::size_t> sel_idx; // selected event -> stream column
    std::vector<std::unique_ptr<MovingWindow>> windows;

    const auto apply_change = [&](const FreqChange& c) {
        if (want_fx) {
            fx_entry = fx_lut->find(subsystem, c.frequency_hz);
            if (!fx_entry)
                throw DataError("online_estimate: no fixed-point entry for (" + subsystem +
                                ", " + std::to_string(c.frequency_hz) + " Hz)");
        }
        if (want_float) {
            float_entry = float_lut->find(subsystem, c.frequency_hz);
            if (!float_entry)
                throw DataError("online_estimate: no LUT entry for (" + subsystem + ", " +
                                std::to_string(c.frequency_hz) + " Hz)");
        }
        if (fx_entry && float_entry && fx_entry->selected != float_entry->selected)
            throw DataError("online_estimate: fixed and float entries track different events");
        const std::vector<std::string>& selected =
            fx_entry ? fx_entry->selected : float_entry->selected;
        sel_idx.clear();
        for (const std::string& name : selected) {
            const auto it = std::find(stream.events.begin(), stream.events.end(), name);
            if (it == stream.events.end())
                throw DataError("online_estimate: tracked set mismatch: model event '" + name +
                                "' is not in the stream");
            sel_idx.push_back(static_cast<std::size_t>(it - stream.events.begin()));
        }
        current_freq = c.frequency_hz;
        // A frequency switch invalidates accumulated history: the old samples
        // were produced under a different power profile.
        windows.clear();
        for (int core = 0; core < stream.n_cores; ++core)
            windows.push_back(
                std::make_unique<MovingWindow>(cfg.window_capacity, selected.size()));
    };

    std::vector<EstimatePoint> out;
    out.reserve(samples.size());
    std::size_t next_change = 0;
    std::vector<std::int64_t> picked;
    for (const RawSample& s : samples) {
        while (next_change < changes.size() && changes[next_change].t_ns <= s.t_ns)
            apply_change(changes[next_change++]);
        if (current_freq == 0)
            throw DataError("online_estimate: sample at t=" + std::to_string(s.t_ns) +
                            " precedes the first frequency change");

        picked.resize(sel_idx.size());
        for (std::size_t j = 0; j < sel_idx.size(); ++j)
            picked[j] = s.deltas[sel_idx[j]];
        windows[static_cast<std::size_t>(s.core)]->push(s.duration_ns, picked);

        EstimatePoint pt;
        pt.t_ns = s.t_ns;
        pt.frequency_hz = current_freq;
        if (want_fx) {
            bool ovf = false;
            Fx sum{0};
            for (const auto& w : windows) {
                const MovingWindow::Totals tot = w->totals();
                if (tot.size == 0 || tot.duration_ns <= 0)
                    continue;
                sum = fx_add_sat(sum, fx_dyn(*fx_entry, tot.counts, tot.duration_ns, ovf),
                                 ovf);
            }
            pt.power_fx = fx_add_sat(sum, fx_entry->intercept, ovf);
            pt.overflow = ovf;
        }
        if (want_float) {
            double p = float_entry->intercept_mw;
            for (const auto& w : windows) {
                const MovingWindow::Totals tot = w->totals();
                if (tot.size == 0 || tot.duration_ns <= 0)
                    continue;
                for (std::size_t j = 0; j < float_entry->weights.size(); ++j) {
                    const double rate = static_cast<double>(tot.counts[j]) * 1e9 /
                                        static_cast<double>(tot.duration_ns);
                    p += rate * float_entry->weights[j];
                }
            }
            pt.power_float = p;
        }
        out.push_back(std::move(pt));
    }
    return out;
}

} // namespace pmcpower
