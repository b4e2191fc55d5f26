#include "pmcpower/trace.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <regex>
#include <set>
#include <string_view>
#include <tuple>

#include <json.hpp>

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
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw DataError("expected integer, got '" + std::string(field) + "' " + context);
    return value;
}

bool valid_event_name(std::string_view name) {
    if (name.empty())
        return false;
    for (char c : name) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' && c != '-')
            return false;
    }
    return true;
}

} // namespace

void ActivityTrace::validate() const {
    if (n_units < 1)
        throw DataError("trace has n_units=" + std::to_string(n_units));
    if (events.empty())
        throw DataError("trace has no event columns");
    std::set<std::string> seen(events.begin(), events.end());
    if (seen.size() != events.size())
        throw DataError("trace has duplicate event columns");

    const TraceRow* prev = nullptr;
    std::size_t k = 0;
    for (const TraceRow& row : rows) {
        ++k;
        const std::string at = " at row " + std::to_string(k);
        if (row.counts.size() != events.size())
            throw DataError("count/event column mismatch" + at);
        if (row.period_ns <= 0)
            throw DataError("non-positive period" + at);
        if (row.power_mw < 0)
            throw DataError("negative power" + at);
        if (row.unit < 0 || row.unit >= n_units)
            throw DataError("unit " + std::to_string(row.unit) + " out of range" + at);
        for (std::int64_t c : row.counts) {
            if (c < 0)
                throw DataError("negative count" + at);
        }
        if (prev) {
            if (row.t_ns < prev->t_ns || (row.t_ns == prev->t_ns && row.unit <= prev->unit))
                throw DataError("rows not strictly ordered by (t_ns, unit)" + at);
        }
        prev = &row;
    }
}

TraceMeta load_meta(const std::filesystem::path& json_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(json_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(json_path.string() + ": " + e.what());
    }
    TraceMeta meta;
    try {
        meta.subsystem = j.at("subsystem").get<std::string>();
        meta.frequency_hz = j.at("frequency_hz").get<std::int64_t>();
        meta.n_units = j.at("n_units").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(json_path.string() + ": " + e.what());
    }
    if (meta.n_units < 1)
        throw DataError(json_path.string() + ": n_units must be >= 1");
    if (meta.frequency_hz <= 0)
        throw DataError(json_path.string() + ": frequency_hz must be > 0");
    return meta;
}

void save_meta(const TraceMeta& meta, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["subsystem"] = meta.subsystem;
    j["frequency_hz"] = meta.frequency_hz;
    j["n_units"] = meta.n_units;
    io::atomic_write(json_path, j.dump(2) + "\n");
}

ActivityTrace ingest_trace(const std::filesystem::path& csv_path) {
    const std::string text = io::read_file(csv_path);
    ActivityTrace trace;

    std::vector<std::string_view> lines;
    {
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
    }
    if (lines.empty())
        throw DataError(csv_path.string() + ": empty file");

    const auto header = split(lines[0], ',');
    const char* expected[] = {"t_ns", "period_ns", "unit", "power_mw"};
    if (header.size() < 5)
        throw DataError(csv_path.string() + ": header needs at least one event column");
    for (std::size_t i = 0; i < 4; ++i) {
        if (header[i] != expected[i])
            throw DataError(csv_path.string() + ": header column " + std::to_string(i + 1) +
                            " must be '" + expected[i] + "'");
    }
    for (std::size_t i = 4; i < header.size(); ++i) {
        if (!valid_event_name(header[i]))
            throw DataError(csv_path.string() + ": bad event name '" + std::string(header[i]) +
                            "'");
        trace.events.emplace_back(header[i]);
    }

    int max_unit = 0;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty())
            throw DataError(csv_path.string() + ": blank line " + std::to_string(li + 1));
        const auto fields = split(lines[li], ',');
        const std::string ctx =
            "in " + csv_path.string() + " line " + std::to_string(li + 1);
        if (fields.size() != header.size())
            throw DataError("wrong field count " + ctx);
        TraceRow row;
        row.t_ns = parse_i64(fields[0], ctx);
        row.period_ns = parse_i64(fields[1], ctx);
        row.unit = static_cast<int>(parse_i64(fields[2], ctx));
        row.power_mw = parse_i64(fields[3], ctx);
        row.counts.reserve(trace.events.size());
        for (std::size_t i = 4; i < fields.size(); ++i)
            row.counts.push_back(parse_i64(fields[i], ctx));
        max_unit = std::max(max_unit, row.unit);
        trace.rows.push_back(std::move(row));
    }

    trace.n_units = max_unit + 1;
    std::stable_sort(trace.rows.begin(), trace.rows.end(),
                     [](const TraceRow& a, const TraceRow& b) {
                         return std::tie(a.t_ns, a.unit) < std::tie(b.t_ns, b.unit);
                     });
    for (std::size_t i = 1; i < trace.rows.size(); ++i) {
        if (trace.rows[i].t_ns == trace.rows[i - 1].t_ns &&
            trace.rows[i].unit == trace.rows[i - 1].unit)
            throw DataError(csv_path.string() + ": duplicate sample for unit " +
                            std::to_string(trace.rows[i].unit) + " at t=" +
                            std::to_string(trace.rows[i].t_ns));
    }
    trace.validate();
    return trace;
}

ActivityTrace ingest_trace(const std::filesystem::path& csv_path, const TraceMeta& meta,
                           int pass_id) {
    ActivityTrace trace = ingest_trace(csv_path);
    if (trace.n_units > meta.n_units)
        throw DataError(csv_path.string() + ": unit index exceeds n_units=" +
                        std::to_string(meta.n_units));
    trace.subsystem = meta.subsystem;
    trace.frequency_hz = meta.frequency_hz;
    trace.n_units = meta.n_units;
    trace.pass_id = pass_id;
    trace.validate();
    return trace;
}

std::vector<ActivityTrace> ingest_pass_dir(const std::filesystem::path& dir) {
    const TraceMeta meta = load_meta(dir / "meta.json");
    static const std::regex pass_re("pass_([0-9]+)\\.csv");
    std::map<int, std::filesystem::path> passes;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, pass_re))
            passes[std::stoi(m[1].str())] = entry.path();
    }
    if (passes.empty())
        throw DataError("no pass_<k>.csv files under " + dir.string());
    std::vector<ActivityTrace> out;
    out.reserve(passes.size());
    for (const auto& [pass_id, path] : passes)
        out.push_back(ingest_trace(path, meta, pass_id));
    return out;
}

void write_trace_csv(const ActivityTrace& trace, const std::filesystem::path& csv_path) {
    trace.validate();
    std::string out = "t_ns,period_ns,unit,power_mw";
    for (const std::string& e : trace.events) {
        out += ',';
        out += e;
    }
    out += '\n';
    for (const TraceRow& row : trace.rows) {
        out += std::to_string(row.t_ns);
        out += ',';
        out += std::to_string(row.period_ns);
        out += ',';
        out += std::to_string(row.unit);
        out += ',';
        out += std::to_string(row.power_mw);
        for (std::int64_t c : row.counts) {
            out += ',';
            out += std::to_string(c);
        }
        out += '\n';
    }
    io::atomic_write(csv_path, out);
}

RateMatrix normalize(const ActivityTrace& trace) {
    trace.validate();
    RateMatrix m;
    m.subsystem = trace.subsystem;
    m.frequency_hz = trace.frequency_hz;
    m.pass_id = trace.pass_id;
    m.n_units = trace.n_units;
    for (int u = 0; u < trace.n_units; ++u)
        for (const std::string& e : trace.events)
            m.columns.emplace_back(u, e);

    const std::size_t n_units = static_cast<std::size_t>(trace.n_units);
    if (trace.rows.size() % n_units != 0)
        throw DataError("trace rows do not tile into groups of " + std::to_string(n_units) +
                        " units");
    const std::size_t n_rows = trace.rows.size() / n_units;
    m.rates.resize(n_rows * m.columns.size());
    for (std::size_t g = 0; g < n_rows; ++g) {
        const TraceRow& first = trace.rows[g * n_units];
        double power_sum = 0.0;
        for (std::size_t u = 0; u < n_units; ++u) {
            const TraceRow& row = trace.rows[g * n_units + u];
            if (row.t_ns != first.t_ns || row.unit != static_cast<int>(u))
                throw DataError("incomplete unit set at t=" + std::to_string(first.t_ns));
            if (row.period_ns != first.period_ns)
                throw DataError("mismatched period at t=" + std::to_string(first.t_ns));
            power_sum += static_cast<double>(row.power_mw);
            for (std::size_t j = 0; j < row.counts.size(); ++j) {
                m.rates[g * m.columns.size() + u * trace.events.size() + j] =
                    static_cast<double>(row.counts[j]) * 1e9 /
                    static_cast<double>(row.period_ns);
            }
        }
        m.t_ns.push_back(first.t_ns);
        m.period_ns.push_back(first.period_ns);
        m.power_mw.push_back(power_sum / static_cast<double>(n_units));
    }
    return m;
}

double power_cv(const ActivityTrace& trace) {
    trace.validate();
    // One power value per timestamp (mean across the unit copies).
    std::map<std::int64_t, std::pair<double, int>> by_t;
    for (const TraceRow& row : trace.rows) {
        auto& [sum, n] = by_t[row.t_ns];
        sum += static_cast<double>(row.power_mw);
        n += 1;
    }
    if (by_t.size() < 2)
        throw DataError("power_cv needs at least 2 timestamps, got " +
                        std::to_string(by_t.size()));
    std::vector<double> p;
    p.reserve(by_t.size());
    for (const auto& [t, acc] : by_t)
        p.push_back(acc.first / acc.second);
    double mean = 0.0;
    for (double v : p)
        mean += v;
    mean /= static_cast<double>(p.size());
    double var = 0.0;
    for (double v : p)
        var += (v - mean) * (v - mean);
    var /= static_cast<double>(p.size()); // population variance
    const double sd = std::sqrt(var);
    if (mean == 0.0)
        return sd == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return sd / mean;
}

ActivityTrace stability_filter(const ActivityTrace& trace, double max_cv) {
    ActivityTrace out = trace;
    out.stable = power_cv(trace) <= max_cv;
    return out;
}

RateMatrix project_events(const RateMatrix& m, const std::vector<std::string>& events) {
    RateMatrix out;
    out.subsystem = m.subsystem;
    out.frequency_hz = m.frequency_hz;
    out.pass_id = m.pass_id;
    out.n_units = m.n_units;
    out.t_ns = m.t_ns;
    out.period_ns = m.period_ns;
    out.power_mw = m.power_mw;

    std::vector<std::size_t> src_cols;
    for (int u = 0; u < m.n_units; ++u) {
        for (const std::string& e : events) {
            const auto it =
                std::find(m.columns.begin(), m.columns.end(), std::make_pair(u, e));
            if (it == m.columns.end())
                throw DataError("project_events: no column for event '" + e + "' unit " +
                                std::to_string(u));
            src_cols.push_back(static_cast<std::size_t>(it - m.columns.begin()));
            out.columns.emplace_back(u, e);
        }
    }
    out.rates.reserve(m.n_rows() * src_cols.size());
    for (std::size_t r = 0; r < m.n_rows(); ++r)
        for (std::size_t c : src_cols)
            out.rates.push_back(m.at(r, c));
    return out;
}

RateMatrix stack(const std::vector<RateMatrix>& parts) {
    if (parts.empty())
        throw DataError("stack() needs at least one matrix");
    RateMatrix out = parts[0];
    out.pass_id = -1;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const RateMatrix& p = parts[i];
        if (p.subsystem != out.subsystem || p.frequency_hz != out.frequency_hz ||
            p.n_units != out.n_units || p.columns != out.columns)
            throw DataError("stack() layout mismatch between parts");
        out.t_ns.insert(out.t_ns.end(), p.t_ns.begin(), p.t_ns.end());
        out.period_ns.insert(out.period_ns.end(), p.period_ns.begin(), p.period_ns.end());
        out.power_mw.insert(out.power_mw.end(), p.power_mw.begin(), p.power_mw.end());
        out.rates.insert(out.rates.end(), p.rates.begin(), p.rates.end());
    }
    return out;
}

} // namespace pmcpower
