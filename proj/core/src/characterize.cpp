#include "pmcpower/characterize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "pmcpower/error.hpp"
#include "pmcpower/io_util.hpp"

namespace pmcpower {

bool ConflictGroupOracle::feasible(std::span<const std::string> events) const {
    std::set<std::string> used;
    for (const std::string& e : events) {
        const auto it = groups_by_event_.find(e);
        if (it == groups_by_event_.end())
            continue;
        for (const std::string& g : it->second) {
            if (!used.insert(g).second)
                return false;
        }
    }
    return true;
}

const CatalogEvent* EventCatalog::find(const std::string& name) const {
    for (const CatalogEvent& e : events) {
        if (e.name == name)
            return &e;
    }
    return nullptr;
}

bool EventCatalog::feasible(std::span<const std::string> names) const {
    if (names.size() > static_cast<std::size_t>(pmu_limit))
        return false;
    if (compat)
        return compat->feasible(names);
    std::map<std::string, std::vector<std::string>> groups;
    for (const CatalogEvent& e : events)
        groups[e.name] = e.conflict_groups;
    return ConflictGroupOracle(std::move(groups)).feasible(names);
}

EventCatalog load_catalog(const std::filesystem::path& json_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(json_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(json_path.string() + ": " + e.what());
    }
    EventCatalog cat;
    try {
        cat.subsystem = j.at("subsystem").get<std::string>();
        cat.pmu_limit = j.at("pmu_limit").get<int>();
        for (const auto& je : j.at("events")) {
            CatalogEvent e;
            e.name = je.at("name").get<std::string>();
            if (je.contains("conflict_groups"))
                e.conflict_groups = je.at("conflict_groups").get<std::vector<std::string>>();
            if (je.contains("fixed"))
                e.fixed = je.at("fixed").get<bool>();
            cat.events.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(json_path.string() + ": " + e.what());
    }
    if (cat.pmu_limit < 1)
        throw DataError(json_path.string() + ": pmu_limit must be >= 1");
    std::set<std::string> names;
    for (const CatalogEvent& e : cat.events) {
        if (!names.insert(e.name).second)
            throw DataError(json_path.string() + ": duplicate event '" + e.name + "'");
    }
    return cat;
}

void save_catalog(const EventCatalog& catalog, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["subsystem"] = catalog.subsystem;
    j["pmu_limit"] = catalog.pmu_limit;
    j["events"] = nlohmann::json::array();
    for (const CatalogEvent& e : catalog.events) {
        nlohmann::json je;
        je["name"] = e.name;
        je["conflict_groups"] = e.conflict_groups;
        je["fixed"] = e.fixed;
        j["events"].push_back(std::move(je));
    }
    io::atomic_write(json_path, j.dump(2) + "\n");
}

std::vector<RankedEvent> correlate_events(const std::vector<RateMatrix>& passes,
                                          double alpha) {
    if (passes.empty())
        throw DataError("correlate_events: no passes");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw DataError("correlate_events: alpha must be in (0, 1]");

    std::vector<RankedEvent> kept;
    std::set<std::string> seen;
    for (const RateMatrix& m : passes) {
        if (m.n_rows() < 3)
            throw DataError("correlate_events: pass " + std::to_string(m.pass_id) +
                            " has fewer than 3 samples");
        // Distinct event names of this pass, in column order.
        std::vector<std::string> names;
        for (const auto& [unit, name] : m.columns) {
            if (std::find(names.begin(), names.end(), name) == names.end())
                names.push_back(name);
        }
        for (const std::string& name : names) {
            if (!seen.insert(name).second)
                throw DataError("correlate_events: event '" + name +
                                "' appears in more than one pass");
            // Event activity of the whole subsystem: rates summed over units.
            std::vector<double> x(m.n_rows(), 0.0);
            for (std::size_t c = 0; c < m.n_cols(); ++c) {
                if (m.columns[c].second != name)
                    continue;
                for (std::size_t r = 0; r < m.n_rows(); ++r)
                    x[r] += m.at(r, c);
            }
            bool constant = true;
            for (std::size_t r = 1; r < x.size(); ++r) {
                if (x[r] != x[0]) {
                    constant = false;
                    break;
                }
            }
            if (constant)
                continue; // no information in a flat counter
            const SimpleFit fit = simple_lls(x, m.power_mw);
            if (fit.p_value > alpha)
                continue;
            kept.push_back(RankedEvent{name, fit});
        }
    }
    std::sort(kept.begin(), kept.end(), [](const RankedEvent& a, const RankedEvent& b) {
        const double pa = std::fabs(a.fit.pcc);
        const double pb = std::fabs(b.fit.pcc);
        if (pa != pb)
            return pa > pb;
        return a.name < b.name;
    });
    return kept;
}

std::vector<std::string> select_top(std::span<const RankedEvent> ranking, std::size_t limit) {
    std::vector<std::string> out;
    for (const RankedEvent& r : ranking) {
        if (out.size() == limit)
            break;
        out.push_back(r.name);
    }
    return out;
}

namespace {

// Operator-pinned events, in catalog order; they lead every selection.
std::vector<std::string> fixed_head(const EventCatalog& catalog, std::size_t limit) {
    std::vector<std::string> head;
    for (const CatalogEvent& e : catalog.events) {
        if (e.fixed)
            head.push_back(e.name);
    }
    if (head.size() > limit)
        throw DataError("catalog pins " + std::to_string(head.size()) +
                        " fixed events, more than the selection limit " +
                        std::to_string(limit));
    return head;
}

} // namespace

std::vector<std::string> select_top(std::span<const RankedEvent> ranking,
                                    const EventCatalog& catalog, std::size_t limit) {
    std::vector<std::string> out = fixed_head(catalog, limit);
    for (const RankedEvent& r : ranking) {
        if (out.size() == limit)
            break;
        if (std::find(out.begin(), out.end(), r.name) != out.end())
            continue;
        if (!catalog.find(r.name))
            throw DataError("ranked event '" + r.name + "' is not in the catalog");
        out.push_back(r.name);
    }
    return out;
}

std::vector<std::string> select_pmu_aware(std::span<const RankedEvent> ranking,
                                          const EventCatalog& catalog, std::size_t limit) {
    std::vector<std::string> out = fixed_head(catalog, limit);
    if (!catalog.feasible(out))
        throw DataError("the fixed events alone are not simultaneously schedulable");
    for (const RankedEvent& r : ranking) {
        if (out.size() == limit)
            break;
        if (std::find(out.begin(), out.end(), r.name) != out.end())
            continue;
        if (!catalog.find(r.name))
            throw DataError("ranked event '" + r.name + "' is not in the catalog");
        out.push_back(r.name);
        if (!catalog.feasible(out))
            out.pop_back(); // conflicts with the kept set; skip it
    }
    return out;
}

void save_report(const CharacterizationReport& report, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["subsystem"] = report.subsystem;
    j["frequency_hz"] = report.frequency_hz;
    j["alpha"] = report.alpha;
    j["ranking"] = nlohmann::json::array();
    for (const RankedEvent& r : report.ranking) {
        nlohmann::json jr;
        jr["name"] = r.name;
        jr["slope"] = r.fit.slope;
        jr["intercept"] = r.fit.intercept;
        jr["pcc"] = r.fit.pcc;
        jr["p_value"] = r.fit.p_value;
        jr["n"] = r.fit.n;
        j["ranking"].push_back(std::move(jr));
    }
    j["selected"] = report.selected;
    io::atomic_write(json_path, j.dump(2) + "\n");
}

CharacterizationReport load_report(const std::filesystem::path& json_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(json_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(json_path.string() + ": " + e.what());
    }
    CharacterizationReport report;
    try {
        report.subsystem = j.at("subsystem").get<std::string>();
        report.frequency_hz = j.at("frequency_hz").get<std::int64_t>();
        report.alpha = j.at("alpha").get<double>();
        for (const auto& jr : j.at("ranking")) {
            RankedEvent r;
            r.name = jr.at("name").get<std::string>();
            r.fit.slope = jr.at("slope").get<double>();
            r.fit.intercept = jr.at("intercept").get<double>();
            r.fit.pcc = jr.at("pcc").get<double>();
            r.fit.p_value = jr.at("p_value").get<double>();
            r.fit.n = jr.at("n").get<std::size_t>();
            report.ranking.push_back(std::move(r));
        }
        report.selected = j.at("selected").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(json_path.string() + ": " + e.what());
    }
    return report;
}

SweepResult sweep_counter_count(
    int k_min, int k_max,
    const std::function<std::vector<std::string>(int)>& select_for,
    const std::function<double(const std::vector<std::string>&)>& score,
    double tie_tol) {
    if (k_min < 1 || k_max < k_min)
        throw DataError("sweep_counter_count: need 1 <= k_min <= k_max");
    SweepResult result;
    double best = std::numeric_limits<double>::infinity();
    result.best_k = k_min;
    for (int k = k_min; k <= k_max; ++k) {
        const std::vector<std::string> sel = select_for(k);
        const double s = score(sel);
        result.points.push_back(SweepPoint{k, s});
        // Walking k upward, a larger k must beat the incumbent by more than
        // the tolerance; otherwise the cheaper configuration stands.
        if (s < best - tie_tol) {
            best = s;
            result.best_k = k;
        }
    }
    return result;
}

} // namespace pmcpower
