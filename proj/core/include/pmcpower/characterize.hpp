#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pmcpower/regress.hpp"
#include "pmcpower/trace.hpp"

namespace pmcpower {

// Answers "can these counters be programmed on the PMU at the same time?".
// Implementations must be downward closed: a subset of a feasible set is
// feasible.  The conflict-group oracle below is the production one; tests
// inject adversarial oracles through EventCatalog::compat.
struct CompatOracle {
    virtual ~CompatOracle() = default;
    virtual bool feasible(std::span<const std::string> events) const = 0;
};

struct AllCompatible final : CompatOracle {
    bool feasible(std::span<const std::string>) const override { return true; }
};

// Two events sharing any conflict group are mutually exclusive.
class ConflictGroupOracle final : public CompatOracle {
public:
    explicit ConflictGroupOracle(std::map<std::string, std::vector<std::string>> groups_by_event)
        : groups_by_event_(std::move(groups_by_event)) {}
    bool feasible(std::span<const std::string> events) const override;

private:
    std::map<std::string, std::vector<std::string>> groups_by_event_;
};

struct CatalogEvent {
    std::string name;
    std::vector<std::string> conflict_groups;
    bool fixed = false; // operator-pinned: always selected, ahead of the ranking
};

struct EventCatalog {
    std::string subsystem;
    int pmu_limit = 1; // counters the PMU can host concurrently
    std::vector<CatalogEvent> events;
    std::shared_ptr<const CompatOracle> compat; // nullptr -> conflict groups

    const CatalogEvent* find(const std::string& name) const;
    // Size against pmu_limit plus the compatibility oracle.
    bool feasible(std::span<const std::string> names) const;
};

EventCatalog load_catalog(const std::filesystem::path& json_path);
void save_catalog(const EventCatalog& catalog, const std::filesystem::path& json_path);

struct RankedEvent {
    std::string name;
    SimpleFit fit;
};

// Characterization steps 1+2: regress power on each event's rate (summed
// across units), keep events whose slope is significant at `alpha`, rank by
// |pcc| descending (ties by name).  Every event must appear in exactly one
// of the profiling passes.
std::vector<RankedEvent> correlate_events(const std::vector<RateMatrix>& passes,
                                          double alpha);

// Plain top-k of the ranking.
std::vector<std::string> select_top(std::span<const RankedEvent> ranking, std::size_t limit);
// Same, but catalog fixed events come first and count toward the limit.
std::vector<std::string> select_top(std::span<const RankedEvent> ranking,
                                    const EventCatalog& catalog, std::size_t limit);

// Greedy PMU-aware selection: walk the ranking, keep an event only when the
// kept set plus it stays feasible, stop once `limit` events are kept.
std::vector<std::string> select_pmu_aware(std::span<const RankedEvent> ranking,
                                          const EventCatalog& catalog, std::size_t limit);

struct CharacterizationReport {
    std::string subsystem;
    std::int64_t frequency_hz = 0;
    double alpha = 0.05;
    std::vector<RankedEvent> ranking;
    std::vector<std::string> selected;
};

void save_report(const CharacterizationReport& report, const std::filesystem::path& json_path);
CharacterizationReport load_report(const std::filesystem::path& json_path);

// Counter-count sweep.  For each k in [k_min, k_max], `select_for` yields the
// event set and `score` rates it (lower is better, e.g. validation MAPE).
// Ties within tie_tol go to the smaller k: extra counters must pay their way.
struct SweepPoint {
    int k = 0;
    double score = 0.0;
};
struct SweepResult {
    int best_k = 0;
    std::vector<SweepPoint> points;
};
SweepResult sweep_counter_count(
    int k_min, int k_max,
    const std::function<std::vector<std::string>(int)>& select_for,
    const std::function<double(const std::vector<std::string>&)>& score,
    double tie_tol = 1e-4);

} // namespace pmcpower
