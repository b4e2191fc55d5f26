#include "pmcpower/fixedpoint.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "pmcpower/error.hpp"
#include "pmcpower/io_util.hpp"

namespace pmcpower {

namespace {

using i128 = __int128;

std::int64_t saturate_i64(i128 v, bool& overflow) {
    if (v > std::numeric_limits<std::int64_t>::max()) {
        overflow = true;
        return std::numeric_limits<std::int64_t>::max();
    }
    if (v < std::numeric_limits<std::int64_t>::min()) {
        overflow = true;
        return std::numeric_limits<std::int64_t>::min();
    }
    return static_cast<std::int64_t>(v);
}

// Shift right with round-half-away-from-zero; exact in 128-bit.
i128 shr_round_i128(i128 v, int bits) {
    if (bits == 0)
        return v;
    const i128 one = i128(1) << bits;
    i128 q = v / one; // truncates toward zero
    i128 r = v % one; // same sign as v
    if (r < 0)
        r = -r;
    if (2 * r >= one)
        q += v < 0 ? -1 : 1;
    return q;
}

// Caps the count*weight accumulator above any non-saturating value (the
// saturation threshold in finish_dyn is at most 2^63 << 59 = 2^122) while
// keeping the 128-bit sum safely below wrap-around.
constexpr i128 kAccCap = i128(1) << 123;

// Exact sum of count * weight_raw for one unit (all terms nonnegative).
i128 accumulate_counts(const FxModelEntry& entry, std::span<const std::int64_t> counts) {
    if (counts.size() != entry.weights.size())
        throw DataError("fixed-point predict: counts width " + std::to_string(counts.size()) +
                        " does not match the model's " + std::to_string(entry.weights.size()) +
                        " events");
    i128 acc = 0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] < 0)
            throw DataError("fixed-point predict: negative count");
        acc += i128(counts[j]) * entry.weights[j].raw;
        if (acc > kAccCap)
            acc = kAccCap;
    }
    return acc;
}

// One multiply by 1e9/window_ns closes the accumulation; this is the only
// rounding in the dynamic term.
Fx finish_dyn(i128 acc, std::int64_t window_ns, int prescale_bits, bool& overflow) {
    if (window_ns <= 0)
        throw DataError("fixed-point predict: window must be positive");
    const Fx recip = to_fx(1e9 / static_cast<double>(window_ns));
    if (recip.raw == 0)
        return Fx{0}; // window beyond any sane horizon; rate rounds to zero
    const int shift = kFxFracBits + prescale_bits;
    const i128 cap = ((i128(std::numeric_limits<std::int64_t>::max()) << shift) +
                      recip.raw - 1) / recip.raw;
    if (acc >= cap) {
        overflow = true;
        return Fx{std::numeric_limits<std::int64_t>::max()};
    }
    return Fx{saturate_i64(shr_round_i128(acc * recip.raw, shift), overflow)};
}

} // namespace

Fx to_fx(double v) {
    if (!std::isfinite(v))
        throw DataError("to_fx: value is not finite");
    if (std::fabs(v) >= 0x1p34)
        throw DataError("to_fx: " + std::to_string(v) + " exceeds the Q34.29 range");
    return Fx{std::llround(v * static_cast<double>(kFxOne))};
}

double to_double(Fx v) {
    return std::ldexp(static_cast<double>(v.raw), -kFxFracBits);
}

Fx fx_add_sat(Fx a, Fx b, bool& overflow) {
    return Fx{saturate_i64(i128(a.raw) + b.raw, overflow)};
}

Fx fx_mul(Fx a, Fx b, bool& overflow) {
    return Fx{saturate_i64(shr_round_i128(i128(a.raw) * b.raw, kFxFracBits), overflow)};
}

Fx fx_mul_acc(Fx acc, Fx a, Fx b, bool& overflow) {
    const i128 prod = shr_round_i128(i128(a.raw) * b.raw, kFxFracBits);
    return Fx{saturate_i64(i128(acc.raw) + prod, overflow)};
}

Fx fx_shr_round(Fx v, int bits) {
    if (bits < 0 || bits > 63)
        throw DataError("fx_shr_round: bits must be in [0, 63]");
    return Fx{static_cast<std::int64_t>(shr_round_i128(v.raw, bits))};
}

FxModelEntry to_fixed_point(const ModelEntry& entry, int prescale_bits) {
    // 30 keeps prescale + frac at 59 bits, so the saturation-threshold
    // arithmetic in finish_dyn stays inside 128 bits.
    if (prescale_bits < 0 || prescale_bits > 30)
        throw DataError("to_fixed_point: prescale_bits must be in [0, 30]");
    FxModelEntry fx;
    fx.subsystem = entry.subsystem;
    fx.frequency_hz = entry.frequency_hz;
    fx.train_period_ns = entry.train_period_ns;
    fx.prescale_bits = prescale_bits;
    fx.selected = entry.selected;
    if (entry.intercept_mw < 0.0)
        throw DataError("to_fixed_point: negative intercept");
    fx.intercept = to_fx(entry.intercept_mw);
    fx.weights.reserve(entry.weights.size());
    for (std::size_t j = 0; j < entry.weights.size(); ++j) {
        const double w = entry.weights[j];
        if (w < 0.0)
            throw DataError("to_fixed_point: negative weight for '" + entry.selected[j] + "'");
        const double scaled = std::ldexp(w, prescale_bits); // exact: power-of-two scale
        if (scaled >= 0x1p34)
            throw DataError("to_fixed_point: weight for '" + entry.selected[j] +
                            "' overflows Q34.29 at prescale " + std::to_string(prescale_bits));
        fx.weights.push_back(to_fx(scaled));
    }
    return fx;
}

Fx fx_dyn(const FxModelEntry& entry, std::span<const std::int64_t> counts,
          std::int64_t window_ns, bool& overflow) {
    return finish_dyn(accumulate_counts(entry, counts), window_ns, entry.prescale_bits,
                      overflow);
}

Fx fx_predict(const FxModelEntry& entry, const CountGrid& counts, std::int64_t window_ns,
              bool& overflow) {
    i128 acc = 0;
    for (const std::vector<std::int64_t>& unit : counts) {
        acc += accumulate_counts(entry, unit);
        if (acc > kAccCap)
            acc = kAccCap;
    }
    const Fx dyn = finish_dyn(acc, window_ns, entry.prescale_bits, overflow);
    return fx_add_sat(dyn, entry.intercept, overflow);
}

const FxModelEntry* FxLut::find(const std::string& subsystem,
                                std::int64_t frequency_hz) const {
    for (const FxModelEntry& e : entries) {
        if (e.subsystem == subsystem && e.frequency_hz == frequency_hz)
            return &e;
    }
    return nullptr;
}

FxLut to_fixed_point(const PowerLut& lut, int prescale_bits) {
    FxLut out;
    out.entries.reserve(lut.entries.size());
    for (const ModelEntry& e : lut.entries)
        out.entries.push_back(to_fixed_point(e, prescale_bits));
    return out;
}

namespace {

std::string raw_str(Fx v) {
    return std::to_string(v.raw);
}

std::int64_t parse_raw(const std::string& s, const std::string& where) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw DataError(where + ": bad raw fixed-point literal '" + s + "'");
    return v;
}

} // namespace

void save_fx_lut(const FxLut& lut, const std::filesystem::path& json_path) {
    nlohmann::json j;
    j["type"] = "pmc-power-lut-fx";
    j["frac_bits"] = lut.frac_bits;
    j["entries"] = nlohmann::json::array();
    for (const FxModelEntry& e : lut.entries) {
        nlohmann::json je;
        je["subsystem"] = e.subsystem;
        je["frequency_hz"] = e.frequency_hz;
        je["train_period_ns"] = e.train_period_ns;
        je["prescale_bits"] = e.prescale_bits;
        je["intercept_raw"] = raw_str(e.intercept);
        je["events"] = e.selected;
        nlohmann::json weights = nlohmann::json::array();
        for (Fx w : e.weights)
            weights.push_back(raw_str(w));
        je["weight_raw"] = std::move(weights);
        j["entries"].push_back(std::move(je));
    }
    io::atomic_write(json_path, j.dump(2) + "\n");
}

FxLut load_fx_lut(const std::filesystem::path& json_path) {
    const std::string where = json_path.string();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(json_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": " + e.what());
    }
    if (j.value("type", "") != "pmc-power-lut-fx")
        throw DataError(where + ": not a pmc-power-lut-fx file");
    FxLut lut;
    try {
        lut.frac_bits = j.at("frac_bits").get<int>();
        if (lut.frac_bits != kFxFracBits)
            throw DataError(where + ": frac_bits " + std::to_string(lut.frac_bits) +
                            " unsupported (expected " + std::to_string(kFxFracBits) + ")");
        for (const auto& je : j.at("entries")) {
            FxModelEntry e;
            e.subsystem = je.at("subsystem").get<std::string>();
            e.frequency_hz = je.at("frequency_hz").get<std::int64_t>();
            e.train_period_ns = je.at("train_period_ns").get<std::int64_t>();
            e.prescale_bits = je.at("prescale_bits").get<int>();
            e.intercept = Fx{parse_raw(je.at("intercept_raw").get<std::string>(), where)};
            e.selected = je.at("events").get<std::vector<std::string>>();
            for (const auto& w : je.at("weight_raw"))
                e.weights.push_back(Fx{parse_raw(w.get<std::string>(), where)});
            if (e.weights.size() != e.selected.size())
                throw DataError(where + ": weight_raw/events length mismatch");
            if (e.prescale_bits < 0 || e.prescale_bits > 30)
                throw DataError(where + ": prescale_bits out of range");
            if (e.frequency_hz <= 0)
                throw DataError(where + ": frequency_hz must be > 0");
            if (e.train_period_ns <= 0)
                throw DataError(where + ": train_period_ns must be > 0");
            if (e.intercept.raw < 0)
                throw DataError(where + ": negative intercept");
            for (Fx w : e.weights) {
                if (w.raw < 0)
                    throw DataError(where + ": negative weight");
            }
            lut.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(where + ": " + e.what());
    }
    return lut;
}

} // namespace pmcpower
