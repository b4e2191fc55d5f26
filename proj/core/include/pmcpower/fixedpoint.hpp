#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pmcpower/model.hpp"

namespace pmcpower {

// Q34.29: signed 64-bit value with 29 fractional bits.  34 integer bits give
// ~17 GW of headroom in mW while the 2^-29 step (~1.9e-9 mW) sits far below
// the power-sensor resolution.
inline constexpr int kFxFracBits = 29;
inline constexpr std::int64_t kFxOne = INT64_C(1) << kFxFracBits;

// Weights are tiny (mW per event/s); scale them by 2^20 before conversion and
// compensate with one shift after the summation so they keep ~20 more
// significant bits through the pipeline.
inline constexpr int kWeightPrescaleBits = 20;

struct Fx {
    std::int64_t raw = 0;

    friend constexpr bool operator==(Fx, Fx) = default;
};

// Nearest Q34.29 value, ties away from zero.  Throws DataError when the
// value cannot be represented (|v| >= 2^34) or is not finite.
Fx to_fx(double v);
double to_double(Fx v);

// Saturating add; overflow is sticky (set, never cleared).
Fx fx_add_sat(Fx a, Fx b, bool& overflow);

// a * b with one round-half-away-from-zero at the end, saturating.
Fx fx_mul(Fx a, Fx b, bool& overflow);

// acc + a * b: the product is rounded once, the add saturates.
Fx fx_mul_acc(Fx acc, Fx a, Fx b, bool& overflow);

// Arithmetic shift right by `bits` with round-half-away-from-zero.
Fx fx_shr_round(Fx v, int bits);

// ModelEntry with weights premultiplied by 2^prescale_bits and everything in
// raw Q34.29, ready for the integer-only inference path.
struct FxModelEntry {
    std::string subsystem;
    std::int64_t frequency_hz = 0;
    std::int64_t train_period_ns = 0;
    int prescale_bits = kWeightPrescaleBits;
    Fx intercept;
    std::vector<std::string> selected;
    std::vector<Fx> weights; // raw = weight * 2^(prescale_bits + 29), rounded

    std::size_t n_events() const { return selected.size(); }
};

FxModelEntry to_fixed_point(const ModelEntry& entry, int prescale_bits = kWeightPrescaleBits);

// Dynamic power of one unit over a window: counts (aligned with selected)
// accumulated over window_ns.  Integer count * weight products are exact;
// the single rounding happens at the multiply by 1e9/window_ns.
Fx fx_dyn(const FxModelEntry& entry, std::span<const std::int64_t> counts,
          std::int64_t window_ns, bool& overflow);

// counts[unit][j] over a common window; intercept added once.
using CountGrid = std::vector<std::vector<std::int64_t>>;
Fx fx_predict(const FxModelEntry& entry, const CountGrid& counts, std::int64_t window_ns,
              bool& overflow);

struct FxLut {
    int frac_bits = kFxFracBits;
    std::vector<FxModelEntry> entries;

    const FxModelEntry* find(const std::string& subsystem, std::int64_t frequency_hz) const;
};

FxLut to_fixed_point(const PowerLut& lut, int prescale_bits = kWeightPrescaleBits);

// Raw fields serialize as decimal strings: several JSON readers mangle
// integers beyond 2^53, and the replay contract is bit-exact.
void save_fx_lut(const FxLut& lut, const std::filesystem::path& json_path);
FxLut load_fx_lut(const std::filesystem::path& json_path);

} // namespace pmcpower
