#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "ens/cube_model.hpp"

namespace ens {

/// Masked-percentage thresholds tracked by the quality indicators. 10/50/90 feed the
/// quality score, 70 feeds the hard filters.
inline constexpr std::array<int, 4> kMaskThresholds{10, 50, 70, 90};

constexpr std::size_t threshold_slot(int percent) {
    for (std::size_t i = 0; i < kMaskThresholds.size(); ++i) {
        if (kMaskThresholds[i] == percent) return i;
    }
    return kMaskThresholds.size();
}

struct QualityIndicators {
    int frames = 0;
    std::array<int, 4> cd{};  // context frames over x% masked
    std::array<int, 4> mcd{}; // longest run of consecutive frames over x% masked
    std::array<int, 4> d{};   // frames over x% masked
    double w = 0.0;           // max per-frame water fraction
    double apct = 0.0;        // fraction of pixels masked in every context frame
    double pct = 0.0;         // total masked fraction

    int context_days(int percent) const { return cd.at(threshold_slot(percent)); }
    int max_consecutive_days(int percent) const { return mcd.at(threshold_slot(percent)); }
    int days(int percent) const { return d.at(threshold_slot(percent)); }
};

struct QualityTableRow {
    std::string cube_id;
    std::string tile;
    LatitudeBand latitude_band = LatitudeBand::south;
    int start_month = 1;
    QualityIndicators q;
    double qs = 0.0;
};

} // namespace ens
