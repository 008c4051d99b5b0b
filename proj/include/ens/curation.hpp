#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ens/cube_model.hpp"
#include "ens/error.hpp"
#include "ens/indicators.hpp"
#include "ens/ndvi_masking.hpp"
#include "ens/random.hpp"

namespace ens {

struct CurationConfig {
    double eps = 1e-8;
    /// Use max(1 - eps, 1 - v) inside the logarithms exactly as printed; that form
    /// cancels both log terms, so the default guards log(0) with max(eps, 1 - v).
    bool literal_log_guard = false;

    // hard filters
    int max_days_over_70 = 15;
    int max_context_days_over_70 = 5;
    double max_water = 0.5;
    double max_total_masked = 0.4; // rows with pct >= this are dropped
    int max_consecutive_days_over_70 = 5;

    std::size_t max_per_tile = 1500;
    std::size_t min_total = 32000;
    std::size_t north_min_total = 10000;
    double x_step = 0.05;

    std::size_t ood_tile_count = 16;
    std::size_t ood_min = 4000;
    std::size_t ood_max = 4500;
    std::size_t ood_north_min = 1500;
    std::size_t ood_max_draws = 10000;
    /// Share of the non-OOD corpus assigned to the IID test set (4219 of 23904 + 4219).
    double iid_fraction = 4219.0 / (23904.0 + 4219.0);
};

inline QualityIndicators compute_indicators(const Multicube& cube, const TrackSpec& track) {
    const std::size_t frames = cube.frames();
    const std::size_t context = std::min(track.context_frames, frames);
    const std::size_t fs = cube.hr_dynamic.frame_size();
    QualityIndicators q;
    q.frames = int(frames);
    if (frames == 0 || fs == 0) return q;

    std::vector<double> masked_fraction(frames);
    std::vector<std::uint8_t> always_masked(fs, context > 0 ? 1 : 0);
    std::size_t masked_total = 0;
    for (std::size_t t = 0; t < frames; ++t) {
        const auto m = cube.hr_dynamic.plane(t, idx(HrChannel::quality_mask));
        const auto scl = cube.hr_dynamic.plane(t, idx(HrChannel::scene_class));
        std::size_t masked = 0, water = 0;
        for (std::size_t i = 0; i < fs; ++i) {
            const bool mk = m[i] >= 0.5f;
            masked += mk;
            water += scene_code(scl[i]) == int(SceneClass::water);
            if (t < context && !mk) always_masked[i] = 0;
        }
        masked_total += masked;
        masked_fraction[t] = double(masked) / double(fs);
        q.w = std::max(q.w, double(water) / double(fs));
    }
    for (std::size_t k = 0; k < kMaskThresholds.size(); ++k) {
        const double limit = kMaskThresholds[k] / 100.0;
        int run = 0;
        for (std::size_t t = 0; t < frames; ++t) {
            if (masked_fraction[t] > limit) {
                ++q.d[k];
                if (t < context) ++q.cd[k];
                q.mcd[k] = std::max(q.mcd[k], ++run);
            } else {
                run = 0;
            }
        }
    }
    std::size_t always = 0;
    for (auto a : always_masked) always += a;
    q.apct = double(always) / double(fs);
    q.pct = double(masked_total) / double(frames * fs);
    return q;
}

/// Curation quality score; lower is better.
inline double quality_score(const QualityIndicators& q, const CurationConfig& cfg = {}) {
    double days = 0.0;
    for (int x : {10, 50, 90}) days += q.context_days(x) + q.max_consecutive_days(x) + q.days(x);
    auto guard = [&](double v) { return cfg.literal_log_guard ? std::max(1.0 - cfg.eps, v) : std::max(cfg.eps, v); };
    return days / 30.0 - std::log(guard(1.0 - q.w)) - std::log(guard(1.0 - std::pow(q.apct, 0.25))) +
           2.0 * q.pct * q.pct;
}

enum class HardFilter { none, days_over_70, context_days_over_70, water, total_masked, consecutive_days_over_70 };

/// First hard filter a row violates, or `none`.
inline HardFilter hard_filter_violation(const QualityIndicators& q, const CurationConfig& cfg = {}) {
    if (q.days(70) > cfg.max_days_over_70) return HardFilter::days_over_70;
    if (q.context_days(70) > cfg.max_context_days_over_70) return HardFilter::context_days_over_70;
    if (q.w > cfg.max_water) return HardFilter::water;
    if (q.pct >= cfg.max_total_masked) return HardFilter::total_masked;
    if (q.max_consecutive_days(70) > cfg.max_consecutive_days_over_70) return HardFilter::consecutive_days_over_70;
    return HardFilter::none;
}

inline bool passes_hard_filters(const QualityIndicators& q, const CurationConfig& cfg = {}) {
    return hard_filter_violation(q, cfg) == HardFilter::none;
}

namespace detail {
inline auto qs_order(const std::vector<QualityTableRow>& rows) {
    return [&rows](std::size_t a, std::size_t b) {
        if (rows[a].qs != rows[b].qs) return rows[a].qs < rows[b].qs;
        return rows[a].cube_id < rows[b].cube_id;
    };
}

inline std::size_t quota(double x, std::size_t l) {
    // ceil(x * l), tolerant of representation error in x (0.3 * 10 is 3, not 4)
    return std::size_t(std::ceil(x * double(l) - 1e-9));
}
} // namespace detail

/// Per tile: drop hard-filter violators, rank the rest by ascending `qs` (ties by
/// cube id) and keep the best ceil(x * l), at most `max_per_tile`, where l is the
/// tile's row count before filtering. Values are row indices.
inline std::map<std::string, std::vector<std::size_t>> filter_and_rank(const std::vector<QualityTableRow>& rows, double x,
                                                                       const CurationConfig& cfg = {}) {
    std::map<std::string, std::vector<std::size_t>> by_tile;
    std::map<std::string, std::size_t> before;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ++before[rows[i].tile];
        if (passes_hard_filters(rows[i].q, cfg)) by_tile[rows[i].tile].push_back(i);
    }
    for (auto& [tile, idx] : by_tile) {
        std::sort(idx.begin(), idx.end(), detail::qs_order(rows));
        const std::size_t keep = std::min({detail::quota(x, before[tile]), cfg.max_per_tile, idx.size()});
        idx.resize(keep);
    }
    return by_tile;
}

inline std::vector<std::size_t> flatten(const std::map<std::string, std::vector<std::size_t>>& per_tile) {
    std::vector<std::size_t> out;
    for (const auto& [tile, idx] : per_tile) out.insert(out.end(), idx.begin(), idx.end());
    std::sort(out.begin(), out.end());
    return out;
}

/// Tops up starting months holding fewer than half of the fullest month, then the
/// northern half up to `north_min_total`, both from unselected rows passing the hard
/// filters in QS order, respecting the per-tile cap.
inline std::vector<std::size_t> rebalance(const std::vector<std::size_t>& selection,
                                          const std::vector<QualityTableRow>& rows, const CurationConfig& cfg = {}) {
    std::vector<std::uint8_t> chosen(rows.size(), 0);
    std::map<std::string, std::size_t> per_tile;
    std::array<std::size_t, 13> per_month{};
    std::size_t north = 0;
    auto take = [&](std::size_t i) {
        chosen[i] = 1;
        ++per_tile[rows[i].tile];
        ++per_month[std::size_t(rows[i].start_month)];
        north += rows[i].latitude_band == LatitudeBand::north;
    };
    for (auto i : selection) take(i);

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!chosen[i] && passes_hard_filters(rows[i].q, cfg)) pool.push_back(i);
    }
    std::sort(pool.begin(), pool.end(), detail::qs_order(rows));
    auto available = [&](std::size_t i) { return !chosen[i] && per_tile[rows[i].tile] < cfg.max_per_tile; };

    const std::size_t fullest = *std::max_element(per_month.begin() + 1, per_month.end());
    for (int m = 1; m <= 12; ++m) {
        for (std::size_t k = 0; k < pool.size() && 2 * per_month[std::size_t(m)] < fullest; ++k) {
            const auto i = pool[k];
            if (rows[i].start_month == m && available(i)) take(i);
        }
    }
    for (std::size_t k = 0; k < pool.size() && north < cfg.north_min_total; ++k) {
        const auto i = pool[k];
        if (rows[i].latitude_band == LatitudeBand::north && available(i)) take(i);
    }
    if (north < cfg.north_min_total) {
        throw InsufficientCorpus("only " + std::to_string(north) + " northern cubes available, need " +
                                 std::to_string(cfg.north_min_total));
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (chosen[i]) out.push_back(i);
    }
    return out;
}

struct CurationResult {
    std::vector<std::size_t> selection; // row indices, ascending
    double x_final = 0.0;
};

/// Filter, rank and rebalance, loosening x from `x_start` in `x_step` increments
/// until the selection reaches `min_total`.
inline CurationResult curate(const std::vector<QualityTableRow>& rows, double x_start, const CurationConfig& cfg = {}) {
    if (!(x_start > 0.0 && x_start <= 1.0)) throw InvalidArgument("quality restriction x must lie in (0, 1]");
    for (int k = 0;; ++k) {
        const double x = std::min(1.0, x_start + k * cfg.x_step);
        auto sel = rebalance(flatten(filter_and_rank(rows, x, cfg)), rows, cfg);
        if (sel.size() >= cfg.min_total) return {std::move(sel), x};
        if (x >= 1.0) {
            throw InsufficientCorpus("curated corpus holds " + std::to_string(sel.size()) + " cubes at x = 1, need " +
                                     std::to_string(cfg.min_total));
        }
    }
}

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> iid;
    std::vector<std::string> ood;
    std::vector<std::string> ood_tiles;
    std::size_t draws = 0;
};

/// Draws `ood_tile_count` tiles uniformly without replacement until their cubes
/// number within [ood_min, ood_max] with at least `ood_north_min` northern ones, then
/// splits the remaining cubes randomly into train and IID test.
inline DatasetSplit sample_ood_split(const std::vector<QualityTableRow>& corpus, std::uint64_t seed,
                                     const CurationConfig& cfg = {}) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> tile_counts; // total, north
    for (const auto& r : corpus) {
        auto& c = tile_counts[r.tile];
        ++c.first;
        c.second += r.latitude_band == LatitudeBand::north;
    }
    std::vector<std::string> tiles;
    for (const auto& [t, c] : tile_counts) tiles.push_back(t);
    if (tiles.size() < cfg.ood_tile_count) {
        throw SamplingExhausted("corpus has " + std::to_string(tiles.size()) + " tiles, need " +
                                std::to_string(cfg.ood_tile_count) + " for the OOD set");
    }

    Rng rng(seed);
    DatasetSplit split;
    std::set<std::string> ood_tiles;
    bool accepted = false;
    for (std::size_t draw = 1; draw <= cfg.ood_max_draws; ++draw) {
        auto pick = tiles;
        for (std::size_t i = 0; i < cfg.ood_tile_count; ++i) {
            const std::size_t j = i + std::size_t(rng.index(pick.size() - i));
            std::swap(pick[i], pick[j]);
        }
        std::size_t total = 0, north = 0;
        for (std::size_t i = 0; i < cfg.ood_tile_count; ++i) {
            total += tile_counts[pick[i]].first;
            north += tile_counts[pick[i]].second;
        }
        if (total >= cfg.ood_min && total <= cfg.ood_max && north >= cfg.ood_north_min) {
            ood_tiles.insert(pick.begin(), pick.begin() + std::ptrdiff_t(cfg.ood_tile_count));
            split.draws = draw;
            accepted = true;
            break;
        }
    }
    if (!accepted) {
        throw SamplingExhausted("no OOD tile draw satisfied the bounds within " + std::to_string(cfg.ood_max_draws) +
                                " draws");
    }

    std::vector<std::string> rest;
    for (const auto& r : corpus) {
        if (ood_tiles.count(r.tile)) split.ood.push_back(r.cube_id);
        else rest.push_back(r.cube_id);
    }
    std::sort(rest.begin(), rest.end());
    rng.shuffle(rest);
    const auto n_iid = std::size_t(std::llround(double(rest.size()) * cfg.iid_fraction));
    split.iid.assign(rest.begin(), rest.begin() + std::ptrdiff_t(n_iid));
    split.train.assign(rest.begin() + std::ptrdiff_t(n_iid), rest.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.iid.begin(), split.iid.end());
    std::sort(split.ood.begin(), split.ood.end());
    split.ood_tiles.assign(ood_tiles.begin(), ood_tiles.end());
    return split;
}

struct SpecialSetConfig {
    std::size_t per_tile = 300;
    std::size_t total = 4000;
    double max_water = 0.5;
    double max_always_masked = 0.01;
};

/// Extreme/seasonal test set selection: drop watery or persistently masked cubes, keep
/// the least masked `per_tile` per tile, then the least masked `total` overall. Returns
/// row indices in ascending masked-fraction order. Fewer survivors are all returned.
inline std::vector<std::size_t> select_special_set(const std::vector<QualityTableRow>& rows,
                                                   const SpecialSetConfig& cfg = {}) {
    auto by_pct = [&rows](std::size_t a, std::size_t b) {
        if (rows[a].q.pct != rows[b].q.pct) return rows[a].q.pct < rows[b].q.pct;
        return rows[a].cube_id < rows[b].cube_id;
    };
    std::map<std::string, std::vector<std::size_t>> by_tile;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].q.w > cfg.max_water || rows[i].q.apct > cfg.max_always_masked) continue;
        by_tile[rows[i].tile].push_back(i);
    }
    std::vector<std::size_t> out;
    for (auto& [tile, idx] : by_tile) {
        std::sort(idx.begin(), idx.end(), by_pct);
        if (idx.size() > cfg.per_tile) idx.resize(cfg.per_tile);
        out.insert(out.end(), idx.begin(), idx.end());
    }
    std::sort(out.begin(), out.end(), by_pct);
    if (out.size() > cfg.total) out.resize(cfg.total);
    return out;
}

inline nlohmann::ordered_json split_to_json(const DatasetSplit& s, std::uint64_t seed, double x_final) {
    nlohmann::ordered_json j;
    j["train"] = s.train;
    j["iid"] = s.iid;
    j["ood"] = s.ood;
    j["seed"] = seed;
    j["x_final"] = x_final;
    return j;
}

} // namespace ens
