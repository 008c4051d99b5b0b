#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "ens/cube_io.hpp"
#include "ens/cube_model.hpp"
#include "ens/curation.hpp"
#include "ens/error.hpp"
#include "ens/ndvi_masking.hpp"
#include "ens/random.hpp"

namespace ens {

struct SynthParams {
    std::size_t frames = 30;
    double cloud_rate = 0.1;       // mean fraction of each frame covered by cloud seeds
    double season_amplitude = 0.15; // NDVI amplitude of the yearly cycle
    double noise_sigma = 0.01;     // per-pixel, per-frame NDVI noise
    double water_fraction = 0.0;
    /// Mask channel from build_quality_mask on the generated bands; otherwise the raw
    /// cloud footprint.
    bool rule_consistent = true;
    std::string tile = "32UMC";
    int start_month = 1;
    int year = 2018;
};

namespace detail {

/// Diamond-square field on a (2^n + 1)^2 grid, cropped to size x size and normalised
/// to [0, 1].
inline std::vector<double> diamond_square(Rng& rng, std::size_t size, double roughness) {
    std::size_t n = 1;
    while (n + 1 < size) n *= 2;
    const std::size_t m = n + 1;
    std::vector<double> g(m * m, 0.0);
    auto at = [&](std::size_t y, std::size_t x) -> double& { return g[y * m + x]; };
    for (std::size_t y : {std::size_t{0}, n}) {
        for (std::size_t x : {std::size_t{0}, n}) at(y, x) = rng.uniform(-1.0, 1.0);
    }
    double scale = 1.0;
    for (std::size_t step = n; step > 1; step /= 2) {
        const std::size_t half = step / 2;
        for (std::size_t y = half; y < m; y += step) {
            for (std::size_t x = half; x < m; x += step) {
                const double avg = (at(y - half, x - half) + at(y - half, x + half) + at(y + half, x - half) +
                                    at(y + half, x + half)) / 4.0;
                at(y, x) = avg + scale * rng.uniform(-1.0, 1.0);
            }
        }
        for (std::size_t y = 0; y < m; y += half) {
            for (std::size_t x = (y / half) % 2 == 0 ? half : 0; x < m; x += step) {
                double sum = 0.0;
                int count = 0;
                if (y >= half) sum += at(y - half, x), ++count;
                if (y + half < m) sum += at(y + half, x), ++count;
                if (x >= half) sum += at(y, x - half), ++count;
                if (x + half < m) sum += at(y, x + half), ++count;
                at(y, x) = sum / count + scale * rng.uniform(-1.0, 1.0);
            }
        }
        scale *= roughness;
    }
    std::vector<double> out(size * size);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) out[y * size + x] = at(y, x);
    }
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    const double a = *lo, span = *hi - *lo;
    for (double& v : out) v = span > 0 ? (v - a) / span : 0.5;
    return out;
}

/// Indicator mask of the `fraction` highest values of a field (ties broken by index).
inline std::vector<std::uint8_t> top_fraction(const std::vector<double>& field, double fraction) {
    const auto k = std::size_t(std::llround(std::clamp(fraction, 0.0, 1.0) * double(field.size())));
    std::vector<std::size_t> order(field.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return field[a] > field[b]; });
    std::vector<std::uint8_t> out(field.size(), 0);
    for (std::size_t i = 0; i < k; ++i) out[order[i]] = 1;
    return out;
}

inline void check_params(const SynthParams& p) {
    if (p.frames < 1) throw InvalidArgument("synth: frames must be >= 1");
    if (!(p.cloud_rate >= 0.0 && p.cloud_rate <= 1.0)) throw InvalidArgument("synth: cloud_rate must lie in [0, 1]");
    if (!(p.water_fraction >= 0.0 && p.water_fraction <= 1.0)) {
        throw InvalidArgument("synth: water_fraction must lie in [0, 1]");
    }
    if (!(p.season_amplitude >= 0.0) || !(p.noise_sigma >= 0.0)) {
        throw InvalidArgument("synth: season_amplitude and noise_sigma must be non-negative");
    }
    if (p.start_month < 1 || p.start_month > 12) throw InvalidArgument("synth: start_month must lie in 1..12");
    if (p.tile.empty() || p.tile.find('_') != std::string::npos) throw InvalidArgument("synth: bad tile id");
}

} // namespace detail

inline std::string synth_cube_id(std::uint64_t seed, const SynthParams& p) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "_%04d-%02d-01_s%llu", p.year, p.start_month, static_cast<unsigned long long>(seed));
    return p.tile + buf;
}

struct SynthResult {
    Multicube cube;
    Tensor4<float> clear_bands; // [t, 4, h, w] cloud-free surface reflectance
};

/// Deterministic cube from a seed. Clear pixels carry reflectances that never trip
/// the spectral mask rules; cloud pixels are bright and labelled SCL 9. Cloud seeds
/// stay two pixels off the border and are grown by 3x3, so every cloud pixel ends
/// up under the eroded-then-dilated quality mask.
inline SynthResult synth_cube_with_truth(std::uint64_t seed, const SynthParams& p = {}) {
    detail::check_params(p);
    const std::size_t S = kHrSize, fs = S * S, T = p.frames;
    Rng rng(seed);

    const auto veg = detail::diamond_square(rng, S, 0.55);
    const auto soil = detail::diamond_square(rng, S, 0.6);
    const auto lake = detail::diamond_square(rng, S, 0.5);
    const auto elevation = detail::diamond_square(rng, S, 0.6);
    const auto water = detail::top_fraction(lake, p.water_fraction);

    Multicube c;
    c.hr_dynamic = Tensor4<float>({T, kHrChannels, S, S});
    c.meso_dynamic = Tensor4<float>({kMesoDaysPerFrame * T, kMesoChannels, kMesoSize, kMesoSize});
    c.hr_static = Grid<float>(S, S);
    c.meso_static = Grid<float>(kMesoSize, kMesoSize);
    apply_id_metadata(c, synth_cube_id(seed, p));
    c.start_month = p.start_month;

    for (std::size_t i = 0; i < fs; ++i) c.hr_static.values()[i] = float(200.0 + 800.0 * elevation[i]);
    for (std::size_t y = 0; y < kMesoSize; ++y) {
        for (std::size_t x = 0; x < kMesoSize; ++x) {
            c.meso_static(y, x) = c.hr_static(y * S / kMesoSize, x * S / kMesoSize);
        }
    }

    Tensor4<float> clear({T, kBands, S, S});
    const double day0 = 30.4 * (p.start_month - 1);
    std::vector<std::uint8_t> cloud(fs);
    for (std::size_t t = 0; t < T; ++t) {
        const double day = day0 + double(kMesoDaysPerFrame * t);
        const double season = p.season_amplitude * std::sin(2.0 * std::numbers::pi * (day - 100.0) / 365.0);

        std::fill(cloud.begin(), cloud.end(), 0);
        if (p.cloud_rate > 0.0) {
            const double cover = std::min(1.0, 2.0 * p.cloud_rate * rng.uniform());
            const auto blobs = detail::diamond_square(rng, S, 0.65);
            const auto seeds = detail::top_fraction(blobs, cover);
            Mask seed_mask(S, S);
            for (std::size_t y = 2; y + 2 < S; ++y) {
                for (std::size_t x = 2; x + 2 < S; ++x) seed_mask(y, x) = seeds[y * S + x];
            }
            const auto grown = dilate(seed_mask, 3);
            std::copy(grown.values().begin(), grown.values().end(), cloud.begin());
        }

        auto B = c.hr_dynamic.plane(t, idx(HrChannel::blue));
        auto G = c.hr_dynamic.plane(t, idx(HrChannel::green));
        auto R = c.hr_dynamic.plane(t, idx(HrChannel::red));
        auto N = c.hr_dynamic.plane(t, idx(HrChannel::nir));
        auto P = c.hr_dynamic.plane(t, idx(HrChannel::cloud_probability));
        auto L = c.hr_dynamic.plane(t, idx(HrChannel::scene_class));
        auto M = c.hr_dynamic.plane(t, idx(HrChannel::quality_mask));
        for (std::size_t i = 0; i < fs; ++i) {
            // red falls as the canopy greens up; every band carries the season
            double red = water[i] ? 0.03 : (0.03 + 0.05 * soil[i]) * (1.0 - season);
            double nd = water[i] ? -0.3 : 0.15 + 0.6 * veg[i] + season;
            if (p.noise_sigma > 0.0) {
                nd += p.noise_sigma * rng.normal();
                red = std::max(0.005, red + 0.5 * p.noise_sigma * rng.normal());
            }
            nd = std::clamp(nd, -0.5, 0.8);
            const float r = float(red);
            const float n = float(std::min(1.0, red * (1.0 + nd) / (1.0 - nd)));
            const float g = float(1.25 * red + 0.01);
            const float b = float(0.7 * red);
            clear(t, 0, i / S, i % S) = b;
            clear(t, 1, i / S, i % S) = g;
            clear(t, 2, i / S, i % S) = r;
            clear(t, 3, i / S, i % S) = n;
            if (cloud[i]) {
                const float haze = float(0.05 * rng.uniform());
                B[i] = 0.5f + haze;
                G[i] = 0.5f + haze;
                R[i] = 0.5f + haze;
                N[i] = 0.55f + haze;
                P[i] = 90.0f;
                L[i] = float(int(SceneClass::cloud_high_probability));
            } else {
                B[i] = b;
                G[i] = g;
                R[i] = r;
                N[i] = n;
                P[i] = 0.0f;
                const auto scl = water[i] ? SceneClass::water
                                          : (nd > 0.3 ? SceneClass::vegetation : SceneClass::not_vegetated);
                L[i] = float(int(scl));
            }
            M[i] = cloud[i];
        }
        if (p.rule_consistent) {
            const auto m = build_quality_mask(c.hr_dynamic, t);
            std::copy(m.values().begin(), m.values().end(), M.begin());
        }
    }

    // Mesoscale drivers: one value per (day, variable), following the season.
    for (std::size_t d = 0; d < c.meso_dynamic.frames(); ++d) {
        const double phase = 2.0 * std::numbers::pi * (day0 + double(d) - 100.0) / 365.0;
        const float v[kMesoChannels] = {
            float(2.0 + 2.0 * rng.uniform()),           // precipitation
            float(1010.0 + 5.0 * std::sin(phase)),      // pressure
            float(10.0 + 8.0 * std::sin(phase)),        // mean temperature
            float(5.0 + 8.0 * std::sin(phase)),         // min temperature
            float(15.0 + 8.0 * std::sin(phase)),        // max temperature
        };
        for (std::size_t k = 0; k < kMesoChannels; ++k) {
            auto plane = c.meso_dynamic.plane(d, k);
            std::fill(plane.begin(), plane.end(), v[k]);
        }
    }
    return {std::move(c), std::move(clear)};
}

inline Multicube synth_cube(std::uint64_t seed, const SynthParams& p = {}) {
    return synth_cube_with_truth(seed, p).cube;
}

enum class CorpusProfile { clean, mixed };

inline CorpusProfile parse_corpus_profile(std::string_view s) {
    if (s == "clean") return CorpusProfile::clean;
    if (s == "mixed") return CorpusProfile::mixed;
    throw InvalidArgument("unknown corpus profile '" + std::string(s) + "'");
}

struct CorpusParams {
    std::size_t n_tiles = 20;
    std::size_t cubes_per_tile = 300;
    CorpusProfile profile = CorpusProfile::mixed;
    /// Relative spread of tile sizes around cubes_per_tile; the total stays
    /// n_tiles * cubes_per_tile.
    double tile_size_spread = 0.0;
    /// Shares of rows engineered to violate each hard filter (mixed profile only).
    double water_share = 0.10;
    double other_violation_share = 0.04;
};

struct SynthCorpus {
    DatasetManifest manifest;
    std::vector<QualityTableRow> rows;
    std::vector<HardFilter> engineered; // the one filter each row was built to violate
};

/// Tile id for tile k: even tiles in northern MGRS bands, odd ones in southern.
inline std::string synth_tile_name(std::size_t k) {
    const char band = (k % 2 == 0) ? "UV"[(k / 2) % 2] : "ST"[(k / 2) % 2];
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02zu%c%c%c", 10 + (k / 2) % 50, band, char('A' + (k / 100) % 26),
                  char('A' + (k / 4) % 26));
    return buf;
}

namespace detail {

/// Indicators from per-frame masked fractions, by the same definitions as
/// compute_indicators.
inline QualityIndicators indicators_from_fractions(const std::vector<double>& f, std::size_t context, double w,
                                                   double apct) {
    QualityIndicators q;
    q.frames = int(f.size());
    for (std::size_t k = 0; k < kMaskThresholds.size(); ++k) {
        const double limit = kMaskThresholds[k] / 100.0;
        int run = 0;
        for (std::size_t t = 0; t < f.size(); ++t) {
            if (f[t] > limit) {
                ++q.d[k];
                if (t < context) ++q.cd[k];
                q.mcd[k] = std::max(q.mcd[k], ++run);
            } else {
                run = 0;
            }
        }
    }
    double sum = 0.0;
    for (double v : f) sum += v;
    q.pct = sum / double(f.size());
    q.w = w;
    q.apct = apct;
    return q;
}

} // namespace detail

/// Quality-table-level corpus (no cube files): per-frame masked fractions are drawn
/// and turned into indicators, so every row is internally consistent. In the mixed
/// profile a fixed share of rows is engineered to break exactly one hard filter.
inline SynthCorpus synth_corpus(std::uint64_t seed, const CorpusParams& cp = {}) {
    constexpr std::size_t frames = 30, context = 10;
    const std::size_t n = cp.n_tiles * cp.cubes_per_tile;
    Rng rng(seed);

    std::vector<std::size_t> sizes(cp.n_tiles, cp.cubes_per_tile);
    if (cp.tile_size_spread > 0.0 && cp.n_tiles > 1) {
        for (std::size_t k = 0; k + 1 < cp.n_tiles; k += 2) {
            const auto delta = std::size_t(double(cp.cubes_per_tile) * cp.tile_size_spread * rng.uniform());
            sizes[k] += delta;
            sizes[k + 1] -= delta;
        }
        rng.shuffle(sizes);
    }

    std::vector<HardFilter> kinds(n, HardFilter::none);
    if (cp.profile == CorpusProfile::mixed) {
        std::size_t pos = 0;
        auto fill = [&](HardFilter h, double share) {
            const auto count = std::size_t(std::llround(share * double(n)));
            for (std::size_t i = 0; i < count && pos < n; ++i) kinds[pos++] = h;
        };
        fill(HardFilter::water, cp.water_share);
        fill(HardFilter::days_over_70, cp.other_violation_share);
        fill(HardFilter::context_days_over_70, cp.other_violation_share);
        fill(HardFilter::total_masked, cp.other_violation_share);
        fill(HardFilter::consecutive_days_over_70, cp.other_violation_share);
        rng.shuffle(kinds);
    }

    SynthCorpus out;
    out.rows.reserve(n);
    std::size_t row = 0;
    for (std::size_t k = 0; k < cp.n_tiles; ++k) {
        const std::string tile = synth_tile_name(k);
        for (std::size_t j = 0; j < sizes[k]; ++j, ++row) {
            Rng r(Rng::derive(seed, row));
            const int month = 1 + int(r.index(12));
            std::vector<double> f(frames);
            for (double& v : f) v = 0.25 * std::pow(r.uniform(), 2.0);
            double w = 0.4 * r.uniform();
            const HardFilter kind = kinds[row];
            switch (kind) {
            case HardFilter::none: break;
            case HardFilter::water: w = 0.5 + 0.45 * (1.0 - r.uniform()); break;
            case HardFilter::days_over_70:
                // 16 days over 70%: five alternating context days, then runs of 5, 5 and 1
                std::fill(f.begin(), f.end(), 0.0);
                for (std::size_t t : {0, 2, 4, 6, 8, 10, 11, 12, 13, 14, 16, 17, 18, 19, 20, 22}) f[t] = 0.701;
                break;
            case HardFilter::context_days_over_70:
                for (std::size_t t : {0, 1, 2, 3, 4, 6}) f[t] = 0.8;
                break;
            case HardFilter::total_masked: std::fill(f.begin(), f.end(), 0.45); break;
            case HardFilter::consecutive_days_over_70:
                for (std::size_t t = 12; t < 18; ++t) f[t] = 0.8;
                break;
            }
            const double min_context = *std::min_element(f.begin(), f.begin() + context);
            const double apct = std::min(0.01, min_context) * r.uniform();

            char id[64];
            std::snprintf(id, sizeof id, "%s_%04d-%02d-01_c%06zu", tile.c_str(), 2018, month, row);
            QualityTableRow q;
            q.cube_id = id;
            q.tile = tile;
            q.latitude_band = latitude_band_of_tile(tile);
            q.start_month = month;
            q.q = detail::indicators_from_fractions(f, context, w, apct);
            q.qs = quality_score(q.q);
            out.manifest.entries.push_back({q.cube_id, q.cube_id + ".npz", tile, ""});
            out.rows.push_back(std::move(q));
            out.engineered.push_back(kind);
        }
    }
    return out;
}

} // namespace ens
