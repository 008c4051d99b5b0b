#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ens/error.hpp"
#include "ens/tensor.hpp"

namespace ens {

inline constexpr std::size_t kHrSize = 128;
inline constexpr std::size_t kMesoSize = 80;
inline constexpr std::size_t kHrChannels = 7;
inline constexpr std::size_t kMesoChannels = 5;
inline constexpr std::size_t kBands = 4;
inline constexpr std::size_t kMesoDaysPerFrame = 5;

/// Storage order of the high-resolution dynamic channels.
enum class HrChannel : std::size_t {
    blue = 0,
    green = 1,
    red = 2,
    nir = 3,
    cloud_probability = 4,
    scene_class = 5,
    quality_mask = 6,
};

constexpr std::size_t idx(HrChannel c) noexcept { return static_cast<std::size_t>(c); }

enum class LatitudeBand { north, south };

inline std::string_view to_string(LatitudeBand b) { return b == LatitudeBand::north ? "north" : "south"; }

inline LatitudeBand parse_latitude_band(std::string_view s) {
    if (s == "north") return LatitudeBand::north;
    if (s == "south") return LatitudeBand::south;
    throw ParseError("unknown latitude band '" + std::string(s) + "'");
}

/// One spatio-temporal sample. Dynamic arrays are [time, channel, y, x].
struct Multicube {
    Tensor4<float> hr_dynamic;   // [t, 7, 128, 128]
    Tensor4<float> meso_dynamic; // [5t, 5, 80, 80]
    Grid<float> hr_static;       // [128, 128]
    Grid<float> meso_static;     // [80, 80]
    std::string cube_id;
    std::string tile;
    LatitudeBand latitude_band = LatitudeBand::south;
    int start_month = 1;

    std::size_t frames() const noexcept { return hr_dynamic.frames(); }

    /// Binary quality mask of frame t (1 = masked).
    Mask frame_mask(std::size_t t) const {
        Mask m(hr_dynamic.height(), hr_dynamic.width());
        auto src = hr_dynamic.plane(t, idx(HrChannel::quality_mask));
        auto dst = m.values();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= 0.5f ? 1 : 0;
        return m;
    }
};

/// Candidate forecasts for one cube, each [t_T, 4, 128, 128] in band order b, g, r, nir.
struct Prediction {
    std::string cube_id;
    std::vector<Tensor4<float>> trajectories;

    void validate() const {
        if (trajectories.empty()) throw ShapeError(cube_id + ": prediction has no trajectory");
        const auto& s0 = trajectories.front().shape();
        if (s0[1] != kBands) {
            throw ShapeError(cube_id + ": prediction must have 4 bands, got shape " + shape_string(s0));
        }
        for (const auto& t : trajectories) {
            if (t.shape() != s0) {
                throw ShapeError(cube_id + ": trajectory shapes differ (" + shape_string(s0) +
                                 " vs " + shape_string(t.shape()) + ")");
            }
        }
    }
};

enum class TrackName { iid, ood, extreme, seasonal };

struct TrackSpec {
    TrackName name;
    std::size_t context_frames;
    std::size_t target_frames;

    std::size_t total_frames() const noexcept { return context_frames + target_frames; }
    std::size_t meso_days() const noexcept { return kMesoDaysPerFrame * total_frames(); }

    static TrackSpec iid() { return {TrackName::iid, 10, 20}; }
    static TrackSpec ood() { return {TrackName::ood, 10, 20}; }
    static TrackSpec extreme() { return {TrackName::extreme, 20, 40}; }
    static TrackSpec seasonal() { return {TrackName::seasonal, 70, 140}; }

    static TrackSpec parse(std::string_view s) {
        if (s == "iid") return iid();
        if (s == "ood") return ood();
        if (s == "extreme") return extreme();
        if (s == "seasonal") return seasonal();
        throw InvalidArgument("unknown track '" + std::string(s) + "'");
    }
};

inline std::string_view to_string(TrackName n) {
    switch (n) {
    case TrackName::iid: return "iid";
    case TrackName::ood: return "ood";
    case TrackName::extreme: return "extreme";
    case TrackName::seasonal: return "seasonal";
    }
    return "?";
}

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Rescaled per-cube subscores; NaN marks a subscore without any valid datapoint.
struct SubscoreVector {
    double mad = kNaN;
    double ols = kNaN;
    double emd = kNaN;
    double ssim = kNaN;
    double ens = kNaN;
};

struct ScoreConfig {
    double sf_mad = 0.06649346971087526;
    double sf_ndvi = 0.10082047548620601;
    double sf_ssim = 10.31885115;
    double ssim_mask_threshold = 0.30;
    double ndvi_eps = 1e-8;
};

struct Violation {
    std::string field;
    std::string rule;
};

/// Checks every structural invariant of a cube. Empty result means valid.
inline std::vector<Violation> validate_cube(const Multicube& cube) {
    std::vector<Violation> out;
    const auto& hs = cube.hr_dynamic.shape();
    if (hs[1] != kHrChannels || hs[2] != kHrSize || hs[3] != kHrSize) {
        out.push_back({"hr_dynamic", "shape must be [t,7,128,128], got " + shape_string(hs)});
    }
    if (hs[0] == 0) out.push_back({"hr_dynamic", "at least one frame required"});
    const auto& ms = cube.meso_dynamic.shape();
    if (ms[1] != kMesoChannels || ms[2] != kMesoSize || ms[3] != kMesoSize) {
        out.push_back({"meso_dynamic", "shape must be [5t,5,80,80], got " + shape_string(ms)});
    }
    if (ms[0] != kMesoDaysPerFrame * hs[0]) {
        out.push_back({"meso_dynamic", "time length must be 5 x hr frames (" +
                                           std::to_string(kMesoDaysPerFrame * hs[0]) + "), got " +
                                           std::to_string(ms[0])});
    }
    if (cube.hr_static.height() != kHrSize || cube.hr_static.width() != kHrSize) {
        out.push_back({"hr_static", "shape must be [128,128]"});
    }
    if (cube.meso_static.height() != kMesoSize || cube.meso_static.width() != kMesoSize) {
        out.push_back({"meso_static", "shape must be [80,80]"});
    }
    if (cube.start_month < 1 || cube.start_month > 12) {
        out.push_back({"start_month", "must lie in 1..12"});
    }
    if (!out.empty()) return out;

    bool bad_reflectance = false;
    bool bad_mask = false;
    for (std::size_t t = 0; t < hs[0] && !(bad_reflectance && bad_mask); ++t) {
        for (std::size_t c = 0; c < kBands && !bad_reflectance; ++c) {
            for (float v : cube.hr_dynamic.plane(t, c)) {
                if (!std::isnan(v) && (v < 0.0f || v > 1.0f)) {
                    bad_reflectance = true;
                    break;
                }
            }
        }
        for (float v : cube.hr_dynamic.plane(t, idx(HrChannel::quality_mask))) {
            if (v != 0.0f && v != 1.0f) {
                bad_mask = true;
                break;
            }
        }
    }
    if (bad_reflectance) out.push_back({"hr_dynamic", "reflectance channels must lie in [0,1] or be NaN"});
    if (bad_mask) out.push_back({"hr_dynamic", "mask channel must be binary {0,1}"});
    return out;
}

/// The pieces of a cube a track exposes: what a model sees and what it is scored on.
struct TrackSlice {
    Tensor4<float> context;        // [t_C, 7, h, w]
    Tensor4<float> meso;           // [5 (t_C + t_T), 5, 80, 80]
    Tensor4<float> target;         // [t_T, 4, h, w]
    Tensor4<std::uint8_t> target_mask; // [t_T, 4, h, w], 1 = masked
};

/// Per-band mask for frames [first, first+count): the quality mask channel, plus any
/// position whose reflectance is NaN.
inline Tensor4<std::uint8_t> band_masks(const Tensor4<float>& hr, std::size_t first, std::size_t count) {
    Tensor4<std::uint8_t> m({count, kBands, hr.height(), hr.width()});
    for (std::size_t t = 0; t < count; ++t) {
        auto q = hr.plane(first + t, idx(HrChannel::quality_mask));
        for (std::size_t c = 0; c < kBands; ++c) {
            auto v = hr.plane(first + t, c);
            auto dst = m.plane(t, c);
            for (std::size_t i = 0; i < dst.size(); ++i) {
                dst[i] = (q[i] >= 0.5f || std::isnan(q[i]) || std::isnan(v[i])) ? 1 : 0;
            }
        }
    }
    return m;
}

inline TrackSlice slice_track(const Multicube& cube, const TrackSpec& track) {
    const std::size_t need = track.total_frames();
    if (cube.frames() < need) {
        throw InsufficientFrames(cube.cube_id + ": track " + std::string(to_string(track.name)) +
                                 " needs " + std::to_string(need) + " frames, cube has " +
                                 std::to_string(cube.frames()));
    }
    TrackSlice s;
    s.context = cube.hr_dynamic.frames_range(0, track.context_frames);
    const std::size_t meso_days = std::min(track.meso_days(), cube.meso_dynamic.frames());
    s.meso = cube.meso_dynamic.frames_range(0, meso_days);
    s.target = cube.hr_dynamic.frames_range(track.context_frames, track.target_frames)
                   .channel_range(0, kBands);
    s.target_mask = band_masks(cube.hr_dynamic, track.context_frames, track.target_frames);
    return s;
}

} // namespace ens
