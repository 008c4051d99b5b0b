#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ens/cube_model.hpp"
#include "ens/error.hpp"
#include "ens/tensor.hpp"

namespace ens {

enum class BaselineMode { mean, last_valid };

inline BaselineMode parse_baseline_mode(std::string_view s) {
    if (s == "mean") return BaselineMode::mean;
    if (s == "last_valid" || s == "last-valid") return BaselineMode::last_valid;
    throw InvalidArgument("unknown baseline mode '" + std::string(s) + "'");
}

/// Persistence forecast from context bands [t_C, 4, h, w] and their masks (1 = masked):
/// each pixel's cloud-free context mean (or last cloud-free value) repeated over
/// `target_frames`. A pixel never seen clear takes the band's mean over the clear
/// pixels of the last context frame, or failing that the mean of the per-pixel values
/// of that band, or 0 when the band is never clear.
inline Tensor4<float> persistence_predict(const Tensor4<float>& bands, const Tensor4<std::uint8_t>& masks,
                                          std::size_t target_frames, BaselineMode mode = BaselineMode::mean) {
    if (bands.shape() != masks.shape()) throw ShapeError("baseline: context and mask shapes differ");
    if (bands.frames() == 0) throw InsufficientFrames("baseline: at least one context frame is required");
    const std::size_t T = bands.frames(), C = bands.channels(), fs = bands.frame_size();
    Tensor4<float> out({target_frames, C, bands.height(), bands.width()});
    std::vector<double> sum(fs);
    std::vector<std::size_t> count(fs);
    std::size_t seen_bands = 0;
    for (std::size_t c = 0; c < C; ++c) {
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(count.begin(), count.end(), 0);
        for (std::size_t t = 0; t < T; ++t) {
            const auto v = bands.plane(t, c);
            const auto m = masks.plane(t, c);
            for (std::size_t i = 0; i < fs; ++i) {
                if (m[i] || !std::isfinite(v[i])) continue;
                if (mode == BaselineMode::mean) {
                    sum[i] += v[i];
                    ++count[i];
                } else {
                    sum[i] = v[i];
                    count[i] = 1;
                }
            }
        }

        double fallback = 0.0;
        {
            const auto v = bands.plane(T - 1, c);
            const auto m = masks.plane(T - 1, c);
            double s = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < fs; ++i) {
                if (!m[i] && std::isfinite(v[i])) s += v[i], ++n;
            }
            if (n > 0) {
                fallback = s / double(n);
            } else {
                for (std::size_t i = 0; i < fs; ++i) {
                    if (count[i]) s += sum[i] / double(count[i]), ++n;
                }
                if (n > 0) fallback = s / double(n);
            }
        }

        bool any = false;
        auto first = out.plane(0, c);
        for (std::size_t i = 0; i < fs; ++i) {
            any = any || count[i] > 0;
            first[i] = float(count[i] ? sum[i] / double(count[i]) : fallback);
        }
        seen_bands += any;
        for (std::size_t t = 1; t < target_frames; ++t) {
            auto dst = out.plane(t, c);
            std::copy(first.begin(), first.end(), dst.begin());
        }
    }
    if (seen_bands == 0) throw AllMasked("baseline: every context pixel of every band is masked");
    return out;
}

/// Baseline from the context part of a [t, 7, h, w] high-resolution array.
inline Tensor4<float> persistence_predict(const Tensor4<float>& hr_context, std::size_t target_frames,
                                          BaselineMode mode = BaselineMode::mean) {
    if (hr_context.channels() != kHrChannels) throw ShapeError("baseline: context must have 7 channels");
    return persistence_predict(hr_context.channel_range(0, kBands), band_masks(hr_context, 0, hr_context.frames()),
                               target_frames, mode);
}

inline Prediction persistence_prediction(const Multicube& cube, const TrackSpec& track,
                                         BaselineMode mode = BaselineMode::mean) {
    if (cube.frames() < track.context_frames) {
        throw InsufficientFrames(cube.cube_id + ": needs " + std::to_string(track.context_frames) +
                                 " context frames, cube has " + std::to_string(cube.frames()));
    }
    Prediction p;
    p.cube_id = cube.cube_id;
    p.trajectories.push_back(
        persistence_predict(cube.hr_dynamic.frames_range(0, track.context_frames), track.target_frames, mode));
    return p;
}

} // namespace ens
