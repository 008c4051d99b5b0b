#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ens/cube_model.hpp"
#include "ens/error.hpp"
#include "ens/tensor.hpp"

namespace ens {

inline constexpr double kDefaultNdviEps = 1e-8;

inline double ndvi(double red, double nir, double eps = kDefaultNdviEps) { return (nir - red) / (nir + red + eps); }

inline Grid<float> ndvi(const Grid<float>& red, const Grid<float>& nir, double eps = kDefaultNdviEps) {
    if (red.height() != nir.height() || red.width() != nir.width()) {
        throw ShapeError("ndvi: red and nir frames differ in shape");
    }
    Grid<float> out(red.height(), red.width());
    auto r = red.values();
    auto n = nir.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = float(ndvi(r[i], n[i], eps));
    return out;
}

/// Sentinel-2 L2A scene classification codes.
enum class SceneClass : int {
    no_data = 0,
    saturated_or_defective = 1,
    dark_area = 2,
    cloud_shadow = 3,
    vegetation = 4,
    not_vegetated = 5,
    water = 6,
    cloud_low_probability = 7, // "unclassified" in later processor baselines
    cloud_medium_probability = 8,
    cloud_high_probability = 9,
    thin_cirrus = 10,
    snow = 11,
};

inline bool is_masked_scene_class(int code) {
    switch (static_cast<SceneClass>(code)) {
    case SceneClass::no_data:
    case SceneClass::saturated_or_defective:
    case SceneClass::dark_area:
    case SceneClass::cloud_shadow:
    case SceneClass::cloud_low_probability:
    case SceneClass::cloud_medium_probability:
    case SceneClass::cloud_high_probability:
    case SceneClass::thin_cirrus:
        return true;
    default:
        return false;
    }
}

inline int scene_code(float v) { return std::isfinite(v) ? int(std::lround(v)) : 0; }

// Binary morphology with a k x k square. Pixels outside the image count as 0 for
// both operations, so erosion never keeps a pixel whose window leaves the image.

namespace detail {

enum class MorphOp { erode, dilate };

inline void check_kernel(int k) {
    if (k < 1 || k % 2 == 0) throw InvalidArgument("morphology kernel size must be odd and positive, got " + std::to_string(k));
}

inline Mask morph(const Mask& in, int k, MorphOp op) {
    check_kernel(k);
    const std::ptrdiff_t h = std::ptrdiff_t(in.height());
    const std::ptrdiff_t w = std::ptrdiff_t(in.width());
    const std::ptrdiff_t r = k / 2;
    const bool erode = op == MorphOp::erode;
    Mask rows(in.height(), in.width());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            std::uint8_t acc = erode ? 1 : 0;
            for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
                const std::ptrdiff_t xx = x + dx;
                const std::uint8_t v = (xx >= 0 && xx < w) ? in(y, xx) : 0;
                acc = erode ? std::min(acc, v) : std::max(acc, v);
            }
            rows(y, x) = acc;
        }
    }
    Mask out(in.height(), in.width());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            std::uint8_t acc = erode ? 1 : 0;
            for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
                const std::ptrdiff_t yy = y + dy;
                const std::uint8_t v = (yy >= 0 && yy < h) ? rows(yy, x) : 0;
                acc = erode ? std::min(acc, v) : std::max(acc, v);
            }
            out(y, x) = acc;
        }
    }
    return out;
}

} // namespace detail

inline Mask erode(const Mask& m, int k) { return detail::morph(m, k, detail::MorphOp::erode); }
inline Mask dilate(const Mask& m, int k) { return detail::morph(m, k, detail::MorphOp::dilate); }

/// Spectral and scene-class rules for one pixel, before morphology.
struct PixelRule {
    static bool masked(float blue, float green, float red, float nir, float scl) {
        if (!std::isfinite(blue) || !std::isfinite(green) || !std::isfinite(red) || !std::isfinite(nir)) return true;
        const int code = scene_code(scl);
        if (is_masked_scene_class(code)) return true;
        if (double(red) + green + blue > 0.435 && double(blue) + 0.03 > green) return true;
        if (double(blue) > 0.35) return true;
        return false;
    }
};

struct QualityMaskParams {
    int erode_kernel = 3;
    int dilate_kernel = 7;
};

/// Per-pixel rule mask, then erosion, then dilation.
inline Mask build_quality_mask(std::span<const float> blue, std::span<const float> green, std::span<const float> red,
                               std::span<const float> nir, std::span<const float> scl, std::size_t height,
                               std::size_t width, const QualityMaskParams& p = {}) {
    const std::size_t n = height * width;
    if (blue.size() != n || green.size() != n || red.size() != n || nir.size() != n || scl.size() != n) {
        throw ShapeError("build_quality_mask: channel sizes do not match frame shape");
    }
    Mask raw(height, width);
    auto dst = raw.values();
    for (std::size_t i = 0; i < n; ++i) dst[i] = PixelRule::masked(blue[i], green[i], red[i], nir[i], scl[i]) ? 1 : 0;
    return dilate(erode(raw, p.erode_kernel), p.dilate_kernel);
}

/// Quality mask of frame t of a [t, 7, h, w] high-resolution array.
inline Mask build_quality_mask(const Tensor4<float>& hr, std::size_t t, const QualityMaskParams& p = {}) {
    return build_quality_mask(hr.plane(t, idx(HrChannel::blue)), hr.plane(t, idx(HrChannel::green)),
                              hr.plane(t, idx(HrChannel::red)), hr.plane(t, idx(HrChannel::nir)),
                              hr.plane(t, idx(HrChannel::scene_class)), hr.height(), hr.width(), p);
}

/// Recomputes the quality mask channel of every frame in place.
inline void apply_quality_mask(Multicube& cube, const QualityMaskParams& p = {}) {
    for (std::size_t t = 0; t < cube.frames(); ++t) {
        auto m = build_quality_mask(cube.hr_dynamic, t, p);
        auto dst = cube.hr_dynamic.plane(t, idx(HrChannel::quality_mask));
        auto src = m.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i];
    }
}

} // namespace ens
