#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ens/cube_model.hpp"
#include "ens/error.hpp"
#include "ens/ndvi_masking.hpp"
#include "ens/numeric.hpp"
#include "ens/tensor.hpp"

namespace ens {

/// Target, mask (1 = masked) and prediction, each [t, 4, h, w] in band order b, g, r, nir.
struct ScoreInput {
    const Tensor4<float>& target;
    const Tensor4<std::uint8_t>& mask;
    const Tensor4<float>& pred;

    void check() const {
        if (target.shape() != mask.shape() || target.shape() != pred.shape()) {
            throw ShapeError("score input shapes differ: target " + shape_string(target.shape()) + ", mask " +
                             shape_string(mask.shape()) + ", prediction " + shape_string(pred.shape()));
        }
        if (target.channels() != kBands) throw ShapeError("score input must have 4 bands");
    }

    /// A target value counts only if unmasked and finite.
    bool valid(std::size_t i) const { return mask.values()[i] == 0 && std::isfinite(target.values()[i]); }
};

// ---------------------------------------------------------------------------
// Building blocks

/// Median of |P - T| over valid positions of every band; nullopt if there are none.
inline std::optional<double> median_absolute_deviation(const ScoreInput& in) {
    in.check();
    const auto t = in.target.values();
    const auto p = in.pred.values();
    std::vector<double> dev;
    dev.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (in.valid(i)) dev.push_back(std::abs(double(p[i]) - double(t[i])));
    }
    if (dev.empty()) return std::nullopt;
    return median_inplace(dev);
}

/// Least-squares slope of y on x via centred sums. Requires at least two distinct x.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double mx = 0.0;
    for (std::size_t i = 0; i < n; ++i) mx += x[i];
    mx /= double(n);
    // y is taken relative to y[0] rather than its mean: a flat series then gives an
    // exact zero, which matters once the distance is raised to a small power.
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        sxy += dx * (y[i] - y[0]);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

/// Wasserstein-1 distance between two empirical distributions with uniform weights,
/// integrated over the quantile axis: sum of |Fa^-1(u) - Fb^-1(u)| over the merged
/// breakpoints i/n and j/m.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw InvalidArgument("wasserstein1 needs two non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const std::size_t n = a.size(), m = b.size();
    // Breakpoints in units of 1/(n*m): a steps every m, b steps every n.
    std::size_t i = 0, j = 0, u = 0;
    double total = 0.0;
    while (i < n && j < m) {
        const std::size_t next_a = (i + 1) * m;
        const std::size_t next_b = (j + 1) * n;
        const std::size_t next = std::min(next_a, next_b);
        total += std::abs(a[i] - b[j]) * double(next - u);
        u = next;
        if (next_a == next) ++i;
        if (next_b == next) ++j;
    }
    return total / double(n * m);
}

struct SsimParams {
    int window = 7;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

/// Mean SSIM of two h x w images: uniform window, sample-covariance normalisation,
/// averaged over window positions that lie fully inside the image.
inline double ssim_image(std::span<const double> x, std::span<const double> y, std::size_t h, std::size_t w,
                         const SsimParams& p = {}) {
    const std::size_t k = std::size_t(p.window);
    if (h < k || w < k) throw ShapeError("ssim: image smaller than the window");
    const std::size_t oh = h - k + 1, ow = w - k + 1;
    const double np = double(k * k);
    const double cov_norm = np / (np - 1.0);
    const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
    const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);

    // Horizontal window sums of x, y, xx, yy, xy.
    std::vector<double> hs(5 * h * ow, 0.0);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
            double s[5] = {0, 0, 0, 0, 0};
            for (std::size_t d = 0; d < k; ++d) {
                const double a = x[r * w + c + d];
                const double b = y[r * w + c + d];
                s[0] += a;
                s[1] += b;
                s[2] += a * a;
                s[3] += b * b;
                s[4] += a * b;
            }
            for (int q = 0; q < 5; ++q) hs[(q * h + r) * ow + c] = s[q];
        }
    }
    double total = 0.0;
    for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
            double s[5] = {0, 0, 0, 0, 0};
            for (int q = 0; q < 5; ++q) {
                for (std::size_t d = 0; d < k; ++d) s[q] += hs[(q * h + r + d) * ow + c];
            }
            const double ux = s[0] / np, uy = s[1] / np;
            const double uxx = s[2] / np, uyy = s[3] / np, uxy = s[4] / np;
            const double vx = cov_norm * (uxx - ux * ux);
            const double vy = cov_norm * (uyy - uy * uy);
            const double vxy = cov_norm * (uxy - ux * uy);
            const double num = (2.0 * ux * uy + c1) * (2.0 * vxy + c2);
            const double den = (ux * ux + uy * uy + c1) * (vx + vy + c2);
            total += num / den;
        }
    }
    return total / double(oh * ow);
}

/// NDVI of every (t, y, x) of a [t, 4, h, w] band array, laid out [t][y*w+x].
inline std::vector<double> ndvi_series(const Tensor4<float>& bands, double eps) {
    const std::size_t fs = bands.frame_size();
    std::vector<double> out(bands.frames() * fs);
    for (std::size_t t = 0; t < bands.frames(); ++t) {
        auto r = bands.plane(t, idx(HrChannel::red));
        auto n = bands.plane(t, idx(HrChannel::nir));
        for (std::size_t i = 0; i < fs; ++i) out[t * fs + i] = ndvi(r[i], n[i], eps);
    }
    return out;
}

/// Per-(t, pixel) validity for NDVI: red and nir both unmasked and finite.
inline std::vector<std::uint8_t> ndvi_validity(const ScoreInput& in) {
    const std::size_t fs = in.target.frame_size();
    std::vector<std::uint8_t> ok(in.target.frames() * fs);
    const std::size_t red = idx(HrChannel::red), nir = idx(HrChannel::nir);
    for (std::size_t t = 0; t < in.target.frames(); ++t) {
        const std::size_t rb = in.target.index(t, red, 0, 0);
        const std::size_t nb = in.target.index(t, nir, 0, 0);
        for (std::size_t i = 0; i < fs; ++i) ok[t * fs + i] = in.valid(rb + i) && in.valid(nb + i);
    }
    return ok;
}

// ---------------------------------------------------------------------------
// Subscores

inline double mad_score(const ScoreInput& in, const ScoreConfig& cfg = {}) {
    const auto mad = median_absolute_deviation(in);
    if (!mad) return kNaN;
    return 1.0 - std::pow(*mad, cfg.sf_mad);
}

/// Per-pixel slope distance |b_pred - b_targ| / 2 for every pixel with at least two
/// valid target timesteps; NaN elsewhere. Both fits use time mapped affinely so the
/// first and last valid target timestep land on 0 and 2.
inline std::vector<double> ols_distances(const ScoreInput& in, const ScoreConfig& cfg = {}) {
    in.check();
    const std::size_t frames = in.target.frames();
    const std::size_t fs = in.target.frame_size();
    const auto targ = ndvi_series(in.target, cfg.ndvi_eps);
    const auto pred = ndvi_series(in.pred, cfg.ndvi_eps);
    const auto ok = ndvi_validity(in);
    std::vector<double> out(fs, kNaN);
    std::vector<double> tx, ty, px, py;
    for (std::size_t i = 0; i < fs; ++i) {
        tx.clear();
        ty.clear();
        std::size_t first = frames, last = 0;
        for (std::size_t t = 0; t < frames; ++t) {
            if (!ok[t * fs + i]) continue;
            first = std::min(first, t);
            last = t;
            tx.push_back(double(t));
            ty.push_back(targ[t * fs + i]);
        }
        if (tx.size() < 2 || first == last) continue;
        const double span = double(last - first);
        for (double& x : tx) x = 2.0 * (x - double(first)) / span;
        px.clear();
        py.clear();
        for (std::size_t t = first; t <= last; ++t) {
            px.push_back(2.0 * double(t - first) / span);
            py.push_back(pred[t * fs + i]);
        }
        const double bt = std::clamp(ols_slope(tx, ty), -1.0, 1.0);
        const double bp = std::clamp(ols_slope(px, py), -1.0, 1.0);
        out[i] = std::abs(bp - bt) / 2.0;
    }
    return out;
}

inline double ols_score(const ScoreInput& in, const ScoreConfig& cfg = {}) {
    const auto d = ols_distances(in, cfg);
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : d) {
        if (std::isnan(v)) continue;
        sum += std::pow(v, cfg.sf_ndvi);
        ++n;
    }
    if (n == 0) return kNaN;
    return 1.0 - sum / double(n);
}

/// Per-pixel W1 between valid target NDVI values and all predicted NDVI values; NaN
/// for pixels without any valid target value.
inline std::vector<double> emd_distances(const ScoreInput& in, const ScoreConfig& cfg = {}) {
    in.check();
    const std::size_t frames = in.target.frames();
    const std::size_t fs = in.target.frame_size();
    const auto targ = ndvi_series(in.target, cfg.ndvi_eps);
    const auto pred = ndvi_series(in.pred, cfg.ndvi_eps);
    const auto ok = ndvi_validity(in);
    std::vector<double> out(fs, kNaN);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < fs; ++i) {
        a.clear();
        b.clear();
        for (std::size_t t = 0; t < frames; ++t) {
            if (ok[t * fs + i]) a.push_back(targ[t * fs + i]);
            b.push_back(pred[t * fs + i]);
        }
        if (a.empty()) continue;
        out[i] = wasserstein1(a, b);
    }
    return out;
}

inline double emd_score(const ScoreInput& in, const ScoreConfig& cfg = {}) {
    const auto d = emd_distances(in, cfg);
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : d) {
        if (std::isnan(v)) continue;
        sum += std::min(1.0, std::pow(v, cfg.sf_ndvi));
        ++n;
    }
    if (n == 0) return kNaN;
    return 1.0 - sum / double(n);
}

/// Mean SSIM over every (t, band) frame whose target is masked below the threshold,
/// with masked target pixels replaced by the prediction; nullopt if no frame qualifies.
inline std::optional<double> mean_ssim(const ScoreInput& in, const ScoreConfig& cfg = {}, const SsimParams& p = {}) {
    in.check();
    const std::size_t fs = in.target.frame_size();
    std::vector<double> x(fs), y(fs);
    double total = 0.0;
    std::size_t admitted = 0;
    for (std::size_t t = 0; t < in.target.frames(); ++t) {
        for (std::size_t c = 0; c < in.target.channels(); ++c) {
            const std::size_t base = in.target.index(t, c, 0, 0);
            const auto tv = in.target.plane(t, c);
            const auto pv = in.pred.plane(t, c);
            std::size_t masked = 0;
            for (std::size_t i = 0; i < fs; ++i) {
                const bool valid = in.valid(base + i);
                masked += !valid;
                y[i] = pv[i];
                x[i] = valid ? double(tv[i]) : double(pv[i]);
            }
            if (double(masked) / double(fs) >= cfg.ssim_mask_threshold) continue;
            total += ssim_image(x, y, in.target.height(), in.target.width(), p);
            ++admitted;
        }
    }
    if (admitted == 0) return std::nullopt;
    return total / double(admitted);
}

inline double rescale_ssim(double raw_mean_ssim, const ScoreConfig& cfg = {}) {
    return std::pow(std::clamp(raw_mean_ssim, 0.0, 1.0), cfg.sf_ssim);
}

inline double ssim_score(const ScoreInput& in, const ScoreConfig& cfg = {}) {
    const auto s = mean_ssim(in, cfg);
    if (!s) return kNaN;
    return rescale_ssim(*s, cfg);
}

} // namespace ens
