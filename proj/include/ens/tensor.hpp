#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ens/error.hpp"

namespace ens {

/// Dense row-major 2-D raster.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(std::size_t height, std::size_t width, T fill = T{})
        : height_(height), width_(width), data_(height * width, fill) {}

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }

    T& operator()(std::size_t y, std::size_t x) { return data_[y * width_ + x]; }
    const T& operator()(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    bool operator==(const Grid&) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

/// Dense 4-D array indexed [time, channel, y, x], row-major.
template <typename T>
class Tensor4 {
public:
    using Shape = std::array<std::size_t, 4>;

    Tensor4() = default;
    explicit Tensor4(Shape shape, T fill = T{})
        : shape_(shape), data_(shape[0] * shape[1] * shape[2] * shape[3], fill) {}

    const Shape& shape() const noexcept { return shape_; }
    std::size_t frames() const noexcept { return shape_[0]; }
    std::size_t channels() const noexcept { return shape_[1]; }
    std::size_t height() const noexcept { return shape_[2]; }
    std::size_t width() const noexcept { return shape_[3]; }
    std::size_t frame_size() const noexcept { return shape_[2] * shape_[3]; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t index(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return ((t * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
    }

    T& operator()(std::size_t t, std::size_t c, std::size_t y, std::size_t x) {
        return data_[index(t, c, y, x)];
    }
    const T& operator()(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[index(t, c, y, x)];
    }

    /// One (time, channel) image as a flat h*w span.
    std::span<T> plane(std::size_t t, std::size_t c) {
        return std::span<T>(data_).subspan(index(t, c, 0, 0), frame_size());
    }
    std::span<const T> plane(std::size_t t, std::size_t c) const {
        return std::span<const T>(data_).subspan(index(t, c, 0, 0), frame_size());
    }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    /// Frames [first, first+count) of every channel.
    Tensor4 frames_range(std::size_t first, std::size_t count) const {
        if (first + count > shape_[0]) {
            throw ShapeError("frame range [" + std::to_string(first) + ", " +
                             std::to_string(first + count) + ") exceeds " +
                             std::to_string(shape_[0]) + " frames");
        }
        Tensor4 out({count, shape_[1], shape_[2], shape_[3]});
        const std::size_t stride = shape_[1] * frame_size();
        std::copy(data_.begin() + first * stride, data_.begin() + (first + count) * stride,
                  out.data_.begin());
        return out;
    }

    /// Channels [first, first+count) of every frame.
    Tensor4 channel_range(std::size_t first, std::size_t count) const {
        if (first + count > shape_[1]) {
            throw ShapeError("channel range exceeds " + std::to_string(shape_[1]) + " channels");
        }
        Tensor4 out({shape_[0], count, shape_[2], shape_[3]});
        for (std::size_t t = 0; t < shape_[0]; ++t) {
            for (std::size_t c = 0; c < count; ++c) {
                auto src = plane(t, first + c);
                std::copy(src.begin(), src.end(), out.plane(t, c).begin());
            }
        }
        return out;
    }

    bool operator==(const Tensor4&) const = default;

private:
    Shape shape_{0, 0, 0, 0};
    std::vector<T> data_;
};

inline std::string shape_string(const std::array<std::size_t, 4>& s) {
    return "[" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) +
           "," + std::to_string(s[3]) + "]";
}

} // namespace ens
