#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ens/random.hpp"
#include "ens/tensor.hpp"

namespace fixture {

// Bands in a plausible reflectance range, mask with the given masked share.
struct Scored {
    ens::Tensor4<float> target, pred;
    ens::Tensor4<std::uint8_t> mask;
};

inline Scored random_input(std::uint64_t seed, std::size_t t, std::size_t h, std::size_t w, double masked_share) {
    ens::Rng r(seed);
    Scored s{ens::Tensor4<float>({t, 4, h, w}), ens::Tensor4<float>({t, 4, h, w}),
             ens::Tensor4<std::uint8_t>({t, 4, h, w})};
    for (auto& v : s.target.values()) v = float(0.02 + 0.5 * r.uniform());
    for (auto& v : s.pred.values()) v = float(0.02 + 0.5 * r.uniform());
    // masks are per pixel and frame, shared by the four bands
    const std::size_t fs = h * w;
    for (std::size_t k = 0; k < t; ++k) {
        for (std::size_t i = 0; i < fs; ++i) {
            const std::uint8_t m = r.uniform() < masked_share;
            for (std::size_t c = 0; c < 4; ++c) s.mask.plane(k, c)[i] = m;
        }
    }
    return s;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        ens::Rng r(std::hash<std::string>{}(tag) ^ std::uint64_t(reinterpret_cast<std::uintptr_t>(this)));
        path_ = std::filesystem::temp_directory_path() / ("ens_" + tag + "_" + std::to_string(r.next() % 1000000007));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

} // namespace fixture
