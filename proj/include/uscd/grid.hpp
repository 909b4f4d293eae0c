#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "uscd/error.hpp"

namespace uscd {

/// Dense row-major H×W×C array. Pixel (x, y) is column x, row y.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int height, int width, int channels = 1, T fill = T{})
        : height_(height), width_(width), channels_(channels),
          data_(static_cast<std::size_t>(height) * width * channels, fill) {
        if (height < 0 || width < 0 || channels < 1) {
            throw ValidationError("grid dimensions must be non-negative");
        }
    }

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t pixels() const noexcept { return static_cast<std::size_t>(height_) * width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool same_shape(int height, int width) const noexcept {
        return height_ == height && width_ == width;
    }
    template <typename U>
    bool same_shape(const Grid<U>& other) const noexcept {
        return height_ == other.height() && width_ == other.width();
    }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    T& operator()(int x, int y, int c = 0) {
        assert(contains(x, y) && c < channels_);
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    const T& operator()(int x, int y, int c = 0) const {
        assert(contains(x, y) && c < channels_);
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    bool operator==(const Grid&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 1;
    std::vector<T> data_;
};

/// Binary mask, one byte per pixel holding 0 or 1.
using Mask = Grid<std::uint8_t>;
/// Per-pixel depth along the camera z axis; 0 marks "no surface".
using DepthMap = Grid<float>;
/// 8-bit sRGB image with 3 interleaved channels.
using RgbImage = Grid<std::uint8_t>;

inline std::size_t count(const Mask& m) {
    std::size_t n = 0;
    for (auto v : m.values()) n += v != 0;
    return n;
}

inline void require_same_shape(const Mask& a, const Mask& b, const char* what) {
    if (!a.same_shape(b)) throw ValidationError(std::string(what) + ": shape mismatch");
}

inline Mask mask_and(const Mask& a, const Mask& b) {
    require_same_shape(a, b, "mask_and");
    Mask out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
    return out;
}

inline Mask mask_or(const Mask& a, const Mask& b) {
    require_same_shape(a, b, "mask_or");
    Mask out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
    return out;
}

inline Mask mask_and_not(const Mask& a, const Mask& b) {
    require_same_shape(a, b, "mask_and_not");
    Mask out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && !b[i]) ? 1 : 0;
    return out;
}

/// True if every set pixel of `inner` is also set in `outer`.
inline bool is_subset(const Mask& inner, const Mask& outer) {
    require_same_shape(inner, outer, "is_subset");
    for (std::size_t i = 0; i < inner.size(); ++i) {
        if (inner[i] && !outer[i]) return false;
    }
    return true;
}

}  // namespace uscd
