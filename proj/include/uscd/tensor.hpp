#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "uscd/error.hpp"
#include "uscd/grid.hpp"

namespace uscd {

enum class DType : std::uint8_t { f32, f64, u8, boolean };

std::size_t dtype_size(DType dtype) noexcept;
/// NPY descriptor string, e.g. "<f4".
std::string_view dtype_descr(DType dtype) noexcept;
std::string_view dtype_name(DType dtype) noexcept;

template <typename T>
constexpr DType dtype_of() {
    if constexpr (std::is_same_v<T, float>) return DType::f32;
    else if constexpr (std::is_same_v<T, double>) return DType::f64;
    else if constexpr (std::is_same_v<T, std::uint8_t>) return DType::u8;
    else static_assert(sizeof(T) == 0, "unsupported element type");
}

inline constexpr std::size_t kMaxTensorRank = 4;

/// Raw little-endian, C-order tensor. The payload is kept as bytes so that a
/// read/write cycle is bit-exact, NaN payloads included.
class Tensor {
public:
    Tensor() = default;
    Tensor(DType dtype, std::vector<std::size_t> shape);
    Tensor(DType dtype, std::vector<std::size_t> shape, std::vector<std::byte> bytes);

    DType dtype() const noexcept { return dtype_; }
    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t element_count() const noexcept;
    std::span<const std::byte> bytes() const noexcept { return bytes_; }
    std::span<std::byte> bytes() noexcept { return bytes_; }

    /// Copies elements out; T must match dtype (bool tensors read as uint8).
    template <typename T>
    std::vector<T> to_vector() const {
        check_element<T>();
        std::vector<T> out(element_count());
        if (!out.empty()) std::memcpy(out.data(), bytes_.data(), bytes_.size());
        return out;
    }

    template <typename T>
    static Tensor from_vector(DType dtype, std::vector<std::size_t> shape, std::span<const T> values) {
        Tensor t(dtype, std::move(shape));
        t.check_element<T>();
        if (values.size() != t.element_count()) {
            throw ValidationError("tensor value count does not match shape");
        }
        if (!values.empty()) std::memcpy(t.bytes_.data(), values.data(), t.bytes_.size());
        return t;
    }

    bool operator==(const Tensor&) const = default;

private:
    template <typename T>
    void check_element() const {
        if (sizeof(T) != dtype_size(dtype_)) {
            throw ValidationError("element type does not match tensor dtype " +
                                  std::string(dtype_name(dtype_)));
        }
    }

    DType dtype_ = DType::f32;
    std::vector<std::size_t> shape_;
    std::vector<std::byte> bytes_;
};

/// Serializes in the NPY v1.0 layout (C order, little endian).
std::vector<std::byte> encode_npy(const Tensor& t);
Tensor decode_npy(std::span<const std::byte> file);

void write_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

// Grid <-> tensor conversions. Single-channel grids map to H×W, others to H×W×C.
Tensor grid_to_tensor(const Grid<float>& g);
Tensor mask_to_tensor(const Mask& m);
Tensor image_to_tensor(const RgbImage& img);
Grid<float> float_grid_from_tensor(const Tensor& t);
Mask mask_from_tensor(const Tensor& t);
RgbImage image_from_tensor(const Tensor& t);

}  // namespace uscd
