#pragma once

#include <string>
#include <string_view>

#include "uscd/grid.hpp"

namespace uscd {

inline constexpr double kGrayGapThreshold = 0.12;
inline constexpr double kHistGapThreshold = 0.08;
inline constexpr double kDefaultSigmaFrac = 0.1;
inline constexpr double kRetinexEps = 1e-3;

/// Requested preprocessing. `automatic` picks Retinex when the pair's
/// illumination gap crosses a threshold and passes through otherwise.
enum class IlluminationMethod { automatic, none, retinex, color_transfer };

IlluminationMethod parse_illumination_method(std::string_view name);
std::string_view to_string(IlluminationMethod m);

struct IlluminationReport {
    double gray_gap = 0.0;  ///< |mean luma 1 - mean luma 2|, luma in [0, 1]
    double hist_gap = 0.0;  ///< mean per-channel EMD between 256-bin histograms, in [0, 1]
    bool triggered = false;
    IlluminationMethod method = IlluminationMethod::none;  ///< what was applied
};

IlluminationReport illumination_gap(const RgbImage& a, const RgbImage& b);

/// Separable Gaussian blur of a single-channel float image (mirrored borders).
Grid<float> gaussian_blur(const Grid<float>& src, double sigma);

/// Single-scale Retinex log reflectance, log(I + eps) - log(G_sigma * I + eps),
/// with I in [0, 1] and sigma = sigma_frac·min(H, W). Returns H×W×3.
Grid<float> retinex_reflectance(const RgbImage& img, double sigma_frac = kDefaultSigmaFrac);

/// Retinex reflectance stretched per channel from its 1st/99th percentiles to [0, 255].
RgbImage retinex(const RgbImage& img, double sigma_frac = kDefaultSigmaFrac);

/// RGB (0..255) to Reinhard lαβ, per pixel; returns H×W×3.
Grid<float> rgb_to_lab(const RgbImage& img);
RgbImage lab_to_rgb(const Grid<float>& lab);

/// Reinhard statistics transfer of `src` toward the colour distribution of `ref`.
RgbImage color_transfer(const RgbImage& src, const RgbImage& ref);

struct PreprocessedPair {
    RgbImage image_1;
    RgbImage image_2;
    IlluminationReport report;
};

/// Prepares the pair for reconstruction only. Colour transfer maps image 2
/// toward image 1 and leaves image 1 untouched.
PreprocessedPair preprocess_pair(const RgbImage& image_1, const RgbImage& image_2, IlluminationMethod method,
                                 double sigma_frac = kDefaultSigmaFrac);

}  // namespace uscd
