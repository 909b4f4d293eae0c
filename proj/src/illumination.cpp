#include "uscd/illumination.hpp"

#include <Eigen/Core>
#include <Eigen/LU>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace uscd {

namespace {

constexpr int kBins = 256;
constexpr double kLmsFloor = 1e-3;

void require_rgb(const RgbImage& img, const char* what) {
    if (img.channels() != 3) throw ValidationError(std::string(what) + ": image must have 3 channels");
}

double luma(const RgbImage& img, int x, int y) {
    return (0.299 * img(x, y, 0) + 0.587 * img(x, y, 1) + 0.114 * img(x, y, 2)) / 255.0;
}

std::array<double, kBins> channel_cdf(const RgbImage& img, int c) {
    std::array<double, kBins> hist{};
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) hist[img(x, y, c)] += 1.0;
    }
    const double n = static_cast<double>(img.pixels());
    double acc = 0.0;
    for (auto& h : hist) {
        acc += h;
        h = acc / n;
    }
    return hist;
}

int mirror(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = std::abs(i) % period;
    return i >= n ? period - i : i;
}

// Linear interpolation between order statistics.
double percentile(std::vector<float> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (static_cast<double>(v[hi]) - v[lo]);
}

const Eigen::Matrix3d& rgb_to_lms() {
    static const Eigen::Matrix3d m = (Eigen::Matrix3d() << 0.3811, 0.5783, 0.0402,  //
                                      0.1967, 0.7244, 0.0782,                        //
                                      0.0241, 0.1288, 0.8444)
                                         .finished();
    return m;
}

const Eigen::Matrix3d& log_lms_to_lab() {
    static const Eigen::Matrix3d m =
        (Eigen::Vector3d(1.0 / std::sqrt(3.0), 1.0 / std::sqrt(6.0), 1.0 / std::sqrt(2.0)).asDiagonal() *
         (Eigen::Matrix3d() << 1, 1, 1, 1, 1, -2, 1, -1, 0).finished());
    return m;
}

std::uint8_t to_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

IlluminationMethod parse_illumination_method(std::string_view name) {
    if (name == "auto") return IlluminationMethod::automatic;
    if (name == "none") return IlluminationMethod::none;
    if (name == "retinex") return IlluminationMethod::retinex;
    if (name == "color-transfer" || name == "color_transfer") return IlluminationMethod::color_transfer;
    throw ValidationError("unknown illumination method '" + std::string(name) + "'");
}

std::string_view to_string(IlluminationMethod m) {
    switch (m) {
        case IlluminationMethod::automatic: return "auto";
        case IlluminationMethod::none: return "none";
        case IlluminationMethod::retinex: return "retinex";
        case IlluminationMethod::color_transfer: return "color-transfer";
    }
    return "none";
}

IlluminationReport illumination_gap(const RgbImage& a, const RgbImage& b) {
    require_rgb(a, "illumination_gap");
    require_rgb(b, "illumination_gap");
    if (!a.same_shape(b)) throw ValidationError("illumination_gap: image dimensions differ");
    if (a.pixels() == 0) throw ValidationError("illumination_gap: empty images");

    double sum_a = 0.0;
    double sum_b = 0.0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            sum_a += luma(a, x, y);
            sum_b += luma(b, x, y);
        }
    }
    const double n = static_cast<double>(a.pixels());

    IlluminationReport r;
    r.gray_gap = std::abs(sum_a - sum_b) / n;
    double emd_total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const auto ca = channel_cdf(a, c);
        const auto cb = channel_cdf(b, c);
        double emd = 0.0;
        for (int k = 0; k < kBins; ++k) emd += std::abs(ca[k] - cb[k]);
        emd_total += emd / kBins;
    }
    r.hist_gap = emd_total / 3.0;
    r.triggered = r.gray_gap > kGrayGapThreshold || r.hist_gap > kHistGapThreshold;
    return r;
}

Grid<float> gaussian_blur(const Grid<float>& src, double sigma) {
    if (src.channels() != 1) throw ValidationError("gaussian_blur expects a single channel");
    if (!(sigma > 0.0)) return src;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-(k * k) / (2.0 * sigma * sigma));
        total += kernel[k + radius];
    }
    for (auto& k : kernel) k /= total;

    const int h = src.height();
    const int w = src.width();
    Grid<double> tmp(h, w, 1, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * src(mirror(x + k, w), y);
            tmp(x, y) = acc;
        }
    }
    Grid<float> out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp(x, mirror(y + k, h));
            out(x, y) = static_cast<float>(acc);
        }
    }
    return out;
}

Grid<float> retinex_reflectance(const RgbImage& img, double sigma_frac) {
    require_rgb(img, "retinex");
    if (!(sigma_frac > 0.0 && sigma_frac < 1.0)) throw ValidationError("retinex: sigma_frac must lie in (0, 1)");
    const int h = img.height();
    const int w = img.width();
    const double sigma = sigma_frac * std::min(h, w);
    Grid<float> out(h, w, 3);
    for (int c = 0; c < 3; ++c) {
        Grid<float> chan(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) chan(x, y) = static_cast<float>(img(x, y, c) / 255.0);
        }
        const Grid<float> blurred = gaussian_blur(chan, sigma);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                out(x, y, c) = static_cast<float>(std::log(chan(x, y) + kRetinexEps) -
                                                  std::log(blurred(x, y) + kRetinexEps));
            }
        }
    }
    return out;
}

RgbImage retinex(const RgbImage& img, double sigma_frac) {
    const Grid<float> r = retinex_reflectance(img, sigma_frac);
    RgbImage out(img.height(), img.width(), 3);
    if (out.empty()) return out;
    for (int c = 0; c < 3; ++c) {
        std::vector<float> values;
        values.reserve(img.pixels());
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < img.width(); ++x) values.push_back(r(x, y, c));
        }
        const double lo = percentile(values, 0.01);
        const double hi = percentile(std::move(values), 0.99);
        const double span = hi - lo;
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < img.width(); ++x) {
                // A flat channel has nothing to stretch and maps to mid-gray.
                out(x, y, c) = span > 1e-6 ? to_u8((r(x, y, c) - lo) / span * 255.0) : std::uint8_t{128};
            }
        }
    }
    return out;
}

Grid<float> rgb_to_lab(const RgbImage& img) {
    require_rgb(img, "rgb_to_lab");
    Grid<float> lab(img.height(), img.width(), 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Eigen::Vector3d rgb(img(x, y, 0) / 255.0, img(x, y, 1) / 255.0, img(x, y, 2) / 255.0);
            Eigen::Vector3d lms = rgb_to_lms() * rgb;
            for (int c = 0; c < 3; ++c) lms[c] = std::log10(std::max(lms[c], kLmsFloor));
            const Eigen::Vector3d v = log_lms_to_lab() * lms;
            for (int c = 0; c < 3; ++c) lab(x, y, c) = static_cast<float>(v[c]);
        }
    }
    return lab;
}

RgbImage lab_to_rgb(const Grid<float>& lab) {
    if (lab.channels() != 3) throw ValidationError("lab_to_rgb expects 3 channels");
    static const Eigen::Matrix3d lab_to_log_lms = log_lms_to_lab().inverse();
    static const Eigen::Matrix3d lms_to_rgb = rgb_to_lms().inverse();
    RgbImage out(lab.height(), lab.width(), 3);
    for (int y = 0; y < lab.height(); ++y) {
        for (int x = 0; x < lab.width(); ++x) {
            Eigen::Vector3d lms = lab_to_log_lms * Eigen::Vector3d(lab(x, y, 0), lab(x, y, 1), lab(x, y, 2));
            for (int c = 0; c < 3; ++c) lms[c] = std::pow(10.0, lms[c]);
            const Eigen::Vector3d rgb = lms_to_rgb * lms * 255.0;
            for (int c = 0; c < 3; ++c) out(x, y, c) = to_u8(rgb[c]);
        }
    }
    return out;
}

RgbImage color_transfer(const RgbImage& src, const RgbImage& ref) {
    require_rgb(src, "color_transfer");
    require_rgb(ref, "color_transfer");
    if (src.pixels() == 0 || ref.pixels() == 0) throw ValidationError("color_transfer: empty image");
    Grid<float> lab_src = rgb_to_lab(src);
    const Grid<float> lab_ref = rgb_to_lab(ref);

    auto stats = [](const Grid<float>& g, int c) {
        double sum = 0.0;
        for (std::size_t i = c; i < g.size(); i += 3) sum += g[i];
        const double n = static_cast<double>(g.pixels());
        const double mean = sum / n;
        double ss = 0.0;
        for (std::size_t i = c; i < g.size(); i += 3) ss += (g[i] - mean) * (g[i] - mean);
        return std::pair{mean, std::sqrt(ss / n)};
    };

    for (int c = 0; c < 3; ++c) {
        const auto [mu_s, sd_s] = stats(lab_src, c);
        const auto [mu_r, sd_r] = stats(lab_ref, c);
        for (std::size_t i = c; i < lab_src.size(); i += 3) {
            // Zero spread in the source: nothing to scale, take the reference mean.
            lab_src[i] = sd_s > 1e-12 ? static_cast<float>((lab_src[i] - mu_s) * (sd_r / sd_s) + mu_r)
                                      : static_cast<float>(mu_r);
        }
    }
    return lab_to_rgb(lab_src);
}

PreprocessedPair preprocess_pair(const RgbImage& image_1, const RgbImage& image_2, IlluminationMethod method,
                                 double sigma_frac) {
    PreprocessedPair out;
    out.report = illumination_gap(image_1, image_2);
    IlluminationMethod applied = method;
    if (method == IlluminationMethod::automatic) {
        applied = out.report.triggered ? IlluminationMethod::retinex : IlluminationMethod::none;
    }
    switch (applied) {
        case IlluminationMethod::retinex:
            out.image_1 = retinex(image_1, sigma_frac);
            out.image_2 = retinex(image_2, sigma_frac);
            break;
        case IlluminationMethod::color_transfer:
            out.image_1 = image_1;
            out.image_2 = color_transfer(image_2, image_1);
            break;
        default:
            out.image_1 = image_1;
            out.image_2 = image_2;
            applied = IlluminationMethod::none;
            break;
    }
    out.report.method = applied;
    return out;
}

}  // namespace uscd
