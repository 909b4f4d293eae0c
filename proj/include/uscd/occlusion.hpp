#pragma once

#include <span>

#include <Eigen/Core>

#include "uscd/geometry.hpp"

namespace uscd {

inline constexpr double kDefaultAlpha = 0.03;
inline constexpr double kDefaultKappa = 2.5;

/// Depth at the nearest pixel of continuous coordinate `p` (halves round away
/// from zero). Throws std::out_of_range outside [0, W-1]×[0, H-1].
float sample_depth(const DepthMap& depth, const Eigen::Vector2d& p);

/// Median with the mean-of-middle-pair rule for even counts. Throws on empty input.
double median(std::span<const double> values);

struct DepthDeltaStats {
    double median = 0.0;
    double mad = 0.0;  ///< median absolute deviation
};

struct AdaptiveTau {
    double tau = 0.0;
    double depth_median = 0.0;  ///< med(D_other), the geometric term's base
    DepthDeltaStats delta;
};

/// tau = max(alpha·med(D_other), med(ΔD) + kappa·MAD(ΔD)).
/// The depth median is taken over every pixel of the other view that carries
/// a surface (depth > 0).
AdaptiveTau adaptive_tau(const DepthMap& depth_other, std::span<const double> delta, double alpha = kDefaultAlpha,
                         double kappa = kDefaultKappa);

struct OcclusionMask {
    Mask mask;  ///< 1 = visible in this view, hidden in the other
    AdaptiveTau threshold;
};

/// Flags overlap pixels whose reprojected depth exceeds the other view's
/// depth at the corresponding pixel by more than the adaptive tau.
OcclusionMask occlusion_mask(const CorrespondenceField& field, const DepthMap& depth_other,
                             double alpha = kDefaultAlpha, double kappa = kDefaultKappa);

}  // namespace uscd
