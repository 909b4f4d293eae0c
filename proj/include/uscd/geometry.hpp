#pragma once

#include <cmath>

#include <Eigen/Core>

#include "uscd/grid.hpp"

namespace uscd {

/// Points with camera depth at or below this are treated as behind the camera.
inline constexpr double kBehindCameraEps = 1e-6;
/// Reprojections this close outside the image border still count as inside
/// and are clamped onto it; absorbs rounding on exact-border hits.
inline constexpr double kBorderSlack = 1e-6;

/// Pinhole camera. `pose` maps world to camera: X_cam = R·X_world + t.
struct Camera {
    Eigen::Matrix3d intrinsics = Eigen::Matrix3d::Identity();
    Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
    int width = 0;
    int height = 0;

    /// Throws ValidationError unless fx, fy > 0, skew = 0, K[2] = (0,0,1),
    /// the pose is rigid and the image size is positive.
    void validate() const;
};

/// Rigid motion taking points from camera i coordinates to camera j coordinates.
struct RelativePose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Matrix4d matrix() const;
};

/// Checks that the upper-left block of a 4×4 pose is a rotation (within
/// `tolerance`) and that the bottom row is (0,0,0,1).
void validate_rigid(const Eigen::Matrix4d& pose, double tolerance = 1e-4);

/// R, t of pose_j · pose_i⁻¹ for two world→camera poses.
RelativePose relative_pose(const Eigen::Matrix4d& pose_i, const Eigen::Matrix4d& pose_j);

struct Reprojection {
    Eigen::Vector2d pixel;  ///< continuous (u, v) in the target view; NaN when invalid
    double depth = 0.0;     ///< z of the point in target camera coordinates
    bool valid = false;     ///< false when the point is at or behind the target camera plane
};

/// Lifts pixel `p` at depth `depth` through `k_src`, moves it with `rel` and
/// projects with `k_dst`.
Reprojection reproject_pixel(const Eigen::Vector2d& p, double depth, const Eigen::Matrix3d& k_src,
                             const Eigen::Matrix3d& k_dst, const RelativePose& rel);

/// Dense per-pixel reprojection from a source view into a destination view.
/// `valid` is the visual-overlap mask of the source view.
struct CorrespondenceField {
    Grid<float> target;           ///< H×W×2 (u, v) in the destination view, NaN where invalid
    Grid<float> depth_in_target;  ///< H×W depth of the reprojected point, NaN where invalid
    Mask valid;                   ///< H×W overlap mask
    int target_width = 0;
    int target_height = 0;

    int height() const noexcept { return valid.height(); }
    int width() const noexcept { return valid.width(); }
    Eigen::Vector2d at(int x, int y) const { return {target(x, y, 0), target(x, y, 1)}; }
};

CorrespondenceField correspondence_field(const DepthMap& depth_src, const Camera& cam_src,
                                         const Camera& cam_dst);

/// Nearest integer pixel to a continuous coordinate, rounding halves away from zero.
inline Eigen::Vector2i nearest_pixel(const Eigen::Vector2d& p) {
    return {static_cast<int>(std::lround(p.x())), static_cast<int>(std::lround(p.y()))};
}

}  // namespace uscd
