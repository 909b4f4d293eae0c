#include "uscd/geometry.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <limits>
#include <string>

namespace uscd {

namespace {

constexpr double kIntrinsicsTol = 1e-6;
constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

}  // namespace

void validate_rigid(const Eigen::Matrix4d& pose, double tolerance) {
    if (!pose.allFinite()) throw ValidationError("pose has non-finite entries");
    if (pose(3, 0) != 0.0 || pose(3, 1) != 0.0 || pose(3, 2) != 0.0 || pose(3, 3) != 1.0) {
        throw ValidationError("pose bottom row must be (0,0,0,1)");
    }
    const Eigen::Matrix3d r = pose.topLeftCorner<3, 3>();
    const double det = r.determinant();
    if (std::abs(det) < 1e-9) throw ValidationError("degenerate rotation block (singular)");
    const double orth_err = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (orth_err > tolerance || std::abs(det - 1.0) > tolerance) {
        throw ValidationError("pose rotation block is not a proper rotation (orthonormality error " +
                              std::to_string(orth_err) + ", det " + std::to_string(det) + ")");
    }
}

void Camera::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
    if (!intrinsics.allFinite()) throw ValidationError("intrinsics have non-finite entries");
    if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
        throw ValidationError("intrinsics focal entries must be positive");
    }
    if (std::abs(intrinsics(0, 1)) > kIntrinsicsTol || std::abs(intrinsics(1, 0)) > kIntrinsicsTol) {
        throw ValidationError("intrinsics must have zero skew");
    }
    if (std::abs(intrinsics(2, 0)) > kIntrinsicsTol || std::abs(intrinsics(2, 1)) > kIntrinsicsTol ||
        std::abs(intrinsics(2, 2) - 1.0) > kIntrinsicsTol) {
        throw ValidationError("intrinsics last row must be (0,0,1)");
    }
    validate_rigid(pose);
}

Eigen::Matrix4d RelativePose::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

RelativePose relative_pose(const Eigen::Matrix4d& pose_i, const Eigen::Matrix4d& pose_j) {
    validate_rigid(pose_i);
    validate_rigid(pose_j);
    const Eigen::Matrix3d r_i = pose_i.topLeftCorner<3, 3>();
    const Eigen::Vector3d t_i = pose_i.topRightCorner<3, 1>();
    const Eigen::Matrix3d r_j = pose_j.topLeftCorner<3, 3>();
    const Eigen::Vector3d t_j = pose_j.topRightCorner<3, 1>();
    // pose_i⁻¹ = [R_iᵀ | -R_iᵀ t_i]
    RelativePose rel;
    rel.rotation = r_j * r_i.transpose();
    rel.translation = t_j - rel.rotation * t_i;
    return rel;
}

Reprojection reproject_pixel(const Eigen::Vector2d& p, double depth, const Eigen::Matrix3d& k_src,
                             const Eigen::Matrix3d& k_dst, const RelativePose& rel) {
    Reprojection out;
    out.pixel.setConstant(std::numeric_limits<double>::quiet_NaN());
    if (!(depth > 0.0) || !std::isfinite(depth)) return out;
    const Eigen::Vector3d ray = k_src.inverse() * Eigen::Vector3d(p.x(), p.y(), 1.0);
    const Eigen::Vector3d x_dst = rel.rotation * (depth * ray) + rel.translation;
    out.depth = x_dst.z();
    if (!(x_dst.z() > kBehindCameraEps)) return out;
    const Eigen::Vector3d h = k_dst * x_dst;
    out.pixel = h.head<2>() / h.z();
    out.valid = true;
    return out;
}

CorrespondenceField correspondence_field(const DepthMap& depth_src, const Camera& cam_src,
                                         const Camera& cam_dst) {
    cam_src.validate();
    cam_dst.validate();
    if (!depth_src.same_shape(cam_src.height, cam_src.width) || depth_src.channels() != 1) {
        throw ValidationError("source depth map does not match source camera dimensions");
    }
    const int h = depth_src.height();
    const int w = depth_src.width();
    const RelativePose rel = relative_pose(cam_src.pose, cam_dst.pose);
    const Eigen::Matrix3d k_src_inv = cam_src.intrinsics.inverse();
    const double u_max = cam_dst.width - 1;
    const double v_max = cam_dst.height - 1;

    CorrespondenceField field;
    field.target = Grid<float>(h, w, 2, kNaN);
    field.depth_in_target = Grid<float>(h, w, 1, kNaN);
    field.valid = Mask(h, w);
    field.target_width = cam_dst.width;
    field.target_height = cam_dst.height;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double d = depth_src(x, y);
            if (!(d > 0.0) || !std::isfinite(d)) continue;
            const Eigen::Vector3d ray = k_src_inv * Eigen::Vector3d(x, y, 1.0);
            const Eigen::Vector3d x_dst = rel.rotation * (d * ray) + rel.translation;
            if (!(x_dst.z() > kBehindCameraEps)) continue;
            const Eigen::Vector3d hom = cam_dst.intrinsics * x_dst;
            double u = hom.x() / hom.z();
            double v = hom.y() / hom.z();
            // Closed interval keeps nearest-neighbour lookups in bounds.
            if (!(u >= -kBorderSlack && u <= u_max + kBorderSlack && v >= -kBorderSlack &&
                  v <= v_max + kBorderSlack)) {
                continue;
            }
            u = std::clamp(u, 0.0, u_max);
            v = std::clamp(v, 0.0, v_max);
            field.target(x, y, 0) = static_cast<float>(u);
            field.target(x, y, 1) = static_cast<float>(v);
            field.depth_in_target(x, y) = static_cast<float>(x_dst.z());
            field.valid(x, y) = 1;
        }
    }
    return field;
}

}  // namespace uscd
