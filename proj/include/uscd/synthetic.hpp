#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "uscd/bundle.hpp"

namespace uscd::synth {

/// Axis-aligned box; a rectangle is a box with zero extent along one axis.
struct Primitive {
    int id = 0;  ///< surface identity, unique within a world
    Eigen::Vector3d lo = Eigen::Vector3d::Zero();
    Eigen::Vector3d hi = Eigen::Vector3d::Zero();
    Eigen::Vector3d albedo = Eigen::Vector3d::Constant(128.0);  ///< RGB, 0..255
};

enum class ChangeKind { insert, remove, recolor };

/// Edit applied to the world seen by view 2.
struct Change {
    ChangeKind kind = ChangeKind::recolor;
    int target = 0;                       ///< primitive id for remove/recolor
    Eigen::Vector3d albedo;               ///< recolor
    std::optional<Primitive> primitive;   ///< insert
};

/// Camera placement: centre in world coordinates plus yaw/pitch/roll (degrees,
/// applied as Ry·Rx·Rz) of the camera-to-world rotation. Looks along +z,
/// x right, y down.
struct CameraSpec {
    double fx = 50.0;
    double fy = 50.0;
    double cx = 31.5;
    double cy = 31.5;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d rotation_deg = Eigen::Vector3d::Zero();
};

struct FeatureSpec {
    int heads = 2;
    int dim = 16;
    int embed_dim = 16;
    double noise_deg = 5.0;  ///< maximum angular perturbation per feature vector
};

struct SceneSpec {
    int height = 64;
    int width = 64;
    std::uint64_t seed = 0;
    std::vector<Primitive> layout;
    CameraSpec cam1;
    CameraSpec cam2;
    std::vector<Change> changes;
    FeatureSpec features;
    bool with_seg_masks = true;
};

SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneSpec& spec);

/// World→camera camera for a spec; matrices are rounded to f32 so that an
/// in-memory bundle equals its on-disk round trip.
Camera make_camera(const CameraSpec& cam, int width, int height);

std::vector<Primitive> world_before(const SceneSpec& spec);
std::vector<Primitive> world_after(const SceneSpec& spec);

struct RayHit {
    double depth = 0.0;  ///< camera z of the hit
    int primitive = -1;  ///< index into the world, -1 for a miss
};

/// First surface along the ray through continuous pixel `p`.
RayHit cast_ray(const std::vector<Primitive>& world, const Camera& cam, const Eigen::Vector2d& p);

struct Render {
    DepthMap depth;
    Grid<int> surface;  ///< primitive id per pixel, -1 where the ray misses
    Grid<int> slot;     ///< feature slot per pixel, -1 where the ray misses
    RgbImage image;
};

struct GroundTruth {
    Mask change_1;     ///< view-1 pixels whose visible surface or albedo changed, inside overlap
    Mask change_2;
    Mask overlap_1;
    Mask overlap_2;
    Mask occlusion_1;  ///< exact-geometry occlusion of view 1 w.r.t. view 2
    Mask occlusion_2;
    Grid<int> surface_1;
    Grid<int> surface_2;
};

struct SyntheticPair {
    PairBundle bundle;
    GroundTruth truth;
};

/// Ray-casts both views (view 1 before, view 2 after the changes) and emits a
/// complete bundle with features, embeddings and segmentation masks.
SyntheticPair generate_scene(const SceneSpec& spec);

/// Overlap by exhaustive reprojection through world coordinates.
Mask oracle_overlap(const PairBundle& bundle, int view);

/// Occlusion by re-casting the other view's world along the ray to each
/// reprojected point (exact geometry, 1e-6 slack).
Mask oracle_occlusion(const SceneSpec& spec, int view);

/// Named scenes: plane, plane_box, recolor, insert, no_change, occlusion.
/// `size` is the square image resolution; the field of view does not depend on it.
SceneSpec preset_scene(std::string_view kind, std::uint64_t seed, int size = 64);

/// Wall plus one or two boxes; view 2 rotated by up to `max_rotation_deg`
/// and translated by up to `max_translation_frac` of the wall depth.
SceneSpec random_geometry_scene(std::uint64_t seed, double max_rotation_deg = 30.0,
                                double max_translation_frac = 0.2);

}  // namespace uscd::synth
