#include <gtest/gtest.h>

#include <cmath>

#include "uscd/correlation.hpp"
#include "uscd/synthetic.hpp"

using namespace uscd;
using namespace uscd::synth;

TEST(Synthetic, CameraIsRigidAndF32Exact) {
    CameraSpec spec;
    spec.position = {0.3, -0.2, 0.1};
    spec.rotation_deg = {12.0, -5.0, 3.0};
    const Camera cam = make_camera(spec, 64, 48);
    EXPECT_NO_THROW(cam.validate());
    for (int i = 0; i < 16; ++i) EXPECT_EQ(cam.pose(i), static_cast<double>(static_cast<float>(cam.pose(i))));
    EXPECT_EQ(cam.width, 64);
    EXPECT_EQ(cam.height, 48);
}

TEST(Synthetic, CentralRayHitsWallAtItsDepth) {
    const SceneSpec s = preset_scene("plane", 0);
    const Camera cam = make_camera(s.cam1, s.width, s.height);
    const RayHit hit = cast_ray(s.layout, cam, {s.cam1.cx, s.cam1.cy});
    ASSERT_EQ(hit.primitive, 0);
    EXPECT_NEAR(hit.depth, 10.0, 1e-9);
    // Off-axis rays report camera z, not ray length.
    EXPECT_NEAR(cast_ray(s.layout, cam, {0.0, 0.0}).depth, 10.0, 1e-9);
}

TEST(Synthetic, BoxInFrontWins) {
    const SceneSpec s = preset_scene("plane_box", 0);
    const Camera cam = make_camera(s.cam1, s.width, s.height);
    const RayHit hit = cast_ray(s.layout, cam, {s.cam1.cx, s.cam1.cy});
    EXPECT_EQ(s.layout[static_cast<std::size_t>(hit.primitive)].id, 1);
    EXPECT_NEAR(hit.depth, 7.0, 1e-9);
}

TEST(Synthetic, IdenticalCamerasHaveFullOverlapAndNoOcclusion) {
    const SceneSpec s = preset_scene("plane", 0);
    const SyntheticPair p = generate_scene(s);
    EXPECT_EQ(count(p.truth.overlap_1), static_cast<std::size_t>(s.width * s.height));
    EXPECT_EQ(count(p.truth.occlusion_1), 0u);
    EXPECT_EQ(count(p.truth.change_1), 0u);
}

TEST(Synthetic, RecolorGroundTruthIsTheBoxSilhouette) {
    const SyntheticPair p = generate_scene(preset_scene("recolor", 1));
    EXPECT_GT(count(p.truth.change_1), 100u);
    for (std::size_t i = 0; i < p.truth.change_1.size(); ++i) {
        if (p.truth.change_1[i]) EXPECT_EQ(p.truth.surface_1[i], 1);
        if (p.truth.surface_1[i] == 1 && p.truth.overlap_1[i]) EXPECT_EQ(p.truth.change_1[i], 1);
    }
    EXPECT_TRUE(is_subset(p.truth.change_1, p.truth.overlap_1));
    ASSERT_TRUE(p.bundle.gt_mask);
    EXPECT_EQ(*p.bundle.gt_mask, p.truth.change_1);
}

TEST(Synthetic, InsertAppearsOnlyInViewTwo) {
    const SyntheticPair p = generate_scene(preset_scene("insert", 2));
    for (std::size_t i = 0; i < p.truth.surface_1.size(); ++i) EXPECT_NE(p.truth.surface_1[i], 10);
    std::size_t seen = 0;
    for (int v : p.truth.surface_2.values()) seen += v == 10;
    EXPECT_GT(seen, 100u);
    EXPECT_GT(count(p.truth.change_1), 100u);
}

TEST(Synthetic, FeaturesFollowSurfaceSlots) {
    const SceneSpec s = preset_scene("recolor", 4);
    const SyntheticPair p = generate_scene(s);
    const FeatureTensor& f1 = *p.bundle.view_1.features;
    const FeatureTensor& f2 = *p.bundle.view_2.features;
    EXPECT_EQ(f1.heads, s.features.heads);
    EXPECT_EQ(f1.dim, s.features.dim);
    const double same_floor = std::cos(2.0 * s.features.noise_deg * M_PI / 180.0) - 1e-6;
    const double cross_ceiling = 2.0 * std::sin(s.features.noise_deg * M_PI / 180.0) + 1e-6;
    for (int y = 0; y < s.height; y += 3) {
        for (int x = 0; x < s.width; x += 3) {
            const auto a = f1.at(0, x, y);
            double norm = 0.0;
            for (float v : a) norm += v * v;
            EXPECT_NEAR(norm, 1.0, 1e-5);
            // Same pixel, both views: wall stays wall, the recoloured box changes slot.
            const int s1 = p.truth.surface_1(x, y);
            const int s2 = p.truth.surface_2(x, y);
            const double c = cosine(a, f2.at(0, x, y));
            if (s1 == 0 && s2 == 0) EXPECT_GE(c, same_floor);
            if (s1 == 1 && s2 == 1) EXPECT_LE(c, cross_ceiling);
        }
    }
}

TEST(Synthetic, SegMasksPartitionVisibleSurfaces) {
    const SyntheticPair p = generate_scene(preset_scene("no_change", 5));
    ASSERT_TRUE(p.bundle.view_1.seg_masks);
    Mask covered(p.bundle.height(), p.bundle.width());
    for (const Mask& m : *p.bundle.view_1.seg_masks) {
        EXPECT_EQ(count(mask_and(covered, m)), 0u);
        covered = mask_or(covered, m);
    }
    for (std::size_t i = 0; i < covered.size(); ++i) EXPECT_EQ(covered[i] != 0, p.bundle.view_1.depth[i] > 0);
}

TEST(Synthetic, GenerationIsDeterministic) {
    const SceneSpec s = preset_scene("insert", 9);
    const SyntheticPair a = generate_scene(s);
    const SyntheticPair b = generate_scene(s);
    EXPECT_EQ(a.bundle.view_1.features->data, b.bundle.view_1.features->data);
    EXPECT_EQ(a.bundle.view_2.image, b.bundle.view_2.image);
    EXPECT_EQ(a.truth.occlusion_2, b.truth.occlusion_2);
}

TEST(Synthetic, OverlapOracleMatchesFieldOnPresets) {
    for (const char* kind : {"plane_box", "occlusion", "recolor"}) {
        const SyntheticPair p = generate_scene(preset_scene(kind, 7));
        const auto& b = p.bundle;
        EXPECT_EQ(correspondence_field(b.view_1.depth, b.view_1.camera, b.view_2.camera).valid, p.truth.overlap_1) << kind;
        EXPECT_EQ(correspondence_field(b.view_2.depth, b.view_2.camera, b.view_1.camera).valid, p.truth.overlap_2) << kind;
    }
}

TEST(Synthetic, OcclusionPresetHasOccludedBackground) {
    const SyntheticPair p = generate_scene(preset_scene("occlusion", 0));
    EXPECT_GT(count(p.truth.occlusion_1), 50u);
    for (std::size_t i = 0; i < p.truth.occlusion_1.size(); ++i) {
        if (p.truth.occlusion_1[i]) EXPECT_EQ(p.truth.surface_1[i], 0);
    }
}

TEST(Synthetic, SceneJsonRoundTrip) {
    const SceneSpec s = preset_scene("insert", 3);
    const SceneSpec back = scene_from_json(scene_to_json(s));
    EXPECT_EQ(scene_to_json(back), scene_to_json(s));
    const SyntheticPair a = generate_scene(s);
    const SyntheticPair b = generate_scene(back);
    EXPECT_EQ(a.bundle.view_2.depth, b.bundle.view_2.depth);
}

TEST(Synthetic, RejectsBadSpecs) {
    EXPECT_THROW(preset_scene("spiral", 0), ValidationError);
    SceneSpec s = preset_scene("plane", 0);
    s.changes.push_back({ChangeKind::remove, 42, {}, std::nullopt});
    EXPECT_THROW(generate_scene(s), ValidationError);

    SceneSpec away = preset_scene("plane", 0);
    away.cam2.rotation_deg = {180.0, 0.0, 0.0};
    EXPECT_THROW(generate_scene(away), ValidationError);

    SceneSpec tiny = preset_scene("recolor", 0);
    tiny.features.dim = 2;
    EXPECT_THROW(generate_scene(tiny), ValidationError);
    EXPECT_THROW(scene_from_json(nlohmann::json{{"layout", nlohmann::json::array()}}), std::exception);
}

TEST(Synthetic, RandomGeometryScenesOverlap) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const SceneSpec s = random_geometry_scene(seed);
        const SyntheticPair p = generate_scene(s);
        EXPECT_GE(count(p.truth.overlap_1), static_cast<std::size_t>(0.2 * s.width * s.height));
        EXPECT_EQ(scene_to_json(random_geometry_scene(seed)), scene_to_json(s));
    }
}
