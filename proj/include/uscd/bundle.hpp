#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uscd/correlation.hpp"
#include "uscd/geometry.hpp"
#include "uscd/grid.hpp"

namespace uscd {

/// Everything known about one view of the pair.
struct ViewInputs {
    RgbImage image;
    DepthMap depth;
    Camera camera;
    std::optional<FeatureTensor> features;  ///< raw layer keys, heads×h'×w'×d
    std::optional<FeatureTensor> embed;     ///< raw final embedding, h'×w'×d_e (heads = 1)
    std::optional<std::vector<Mask>> seg_masks;
};

/// Inputs for one query (view 1) / reference (view 2) pair.
struct PairBundle {
    ViewInputs view_1;
    ViewInputs view_2;
    std::optional<Mask> gt_mask;
    std::map<std::string, std::string> meta;

    int height() const noexcept { return view_1.image.height(); }
    int width() const noexcept { return view_1.image.width(); }

    /// Throws ValidationError on any broken invariant: equal image sizes,
    /// matching depth/mask shapes, finite depth, valid cameras.
    void validate() const;
};

/// Reads a JSON manifest whose entries are paths relative to the manifest.
PairBundle load_bundle(const std::filesystem::path& manifest);

/// Writes every tensor of `bundle` into `dir` plus a manifest; returns the manifest path.
std::filesystem::path save_bundle(const PairBundle& bundle, const std::filesystem::path& dir,
                                  const std::string& manifest_name = "bundle.json");

}  // namespace uscd
