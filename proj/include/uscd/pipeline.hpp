#pragma once

#include <filesystem>

#include <json.hpp>

#include "uscd/bundle.hpp"
#include "uscd/correlation.hpp"
#include "uscd/illumination.hpp"
#include "uscd/mask_matching.hpp"
#include "uscd/occlusion.hpp"

namespace uscd {

struct PipelineConfig {
    double alpha = kDefaultAlpha;
    double kappa = kDefaultKappa;
    int layer = kDefaultFeatureLayer;
    double rho_overlap = 0.5;
    double theta_sem = 0.6;
    double rho_max = 0.8;
    IlluminationMethod illumination = IlluminationMethod::automatic;
    double sigma_frac = kDefaultSigmaFrac;
    bool dump_intermediates = false;
    /// Ablation switch: when false the initial proposal is used unrefined.
    bool use_occlusion = true;

    GsmParams gsm() const { return {rho_overlap, theta_sem, rho_max}; }

    /// Throws ValidationError when a value is outside its documented range.
    void validate() const;
};

/// Starts from `base` and overrides every key present in `j`. Unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

/// Everything computed for one direction of the symmetric pass.
struct ViewPass {
    CorrespondenceField field;  ///< this view → other view
    OcclusionMask occlusion;
    SimilarityMap similarity;
    ThresholdStats threshold;
    ChangeProposal initial;
    ChangeProposal refined;
    GsmResult gsm;
};

struct DetectionResult {
    FinalChangeMask final_mask;
    Mask warped_2;  ///< view-2 change mask pulled into view 1
    ViewPass view_1;
    ViewPass view_2;
    IlluminationReport illumination;
};

/// Full two-view detection. Input problems raise ValidationError; failures
/// inside a stage raise StageError tagged with the stage name.
DetectionResult run_detect(const PairBundle& bundle, const PipelineConfig& cfg = {});

/// Writes the stage outputs as numbered tensors plus a JSON summary into `dir`.
void save_intermediates(const DetectionResult& r, const std::filesystem::path& dir);

/// Scalar summary of a detection (thresholds, counts, fallback flags).
nlohmann::json detection_summary(const DetectionResult& r);

}  // namespace uscd
