#include "uscd/pipeline.hpp"

#include <fstream>
#include <functional>
#include <string>

#include "uscd/tensor.hpp"

namespace uscd {

using nlohmann::json;

namespace {

void require_range(bool ok, const char* name, const char* range) {
    if (!ok) throw ValidationError(std::string("config: ") + name + " must be " + range);
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

ViewPass run_view(const ViewInputs& self, const ViewInputs& other, const CorrespondenceField& field,
                  const OcclusionMask& occ, const PipelineConfig& cfg, const char* tag) {
    const std::string v(tag);
    ViewPass pass;
    pass.field = field;
    pass.occlusion = occ;
    const int h = self.image.height();
    const int w = self.image.width();
    const int ho = other.image.height();
    const int wo = other.image.width();
    pass.similarity = stage(("similarity_" + v).c_str(), [&] {
        const FeatureTensor ks = resize_features(*self.features, h, w);
        const FeatureTensor ko = resize_features(*other.features, ho, wo);
        return similarity_map(ks, ko, field);
    });
    pass.threshold = stage(("threshold_" + v).c_str(), [&] { return adaptive_threshold_stats(pass.similarity); });
    pass.initial = threshold_similarity(pass.similarity, pass.threshold.threshold);
    if (cfg.use_occlusion) {
        pass.refined = refine_with_occlusion(pass.initial, occ);
        for (std::size_t i = 0; i < pass.refined.mask.size(); ++i) {
            if (pass.refined.mask[i] && occ.mask[i]) {
                throw StageError("refine_" + v, "refined proposal intersects the occlusion mask");
            }
        }
    } else {
        pass.refined = pass.initial;
        pass.refined.stage = ProposalStage::refined;
    }
    pass.gsm = stage(("gsm_" + v).c_str(), [&] {
        const SegMaskSet segs(self.seg_masks.value_or(std::vector<Mask>{}));
        const FeatureTensor es = resize_features(*self.embed, h, w);
        const FeatureTensor eo = resize_features(*other.embed, ho, wo);
        return gsm_match(pass.refined, segs, es, eo, field, cfg.gsm());
    });
    return pass;
}

void require_features(const ViewInputs& v, int index) {
    const std::string n = std::to_string(index);
    if (!v.features) throw ValidationError("missing mandatory field features_" + n);
    if (!v.embed) throw ValidationError("missing mandatory field embed_" + n);
}

void write_json(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json threshold_json(const ThresholdStats& t) {
    return {{"mean", t.mean}, {"stddev", t.stddev}, {"skewness", t.skewness}, {"lambda", t.lambda},
            {"threshold", t.threshold}};
}

json pass_json(const ViewPass& p) {
    json decisions = json::array();
    for (const auto& d : p.gsm.decisions) {
        decisions.push_back({{"index", d.index},
                             {"area_fraction", d.area_fraction},
                             {"overlap_ratio", d.overlap_ratio},
                             {"semantic_similarity", d.semantic_similarity},
                             {"has_overlap", d.has_overlap},
                             {"selected", d.selected}});
    }
    return {{"overlap_pixels", count(p.field.valid)},
            {"occlusion",
             {{"tau", p.occlusion.threshold.tau},
              {"depth_median", p.occlusion.threshold.depth_median},
              {"delta_median", p.occlusion.threshold.delta.median},
              {"delta_mad", p.occlusion.threshold.delta.mad},
              {"pixels", count(p.occlusion.mask)}}},
            {"threshold", threshold_json(p.threshold)},
            {"initial_pixels", count(p.initial.mask)},
            {"refined_pixels", count(p.refined.mask)},
            {"change_pixels", count(p.gsm.mask)},
            {"fallback", p.gsm.fallback},
            {"masks", decisions}};
}

}  // namespace

void PipelineConfig::validate() const {
    require_range(alpha > 0.0 && alpha < 1.0, "alpha", "in (0, 1)");
    require_range(kappa > 0.0 && kappa <= 100.0, "kappa", "in (0, 100]");
    require_range(layer >= 0, "layer", "non-negative");
    require_range(rho_overlap > 0.0 && rho_overlap <= 1.0, "rho_overlap", "in (0, 1]");
    require_range(theta_sem >= -1.0 && theta_sem <= 1.0, "theta_sem", "in [-1, 1]");
    require_range(rho_max > 0.0 && rho_max <= 1.0, "rho_max", "in (0, 1]");
    require_range(sigma_frac > 0.0 && sigma_frac < 1.0, "sigma_frac", "in (0, 1)");
}

PipelineConfig config_from_json(const json& j, PipelineConfig cfg) {
    if (!j.is_object()) throw ValidationError("config: expected a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "alpha") cfg.alpha = value.get<double>();
            else if (key == "kappa") cfg.kappa = value.get<double>();
            else if (key == "layer") cfg.layer = value.get<int>();
            else if (key == "rho_overlap") cfg.rho_overlap = value.get<double>();
            else if (key == "theta_sem") cfg.theta_sem = value.get<double>();
            else if (key == "rho_max") cfg.rho_max = value.get<double>();
            else if (key == "illumination") cfg.illumination = parse_illumination_method(value.get<std::string>());
            else if (key == "sigma_frac") cfg.sigma_frac = value.get<double>();
            else if (key == "dump_intermediates") cfg.dump_intermediates = value.get<bool>();
            else if (key == "use_occlusion") cfg.use_occlusion = value.get<bool>();
            else throw ValidationError("config: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
    return {{"alpha", cfg.alpha},
            {"kappa", cfg.kappa},
            {"layer", cfg.layer},
            {"rho_overlap", cfg.rho_overlap},
            {"theta_sem", cfg.theta_sem},
            {"rho_max", cfg.rho_max},
            {"illumination", std::string(to_string(cfg.illumination))},
            {"sigma_frac", cfg.sigma_frac},
            {"dump_intermediates", cfg.dump_intermediates},
            {"use_occlusion", cfg.use_occlusion}};
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

DetectionResult run_detect(const PairBundle& bundle, const PipelineConfig& cfg) {
    cfg.validate();
    bundle.validate();
    require_features(bundle.view_1, 1);
    require_features(bundle.view_2, 2);
    if (auto it = bundle.meta.find("layer"); it != bundle.meta.end() && it->second != std::to_string(cfg.layer)) {
        throw ValidationError("bundle features come from layer " + it->second + " but the config asks for layer " +
                              std::to_string(cfg.layer));
    }
    const ViewInputs& v1 = bundle.view_1;
    const ViewInputs& v2 = bundle.view_2;

    DetectionResult r;
    r.illumination = stage("preprocess", [&] {
        return preprocess_pair(v1.image, v2.image, cfg.illumination, cfg.sigma_frac).report;
    });
    const CorrespondenceField f12 =
        stage("correspondence_1", [&] { return correspondence_field(v1.depth, v1.camera, v2.camera); });
    const CorrespondenceField f21 =
        stage("correspondence_2", [&] { return correspondence_field(v2.depth, v2.camera, v1.camera); });
    const OcclusionMask occ1 = stage("occlusion_1", [&] { return occlusion_mask(f12, v2.depth, cfg.alpha, cfg.kappa); });
    const OcclusionMask occ2 = stage("occlusion_2", [&] { return occlusion_mask(f21, v1.depth, cfg.alpha, cfg.kappa); });

    r.view_1 = run_view(v1, v2, f12, occ1, cfg, "1");
    r.view_2 = run_view(v2, v1, f21, occ2, cfg, "2");
    r.warped_2 = stage("warp", [&] { return warp_mask(r.view_2.gsm.mask, f12); });
    r.final_mask = stage("fuse", [&] { return fuse(r.view_1.gsm.mask, r.warped_2); });
    return r;
}

void save_intermediates(const DetectionResult& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto put = [&](const std::string& name, const Tensor& t) { write_tensor(t, dir / (name + ".npy")); };
    const ViewPass* passes[] = {&r.view_1, &r.view_2};
    for (int i = 0; i < 2; ++i) {
        const ViewPass& p = *passes[i];
        const std::string v = std::to_string(i + 1);
        put("01_correspondence_" + v, grid_to_tensor(p.field.target));
        put("01_depth_in_target_" + v, grid_to_tensor(p.field.depth_in_target));
        put("01_overlap_" + v, mask_to_tensor(p.field.valid));
        put("02_occlusion_" + v, mask_to_tensor(p.occlusion.mask));
        put("03_similarity_" + v, grid_to_tensor(p.similarity.values));
        put("04_proposal_initial_" + v, mask_to_tensor(p.initial.mask));
        put("05_proposal_refined_" + v, mask_to_tensor(p.refined.mask));
        put("06_change_" + v, mask_to_tensor(p.gsm.mask));
    }
    put("07_change_2_warped", mask_to_tensor(r.warped_2));
    put("08_final", mask_to_tensor(r.final_mask.mask));
    const auto& c = r.final_mask.contributions;
    put("08_contributions", Tensor::from_vector<std::uint8_t>(
                                DType::u8, {static_cast<std::size_t>(c.height()), static_cast<std::size_t>(c.width())},
                                c.values()));
    write_json(detection_summary(r), dir / "summary.json");
}

json detection_summary(const DetectionResult& r) {
    return {{"illumination",
             {{"gray_gap", r.illumination.gray_gap},
              {"hist_gap", r.illumination.hist_gap},
              {"triggered", r.illumination.triggered},
              {"method", std::string(to_string(r.illumination.method))}}},
            {"view_1", pass_json(r.view_1)},
            {"view_2", pass_json(r.view_2)},
            {"final_pixels", count(r.final_mask.mask)}};
}

}  // namespace uscd
