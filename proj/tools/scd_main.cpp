#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "overlay.hpp"
#include "uscd/bundle.hpp"
#include "uscd/metrics.hpp"
#include "uscd/pipeline.hpp"
#include "uscd/synthetic.hpp"
#include "uscd/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace uscd;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

struct CommonFlags {
    std::string config;
    std::string out = ".";
    bool dump_intermediates = false;
};

// Pipeline flags; unset optionals leave the config file value in place.
struct ConfigFlags {
    std::optional<double> alpha, kappa, rho_overlap, theta_sem, rho_max, sigma_frac;
    std::optional<int> layer;
    std::optional<std::string> illumination;
    bool no_occlusion = false;
};

void add_common(CLI::App* app, CommonFlags& c) {
    app->add_option("--config", c.config, "pipeline config (JSON)")->check(CLI::ExistingFile);
    app->add_option("--out", c.out, "output directory");
    app->add_flag("--dump-intermediates", c.dump_intermediates, "write every stage output");
}

void add_config_flags(CLI::App* app, ConfigFlags& f) {
    app->add_option("--alpha", f.alpha, "geometric fraction of the median depth");
    app->add_option("--kappa", f.kappa, "MAD multiplier");
    app->add_option("--layer", f.layer, "feature layer the bundle must come from");
    app->add_option("--rho-overlap", f.rho_overlap, "minimum mask/proposal overlap ratio");
    app->add_option("--theta-sem", f.theta_sem, "semantic similarity ceiling");
    app->add_option("--rho-max", f.rho_max, "maximum mask area fraction");
    app->add_option("--sigma-frac", f.sigma_frac, "Retinex blur scale as a fraction of min(H, W)");
    app->add_option("--illumination", f.illumination, "auto, none, retinex or color-transfer");
    app->add_flag("--no-occlusion", f.no_occlusion, "skip occlusion refinement");
}

PipelineConfig resolve_config(const CommonFlags& c, const ConfigFlags& f) {
    PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
    if (f.alpha) cfg.alpha = *f.alpha;
    if (f.kappa) cfg.kappa = *f.kappa;
    if (f.layer) cfg.layer = *f.layer;
    if (f.rho_overlap) cfg.rho_overlap = *f.rho_overlap;
    if (f.theta_sem) cfg.theta_sem = *f.theta_sem;
    if (f.rho_max) cfg.rho_max = *f.rho_max;
    if (f.sigma_frac) cfg.sigma_frac = *f.sigma_frac;
    if (f.illumination) cfg.illumination = parse_illumination_method(*f.illumination);
    if (f.no_occlusion) cfg.use_occlusion = false;
    if (c.dump_intermediates) cfg.dump_intermediates = true;
    cfg.validate();
    return cfg;
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

int cmd_priors(const std::string& manifest, const CommonFlags& c, const ConfigFlags& f) {
    const PipelineConfig cfg = resolve_config(c, f);
    const PairBundle b = load_bundle(manifest);
    b.validate();
    const fs::path out(c.out);
    fs::create_directories(out);
    json sidecar = json::object();
    const ViewInputs* views[] = {&b.view_1, &b.view_2};
    for (int i = 0; i < 2; ++i) {
        const ViewInputs& self = *views[i];
        const ViewInputs& other = *views[1 - i];
        const std::string tag = i == 0 ? "12" : "21";
        CorrespondenceField field;
        OcclusionMask occ;
        try {
            field = correspondence_field(self.depth, self.camera, other.camera);
            occ = occlusion_mask(field, other.depth, cfg.alpha, cfg.kappa);
        } catch (const std::exception& e) {
            throw StageError("priors_" + tag, e.what());
        }
        write_tensor(grid_to_tensor(field.target), out / ("correspondence_" + tag + ".npy"));
        write_tensor(grid_to_tensor(field.depth_in_target), out / ("depth_in_target_" + tag + ".npy"));
        write_tensor(mask_to_tensor(field.valid), out / ("overlap_" + tag + ".npy"));
        write_tensor(mask_to_tensor(occ.mask), out / ("occlusion_" + tag + ".npy"));
        sidecar[tag] = {{"tau", occ.threshold.tau},
                        {"depth_median", occ.threshold.depth_median},
                        {"delta_median", occ.threshold.delta.median},
                        {"delta_mad", occ.threshold.delta.mad},
                        {"overlap_pixels", count(field.valid)},
                        {"occluded_pixels", count(occ.mask)}};
    }
    write_json(sidecar, out / "priors.json");
    std::cout << sidecar.dump(2) << '\n';
    return 0;
}

int cmd_preprocess(const std::string& manifest, const CommonFlags& c, const ConfigFlags& f) {
    const PipelineConfig cfg = resolve_config(c, f);
    const PairBundle b = load_bundle(manifest);
    PreprocessedPair p;
    try {
        p = preprocess_pair(b.view_1.image, b.view_2.image, cfg.illumination, cfg.sigma_frac);
    } catch (const std::exception& e) {
        throw StageError("preprocess", e.what());
    }
    const fs::path out(c.out);
    fs::create_directories(out);
    write_tensor(image_to_tensor(p.image_1), out / "image_1.npy");
    write_tensor(image_to_tensor(p.image_2), out / "image_2.npy");
    const json report = {{"gray_gap", p.report.gray_gap},
                         {"hist_gap", p.report.hist_gap},
                         {"triggered", p.report.triggered},
                         {"method", std::string(to_string(p.report.method))}};
    write_json(report, out / "preprocess.json");
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_detect(const std::string& manifest, const CommonFlags& c, const ConfigFlags& f) {
    const PipelineConfig cfg = resolve_config(c, f);
    const PairBundle b = load_bundle(manifest);
    const DetectionResult r = run_detect(b, cfg);
    const fs::path out(c.out);
    fs::create_directories(out);
    write_tensor(mask_to_tensor(r.final_mask.mask), out / "final_mask.npy");
    json summary = detection_summary(r);
    summary["config"] = config_to_json(cfg);
    if (b.gt_mask) {
        const PairScore s = score(r.final_mask.mask, *b.gt_mask);
        summary["score"] = {{"f1", s.scores.f1}, {"precision", s.scores.precision}, {"recall", s.scores.recall},
                            {"miou", s.scores.miou}};
    }
    write_json(summary, out / "detection.json");
    scd_cli::write_overlay_png(b.view_1.image, r.final_mask.mask, out / "overlay.png");
    if (cfg.dump_intermediates) save_intermediates(r, out / "intermediates");
    std::cout << "final mask: " << count(r.final_mask.mask) << " pixels"
              << (r.view_1.gsm.fallback ? " (no segmentation masks, proposal fallback)" : "") << '\n';
    return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& preset, std::uint64_t seed, int size,
              const CommonFlags& c) {
    synth::SceneSpec spec;
    if (!spec_path.empty()) {
        try {
            spec = synth::scene_from_json(read_json(spec_path));
        } catch (const json::exception& e) {
            throw ValidationError(spec_path + ": " + e.what());
        }
    } else {
        spec = synth::preset_scene(preset, seed, size);
    }
    const synth::SyntheticPair pair = synth::generate_scene(spec);
    const fs::path out(c.out);
    fs::create_directories(out);
    const fs::path manifest = save_bundle(pair.bundle, out);
    const fs::path truth = out / "truth";
    fs::create_directories(truth);
    const synth::GroundTruth& gt = pair.truth;
    write_tensor(mask_to_tensor(gt.change_1), truth / "change_1.npy");
    write_tensor(mask_to_tensor(gt.change_2), truth / "change_2.npy");
    write_tensor(mask_to_tensor(gt.overlap_1), truth / "overlap_1.npy");
    write_tensor(mask_to_tensor(gt.overlap_2), truth / "overlap_2.npy");
    write_tensor(mask_to_tensor(gt.occlusion_1), truth / "occlusion_1.npy");
    write_tensor(mask_to_tensor(gt.occlusion_2), truth / "occlusion_2.npy");
    write_json(synth::scene_to_json(spec), out / "scene.json");
    std::cout << manifest.string() << '\n';
    return 0;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << v;
    return os.str();
}

void print_table(std::ostream& os, const std::vector<std::pair<std::string, Scores>>& rows) {
    std::size_t w = 4;
    for (const auto& [name, s] : rows) w = std::max(w, name.size());
    os << std::left << std::setw(static_cast<int>(w)) << "name" << std::right;
    for (const char* h : {"precision", "recall", "f1", "iou_chg", "iou_nochg", "miou"}) os << std::setw(11) << h;
    os << '\n';
    for (const auto& [name, s] : rows) {
        os << std::left << std::setw(static_cast<int>(w)) << name << std::right;
        for (double v : {s.precision, s.recall, s.f1, s.iou_change, s.iou_nochange, s.miou}) os << std::setw(11) << fmt(v);
        os << '\n';
    }
}

json scores_json(const Scores& s) {
    return {{"precision", s.precision}, {"recall", s.recall},       {"f1", s.f1},
            {"iou_change", s.iou_change}, {"iou_nochange", s.iou_nochange}, {"miou", s.miou}};
}

json report_json(const EvalReport& r) {
    json pairs = json::array();
    for (const auto& p : r.per_pair) {
        pairs.push_back({{"id", p.id},
                         {"group", p.group},
                         {"tp", p.confusion.tp},
                         {"fp", p.confusion.fp},
                         {"fn", p.confusion.fn},
                         {"tn", p.confusion.tn},
                         {"scores", scores_json(p.scores)}});
    }
    return {{"pairs", pairs},
            {"micro", scores_json(r.micro_scores)},
            {"macro_f1", r.macro_f1},
            {"macro_miou", r.macro_miou}};
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& group_by, const CommonFlags& c) {
    if (!fs::is_directory(gt_dir)) throw ValidationError("not a directory: " + gt_dir);
    if (!fs::is_directory(pred_dir)) throw ValidationError("not a directory: " + pred_dir);
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(gt_dir)) {
        const std::string name = e.path().filename().string();
        if (!e.is_regular_file() || !has_suffix(name, ".npy") || has_suffix(name, ".overlap.npy")) continue;
        ids.push_back(name.substr(0, name.size() - 4));
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw ValidationError("no ground-truth masks in " + gt_dir);

    std::vector<PairScore> scores;
    for (const auto& id : ids) {
        const fs::path pred_path = fs::path(pred_dir) / (id + ".npy");
        if (!fs::exists(pred_path)) throw ValidationError("missing prediction for " + id);
        const Mask gt = mask_from_tensor(read_tensor(fs::path(gt_dir) / (id + ".npy")));
        const Mask pred = mask_from_tensor(read_tensor(pred_path));
        const fs::path overlap_path = fs::path(gt_dir) / (id + ".overlap.npy");
        PairScore s = fs::exists(overlap_path) ? score(pred, gt, mask_from_tensor(read_tensor(overlap_path)))
                                               : score(pred, gt);
        s.id = id;
        if (!group_by.empty()) {
            const fs::path meta_path = fs::path(gt_dir) / (id + ".meta.json");
            s.group = "unknown";
            if (fs::exists(meta_path)) {
                const json meta = read_json(meta_path);
                if (meta.contains(group_by)) {
                    s.group = meta.at(group_by).is_string() ? meta.at(group_by).get<std::string>() : meta.at(group_by).dump();
                }
            }
        }
        scores.push_back(std::move(s));
    }

    const EvalReport all = aggregate(scores);
    json report = report_json(all);
    std::vector<std::pair<std::string, Scores>> rows;
    for (const auto& p : all.per_pair) rows.emplace_back(p.id, p.scores);
    if (!group_by.empty()) {
        report["group_by"] = group_by;
        report["groups"] = json::object();
        for (const auto& [g, r] : aggregate_by_group(scores)) {
            report["groups"][g] = report_json(r);
            rows.emplace_back(group_by + "=" + g + " (micro)", r.micro_scores);
        }
    }
    rows.emplace_back("all (micro)", all.micro_scores);

    const fs::path out(c.out);
    fs::create_directories(out);
    write_json(report, out / "eval.json");
    std::ostringstream table;
    print_table(table, rows);
    table << "macro f1 " << fmt(all.macro_f1) << "  macro miou " << fmt(all.macro_miou) << '\n';
    std::ofstream(out / "eval.txt") << table.str();
    std::cout << table.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Training-free change detection for unaligned image pairs"};
    app.require_subcommand(1);

    CommonFlags common;
    ConfigFlags flags;
    std::string manifest, spec_path, preset = "recolor", pred_dir, gt_dir, group_by;
    std::uint64_t seed = 0;
    int size = 64;

    auto* priors = app.add_subcommand("priors", "correspondence and occlusion masks for a bundle");
    priors->add_option("--bundle", manifest, "bundle manifest")->required()->check(CLI::ExistingFile);
    add_common(priors, common);
    add_config_flags(priors, flags);

    auto* preprocess = app.add_subcommand("preprocess", "illumination check and normalisation");
    preprocess->add_option("--bundle", manifest, "bundle manifest")->required()->check(CLI::ExistingFile);
    add_common(preprocess, common);
    add_config_flags(preprocess, flags);
    preprocess->add_option("--method", flags.illumination, "auto, none, retinex or color-transfer");

    auto* detect = app.add_subcommand("detect", "full change detection for a bundle");
    detect->add_option("--bundle", manifest, "bundle manifest")->required()->check(CLI::ExistingFile);
    add_common(detect, common);
    add_config_flags(detect, flags);

    auto* synth_cmd = app.add_subcommand("synth", "render a synthetic bundle with ground truth");
    auto* spec_opt = synth_cmd->add_option("--spec", spec_path, "scene description (JSON)")->check(CLI::ExistingFile);
    synth_cmd->add_option("--preset", preset, "plane, plane_box, recolor, insert, no_change or occlusion")
        ->excludes(spec_opt);
    synth_cmd->add_option("--seed", seed, "preset seed");
    synth_cmd->add_option("--size", size, "preset resolution (square)");
    add_common(synth_cmd, common);

    auto* eval = app.add_subcommand("eval", "score predicted masks against ground truth");
    eval->add_option("--pred-dir", pred_dir, "directory of <id>.npy predictions")->required();
    eval->add_option("--gt-dir", gt_dir, "directory of <id>.npy ground truth")->required();
    eval->add_option("--group-by", group_by, "meta key to group by, read from <id>.meta.json");
    add_common(eval, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*priors) return cmd_priors(manifest, common, flags);
        if (*preprocess) return cmd_preprocess(manifest, common, flags);
        if (*detect) return cmd_detect(manifest, common, flags);
        if (*synth_cmd) return cmd_synth(spec_path, preset, seed, size, common);
        if (*eval) return cmd_eval(pred_dir, gt_dir, group_by, common);
    } catch (const StageError& e) {
        std::cerr << "stage failure in " << e.stage() << ": " << e.what() << '\n';
        return kExitStage;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitStage;
    }
    return 0;
}
