#include "uscd/bundle.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "uscd/tensor.hpp"

namespace uscd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kRequired[] = {"image_1",      "image_2",      "depth_1",      "depth_2",
                                     "intrinsics_1", "intrinsics_2", "extrinsics_1", "extrinsics_2"};

template <int N>
Eigen::Matrix<double, N, N> matrix_from_tensor(const Tensor& t, const std::string& field) {
    if (t.rank() != 2 || t.shape()[0] != N || t.shape()[1] != N) {
        throw ValidationError(field + ": expected a " + std::to_string(N) + "×" + std::to_string(N) + " tensor");
    }
    Eigen::Matrix<double, N, N> m;
    if (t.dtype() == DType::f32) {
        auto v = t.to_vector<float>();
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c) m(r, c) = v[r * N + c];
    } else if (t.dtype() == DType::f64) {
        auto v = t.to_vector<double>();
        for (int r = 0; r < N; ++r)
            for (int c = 0; c < N; ++c) m(r, c) = v[r * N + c];
    } else {
        throw ValidationError(field + ": camera matrices must be f32 or f64");
    }
    return m;
}

template <int N>
Tensor matrix_to_tensor(const Eigen::Matrix<double, N, N>& m) {
    std::vector<float> v(N * N);
    for (int r = 0; r < N; ++r)
        for (int c = 0; c < N; ++c) v[r * N + c] = static_cast<float>(m(r, c));
    return Tensor::from_vector<float>(DType::f32, {N, N}, v);
}

FeatureTensor features_from_tensor(const Tensor& t, const std::string& field, bool embedding) {
    if (t.dtype() != DType::f32) throw ValidationError(field + ": expected f32 features");
    const std::size_t rank = embedding ? 3 : 4;
    if (t.rank() != rank) throw ValidationError(field + ": expected a rank-" + std::to_string(rank) + " tensor");
    const auto& s = t.shape();
    FeatureTensor f = embedding ? FeatureTensor(1, static_cast<int>(s[0]), static_cast<int>(s[1]), static_cast<int>(s[2]))
                                : FeatureTensor(static_cast<int>(s[0]), static_cast<int>(s[1]), static_cast<int>(s[2]),
                                                static_cast<int>(s[3]));
    f.data = t.to_vector<float>();
    f.validate();
    return f;
}

Tensor features_to_tensor(const FeatureTensor& f, bool embedding) {
    std::vector<std::size_t> shape;
    if (!embedding) shape.push_back(static_cast<std::size_t>(f.heads));
    shape.insert(shape.end(), {static_cast<std::size_t>(f.height), static_cast<std::size_t>(f.width),
                               static_cast<std::size_t>(f.dim)});
    return Tensor::from_vector<float>(DType::f32, std::move(shape), f.data);
}

std::string meta_value(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

void validate_view(const ViewInputs& v, int h, int w, const std::string& suffix) {
    if (!v.image.same_shape(h, w) || v.image.channels() != 3) {
        throw ValidationError("image_" + suffix + " does not match the pair size");
    }
    if (!v.depth.same_shape(h, w) || v.depth.channels() != 1) {
        throw ValidationError("depth_" + suffix + " does not match the image size");
    }
    for (float d : v.depth.values()) {
        if (!std::isfinite(d)) throw ValidationError("depth_" + suffix + " holds non-finite values");
    }
    if (v.camera.width != w || v.camera.height != h) {
        throw ValidationError("camera " + suffix + " size does not match the image size");
    }
    try {
        v.camera.validate();
    } catch (const ValidationError& e) {
        throw ValidationError("invariant violation in camera " + suffix + ": " + e.what());
    }
    if (v.features) v.features->validate();
    if (v.embed) {
        v.embed->validate();
        if (v.embed->heads != 1) throw ValidationError("embed_" + suffix + " must have a single head");
    }
    if (v.seg_masks) {
        for (const auto& m : *v.seg_masks) {
            if (!m.same_shape(h, w)) throw ValidationError("seg_masks_" + suffix + " entry does not match the image size");
        }
    }
}

}  // namespace

void PairBundle::validate() const {
    const int h = view_1.image.height();
    const int w = view_1.image.width();
    if (h < 1 || w < 1) throw ValidationError("bundle images are empty");
    validate_view(view_1, h, w, "1");
    validate_view(view_2, h, w, "2");
    if (gt_mask && !gt_mask->same_shape(h, w)) throw ValidationError("gt_mask does not match the image size");
    if (view_1.features && view_2.features &&
        (view_1.features->heads != view_2.features->heads || view_1.features->dim != view_2.features->dim)) {
        throw ValidationError("features_1 and features_2 disagree on heads or dim");
    }
    if (view_1.embed && view_2.embed && view_1.embed->dim != view_2.embed->dim) {
        throw ValidationError("embed_1 and embed_2 disagree on dim");
    }
}

PairBundle load_bundle(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open manifest " + manifest.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!doc.is_object()) throw ValidationError("manifest must be a JSON object");
    for (const char* key : kRequired) {
        if (!doc.contains(key)) throw ValidationError(std::string("missing mandatory field ") + key);
    }
    const fs::path base = manifest.parent_path();
    auto path_of = [&](const json& v, const std::string& key) {
        if (!v.is_string()) throw ValidationError(key + " must be a relative path string");
        return base / v.get<std::string>();
    };
    auto tensor = [&](const std::string& key) { return read_tensor(path_of(doc.at(key), key)); };

    PairBundle b;
    for (int i = 1; i <= 2; ++i) {
        const std::string s = std::to_string(i);
        ViewInputs& v = i == 1 ? b.view_1 : b.view_2;
        v.image = image_from_tensor(tensor("image_" + s));
        const Tensor depth = tensor("depth_" + s);
        if (depth.rank() != 2) throw ValidationError("depth_" + s + " must be H×W");
        v.depth = float_grid_from_tensor(depth);
        v.camera.intrinsics = matrix_from_tensor<3>(tensor("intrinsics_" + s), "intrinsics_" + s);
        v.camera.pose = matrix_from_tensor<4>(tensor("extrinsics_" + s), "extrinsics_" + s);
        v.camera.width = v.image.width();
        v.camera.height = v.image.height();
        if (doc.contains("features_" + s)) v.features = features_from_tensor(tensor("features_" + s), "features_" + s, false);
        if (doc.contains("embed_" + s)) v.embed = features_from_tensor(tensor("embed_" + s), "embed_" + s, true);
        const std::string seg_key = "seg_masks_" + s;
        if (doc.contains(seg_key)) {
            const json& list = doc.at(seg_key);
            if (!list.is_array()) throw ValidationError(seg_key + " must be an array of paths");
            std::vector<Mask> masks;
            for (const auto& p : list) masks.push_back(mask_from_tensor(read_tensor(path_of(p, seg_key))));
            v.seg_masks = std::move(masks);
        }
    }
    if (doc.contains("gt_mask")) b.gt_mask = mask_from_tensor(tensor("gt_mask"));
    if (doc.contains("meta")) {
        if (!doc["meta"].is_object()) throw ValidationError("meta must be an object");
        for (const auto& [k, v] : doc["meta"].items()) b.meta[k] = meta_value(v);
    }
    b.validate();
    return b;
}

fs::path save_bundle(const PairBundle& bundle, const fs::path& dir, const std::string& manifest_name) {
    bundle.validate();
    fs::create_directories(dir);
    json doc;
    auto put = [&](const std::string& key, const Tensor& t) {
        const std::string file = key + ".npy";
        write_tensor(t, dir / file);
        doc[key] = file;
    };
    for (int i = 1; i <= 2; ++i) {
        const std::string s = std::to_string(i);
        const ViewInputs& v = i == 1 ? bundle.view_1 : bundle.view_2;
        put("image_" + s, image_to_tensor(v.image));
        put("depth_" + s, grid_to_tensor(v.depth));
        put("intrinsics_" + s, matrix_to_tensor<3>(v.camera.intrinsics));
        put("extrinsics_" + s, matrix_to_tensor<4>(v.camera.pose));
        if (v.features) put("features_" + s, features_to_tensor(*v.features, false));
        if (v.embed) put("embed_" + s, features_to_tensor(*v.embed, true));
        if (v.seg_masks) {
            json list = json::array();
            for (std::size_t k = 0; k < v.seg_masks->size(); ++k) {
                char name[64];
                std::snprintf(name, sizeof(name), "seg_masks_%s_%03zu.npy", s.c_str(), k);
                write_tensor(mask_to_tensor((*v.seg_masks)[k]), dir / name);
                list.push_back(name);
            }
            doc["seg_masks_" + s] = list;
        }
    }
    if (bundle.gt_mask) put("gt_mask", mask_to_tensor(*bundle.gt_mask));
    doc["meta"] = json::object();
    for (const auto& [k, v] : bundle.meta) doc["meta"][k] = v;

    const fs::path manifest = dir / manifest_name;
    std::ofstream out(manifest);
    if (!out) throw IoError("cannot write manifest " + manifest.string());
    out << doc.dump(2) << '\n';
    return manifest;
}

}  // namespace uscd
