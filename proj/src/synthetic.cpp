#include "uscd/synthetic.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "uscd/tensor.hpp"

namespace uscd::synth {

using nlohmann::json;

namespace {

constexpr double kOracleSlack = 1e-6;
constexpr double kRayEps = 1e-9;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

Eigen::Matrix3d camera_to_world_rotation(const Eigen::Vector3d& ypr_deg) {
    return (Eigen::AngleAxisd(deg2rad(ypr_deg.x()), Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(deg2rad(ypr_deg.y()), Eigen::Vector3d::UnitX()) *
            Eigen::AngleAxisd(deg2rad(ypr_deg.z()), Eigen::Vector3d::UnitZ()))
        .toRotationMatrix();
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t pixel_seed(std::uint64_t seed, std::uint64_t view, std::uint64_t stream, int x, int y) {
    std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
    for (std::uint64_t v : {view, stream, static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y)}) {
        h = mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
    }
    return h;
}

struct SlotKey {
    int id;
    Eigen::Vector3d albedo;
};

// Feature slots keyed on (surface id, albedo), shared by both views.
class SlotRegistry {
public:
    int slot_of(const Primitive& p) {
        for (std::size_t i = 0; i < keys_.size(); ++i) {
            if (keys_[i].id == p.id && keys_[i].albedo == p.albedo) return static_cast<int>(i);
        }
        keys_.push_back({p.id, p.albedo});
        return static_cast<int>(keys_.size() - 1);
    }
    std::size_t size() const { return keys_.size(); }

private:
    std::vector<SlotKey> keys_;
};

Eigen::Vector3d camera_center(const Camera& cam) {
    const Eigen::Matrix3d r = cam.pose.topLeftCorner<3, 3>();
    return -r.transpose() * cam.pose.topRightCorner<3, 1>();
}

Eigen::Vector3d ray_direction(const Camera& cam, const Eigen::Vector2d& p) {
    const Eigen::Matrix3d r = cam.pose.topLeftCorner<3, 3>();
    return r.transpose() * (cam.intrinsics.inverse() * Eigen::Vector3d(p.x(), p.y(), 1.0));
}

std::optional<double> intersect(const Primitive& prim, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
    double tmin = -std::numeric_limits<double>::infinity();
    double tmax = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < prim.lo[a] || o[a] > prim.hi[a]) return std::nullopt;
            continue;
        }
        double t1 = (prim.lo[a] - o[a]) / d[a];
        double t2 = (prim.hi[a] - o[a]) / d[a];
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
    }
    if (tmin > tmax || !(tmin > kRayEps)) return std::nullopt;
    return tmin;
}

Render render(const std::vector<Primitive>& world, const Camera& cam, SlotRegistry& slots) {
    Render r{DepthMap(cam.height, cam.width), Grid<int>(cam.height, cam.width, 1, -1),
             Grid<int>(cam.height, cam.width, 1, -1), RgbImage(cam.height, cam.width, 3)};
    const Eigen::Vector3d c = camera_center(cam);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const RayHit hit = cast_ray(world, cam, {x, y});
            if (hit.primitive < 0) continue;
            const Primitive& prim = world[static_cast<std::size_t>(hit.primitive)];
            r.depth(x, y) = static_cast<float>(hit.depth);
            r.surface(x, y) = prim.id;
            r.slot(x, y) = slots.slot_of(prim);
            const Eigen::Vector3d pw = c + hit.depth * ray_direction(cam, {x, y});
            const int checker = (static_cast<int>(std::floor(pw.x() * 2.0)) + static_cast<int>(std::floor(pw.y() * 2.0))) & 1;
            const double shade = checker ? 1.0 : 0.85;
            for (int ch = 0; ch < 3; ++ch) {
                r.image(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(prim.albedo[ch] * shade), 0L, 255L));
            }
        }
    }
    return r;
}

// Unit vector along `slot` tilted by a seeded angle of at most `noise_deg`.
void noisy_unit(std::span<float> out, int slot, double noise_deg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const int dim = static_cast<int>(out.size());
    std::vector<double> u(dim);
    double norm = 0.0;
    for (int k = 0; k < dim; ++k) {
        u[k] = k == slot ? 0.0 : normal(rng);
        norm += u[k] * u[k];
    }
    const double angle = std::uniform_real_distribution<double>(0.0, deg2rad(noise_deg))(rng);
    norm = std::sqrt(norm);
    for (int k = 0; k < dim; ++k) {
        const double base = k == slot ? std::cos(angle) : 0.0;
        const double tilt = norm > 0.0 ? std::sin(angle) * u[k] / norm : 0.0;
        out[k] = static_cast<float>(base + tilt);
    }
}

FeatureTensor make_features(const Grid<int>& slot, int heads, int dim, double noise_deg, std::uint64_t seed,
                            int view, int stream_base) {
    FeatureTensor f(heads, slot.height(), slot.width(), dim);
    for (int h = 0; h < heads; ++h) {
        for (int y = 0; y < slot.height(); ++y) {
            for (int x = 0; x < slot.width(); ++x) {
                const int s = slot(x, y);
                if (s < 0) continue;  // no surface: zero vector
                noisy_unit(f.at(h, x, y), s, noise_deg,
                           pixel_seed(seed, static_cast<std::uint64_t>(view), static_cast<std::uint64_t>(stream_base + h), x, y));
            }
        }
    }
    return f;
}

std::vector<Mask> segment(const Render& r, const std::vector<Primitive>& world) {
    std::vector<Mask> masks;
    for (const auto& prim : world) {
        Mask m(r.surface.height(), r.surface.width());
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = r.surface[i] == prim.id ? 1 : 0;
        if (count(m) > 0) masks.push_back(std::move(m));
    }
    return masks;
}

Mask changed_pixels(const Render& before, const Render& after) {
    Mask m(before.slot.height(), before.slot.width());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = before.slot[i] != after.slot[i] ? 1 : 0;
    return m;
}

bool within_image(double u, double v, int width, int height) {
    return u >= -kOracleSlack && u <= width - 1 + kOracleSlack && v >= -kOracleSlack && v <= height - 1 + kOracleSlack;
}

Eigen::Vector3d vec3(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
json to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Primitive primitive_from_json(const json& j) {
    Primitive p;
    p.id = j.at("id").get<int>();
    p.lo = vec3(j.at("min"));
    p.hi = vec3(j.at("max"));
    if (j.contains("albedo")) p.albedo = vec3(j.at("albedo"));
    for (int a = 0; a < 3; ++a) {
        if (p.lo[a] > p.hi[a]) throw ValidationError("primitive " + std::to_string(p.id) + " has min > max");
    }
    return p;
}

json primitive_to_json(const Primitive& p) {
    return {{"id", p.id}, {"min", to_json(p.lo)}, {"max", to_json(p.hi)}, {"albedo", to_json(p.albedo)}};
}

CameraSpec camera_from_json(const json& j) {
    CameraSpec c;
    c.fx = j.value("fx", c.fx);
    c.fy = j.value("fy", c.fy);
    c.cx = j.value("cx", c.cx);
    c.cy = j.value("cy", c.cy);
    if (j.contains("position")) c.position = vec3(j.at("position"));
    if (j.contains("rotation_deg")) c.rotation_deg = vec3(j.at("rotation_deg"));
    return c;
}

json camera_to_json(const CameraSpec& c) {
    return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"position", to_json(c.position)},
            {"rotation_deg", to_json(c.rotation_deg)}};
}

CameraSpec default_camera(int width, int height) {
    CameraSpec c;
    c.fx = c.fy = 0.8 * width;
    c.cx = (width - 1) / 2.0;
    c.cy = (height - 1) / 2.0;
    return c;
}

constexpr double kWallDepth = 10.0;

Primitive wall() { return {0, {-60.0, -60.0, kWallDepth}, {60.0, 60.0, kWallDepth}, {150.0, 140.0, 120.0}}; }

Primitive box_on_wall(int id, double cx, double cy, double half, double thickness, const Eigen::Vector3d& albedo) {
    return {id, {cx - half, cy - half, kWallDepth - thickness}, {cx + half, cy + half, kWallDepth}, albedo};
}

Eigen::Vector3d random_albedo(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(40.0, 220.0);
    return {std::round(u(rng)), std::round(u(rng)), std::round(u(rng))};
}

}  // namespace

Camera make_camera(const CameraSpec& spec, int width, int height) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
    k(0, 0) = spec.fx;
    k(1, 1) = spec.fy;
    k(0, 2) = spec.cx;
    k(1, 2) = spec.cy;
    const Eigen::Matrix3d r = camera_to_world_rotation(spec.rotation_deg).transpose();
    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    t.topLeftCorner<3, 3>() = r;
    t.topRightCorner<3, 1>() = -r * spec.position;
    // Round element-wise; Eigen's packet cast left some entries in double precision.
    cam.intrinsics = k.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
    cam.pose = t.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
    return cam;
}

std::vector<Primitive> world_before(const SceneSpec& spec) { return spec.layout; }

std::vector<Primitive> world_after(const SceneSpec& spec) {
    std::vector<Primitive> world = spec.layout;
    for (const auto& c : spec.changes) {
        switch (c.kind) {
            case ChangeKind::insert:
                if (!c.primitive) throw ValidationError("insert change without a primitive");
                world.push_back(*c.primitive);
                break;
            case ChangeKind::remove: {
                auto it = std::find_if(world.begin(), world.end(), [&](const Primitive& p) { return p.id == c.target; });
                if (it == world.end()) throw ValidationError("remove targets unknown primitive " + std::to_string(c.target));
                world.erase(it);
                break;
            }
            case ChangeKind::recolor: {
                auto it = std::find_if(world.begin(), world.end(), [&](const Primitive& p) { return p.id == c.target; });
                if (it == world.end()) throw ValidationError("recolor targets unknown primitive " + std::to_string(c.target));
                it->albedo = c.albedo;
                break;
            }
        }
    }
    return world;
}

RayHit cast_ray(const std::vector<Primitive>& world, const Camera& cam, const Eigen::Vector2d& p) {
    const Eigen::Vector3d o = camera_center(cam);
    const Eigen::Vector3d d = ray_direction(cam, p);
    RayHit best;
    for (std::size_t i = 0; i < world.size(); ++i) {
        auto t = intersect(world[i], o, d);
        if (t && (best.primitive < 0 || *t < best.depth)) {
            best.depth = *t;
            best.primitive = static_cast<int>(i);
        }
    }
    return best;
}

SyntheticPair generate_scene(const SceneSpec& spec) {
    if (spec.height < 2 || spec.width < 2) throw ValidationError("synthetic scene resolution must be at least 2×2");
    if (spec.features.heads < 1 || spec.features.dim < 1 || spec.features.embed_dim < 1) {
        throw ValidationError("synthetic feature sizes must be positive");
    }
    const auto before = world_before(spec);
    const auto after = world_after(spec);
    const Camera cam1 = make_camera(spec.cam1, spec.width, spec.height);
    const Camera cam2 = make_camera(spec.cam2, spec.width, spec.height);
    cam1.validate();
    cam2.validate();

    SlotRegistry slots;
    for (const auto& p : before) slots.slot_of(p);
    for (const auto& p : after) slots.slot_of(p);
    if (static_cast<int>(slots.size()) > std::min(spec.features.dim, spec.features.embed_dim)) {
        throw ValidationError("synthetic feature dim too small for the number of surfaces");
    }

    const Render r1 = render(before, cam1, slots);
    const Render r2 = render(after, cam2, slots);
    const Render r1_after = render(after, cam1, slots);
    const Render r2_before = render(before, cam2, slots);
    for (const Render* r : {&r1, &r2}) {
        if (std::all_of(r->surface.values().begin(), r->surface.values().end(), [](int s) { return s < 0; })) {
            throw ValidationError("degenerate camera: no visible surface");
        }
    }

    SyntheticPair out;
    PairBundle& b = out.bundle;
    const FeatureSpec& fs = spec.features;
    b.view_1 = {r1.image, r1.depth, cam1, make_features(r1.slot, fs.heads, fs.dim, fs.noise_deg, spec.seed, 1, 0),
                make_features(r1.slot, 1, fs.embed_dim, fs.noise_deg, spec.seed, 1, 100), std::nullopt};
    b.view_2 = {r2.image, r2.depth, cam2, make_features(r2.slot, fs.heads, fs.dim, fs.noise_deg, spec.seed, 2, 0),
                make_features(r2.slot, 1, fs.embed_dim, fs.noise_deg, spec.seed, 2, 100), std::nullopt};
    if (spec.with_seg_masks) {
        b.view_1.seg_masks = segment(r1, before);
        b.view_2.seg_masks = segment(r2, after);
    }
    b.meta["source"] = "synthetic";
    b.meta["seed"] = std::to_string(spec.seed);
    b.meta["layer"] = std::to_string(kDefaultFeatureLayer);

    GroundTruth& gt = out.truth;
    gt.overlap_1 = oracle_overlap(b, 1);
    gt.overlap_2 = oracle_overlap(b, 2);
    gt.change_1 = mask_and(changed_pixels(r1, r1_after), gt.overlap_1);
    gt.change_2 = mask_and(changed_pixels(r2_before, r2), gt.overlap_2);
    gt.occlusion_1 = oracle_occlusion(spec, 1);
    gt.occlusion_2 = oracle_occlusion(spec, 2);
    gt.surface_1 = r1.surface;
    gt.surface_2 = r2.surface;
    b.gt_mask = gt.change_1;
    return out;
}

Mask oracle_overlap(const PairBundle& bundle, int view) {
    const ViewInputs& src = view == 1 ? bundle.view_1 : bundle.view_2;
    const ViewInputs& dst = view == 1 ? bundle.view_2 : bundle.view_1;
    const Eigen::Matrix3d k_inv = src.camera.intrinsics.inverse();
    const Eigen::Matrix4d cam_to_world = src.camera.pose.inverse();
    Mask m(src.depth.height(), src.depth.width());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            const double d = src.depth(x, y);
            if (!(d > 0.0)) continue;
            Eigen::Vector4d pc;
            pc << d * (k_inv * Eigen::Vector3d(x, y, 1.0)), 1.0;
            const Eigen::Vector4d pd = dst.camera.pose * (cam_to_world * pc);
            if (!(pd.z() > kBehindCameraEps)) continue;
            const Eigen::Vector3d proj = dst.camera.intrinsics * pd.head<3>();
            m(x, y) = within_image(proj.x() / proj.z(), proj.y() / proj.z(), dst.camera.width, dst.camera.height) ? 1 : 0;
        }
    }
    return m;
}

Mask oracle_occlusion(const SceneSpec& spec, int view) {
    const auto before = world_before(spec);
    const auto after = world_after(spec);
    const auto& world_src = view == 1 ? before : after;
    const auto& world_dst = view == 1 ? after : before;
    const Camera cam_src = make_camera(view == 1 ? spec.cam1 : spec.cam2, spec.width, spec.height);
    const Camera cam_dst = make_camera(view == 1 ? spec.cam2 : spec.cam1, spec.width, spec.height);
    const Eigen::Vector3d c_src = camera_center(cam_src);

    Mask m(spec.height, spec.width);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const RayHit hit = cast_ray(world_src, cam_src, {x, y});
            if (hit.primitive < 0) continue;
            const Eigen::Vector3d pw = c_src + hit.depth * ray_direction(cam_src, {x, y});
            const Eigen::Vector3d pd = cam_dst.pose.topLeftCorner<3, 3>() * pw + cam_dst.pose.topRightCorner<3, 1>();
            if (!(pd.z() > kBehindCameraEps)) continue;
            const Eigen::Vector3d proj = cam_dst.intrinsics * pd;
            const Eigen::Vector2d p2(proj.x() / proj.z(), proj.y() / proj.z());
            if (!within_image(p2.x(), p2.y(), spec.width, spec.height)) continue;
            const RayHit other = cast_ray(world_dst, cam_dst, p2);
            if (other.primitive >= 0 && pd.z() > other.depth + kOracleSlack) m(x, y) = 1;
        }
    }
    return m;
}

SceneSpec scene_from_json(const json& j) {
    SceneSpec s;
    if (j.contains("resolution")) {
        s.height = j.at("resolution").at(0).get<int>();
        s.width = j.at("resolution").at(1).get<int>();
    }
    s.seed = j.value("seed", std::uint64_t{0});
    for (const auto& p : j.at("layout")) s.layout.push_back(primitive_from_json(p));
    s.cam1 = camera_from_json(j.at("cam1"));
    s.cam2 = camera_from_json(j.at("cam2"));
    if (j.contains("changes")) {
        for (const auto& c : j.at("changes")) {
            Change ch;
            const std::string kind = c.at("type").get<std::string>();
            if (kind == "insert") {
                ch.kind = ChangeKind::insert;
                ch.primitive = primitive_from_json(c.at("primitive"));
            } else if (kind == "remove") {
                ch.kind = ChangeKind::remove;
                ch.target = c.at("target").get<int>();
            } else if (kind == "recolor") {
                ch.kind = ChangeKind::recolor;
                ch.target = c.at("target").get<int>();
                ch.albedo = vec3(c.at("albedo"));
            } else {
                throw ValidationError("unknown change type '" + kind + "'");
            }
            s.changes.push_back(ch);
        }
    }
    if (j.contains("features")) {
        const json& f = j.at("features");
        s.features.heads = f.value("heads", s.features.heads);
        s.features.dim = f.value("dim", s.features.dim);
        s.features.embed_dim = f.value("embed_dim", s.features.embed_dim);
        s.features.noise_deg = f.value("noise_deg", s.features.noise_deg);
    }
    s.with_seg_masks = j.value("seg_masks", true);
    return s;
}

json scene_to_json(const SceneSpec& s) {
    json j;
    j["resolution"] = {s.height, s.width};
    j["seed"] = s.seed;
    j["layout"] = json::array();
    for (const auto& p : s.layout) j["layout"].push_back(primitive_to_json(p));
    j["cam1"] = camera_to_json(s.cam1);
    j["cam2"] = camera_to_json(s.cam2);
    j["changes"] = json::array();
    for (const auto& c : s.changes) {
        switch (c.kind) {
            case ChangeKind::insert:
                j["changes"].push_back({{"type", "insert"}, {"primitive", primitive_to_json(*c.primitive)}});
                break;
            case ChangeKind::remove: j["changes"].push_back({{"type", "remove"}, {"target", c.target}}); break;
            case ChangeKind::recolor:
                j["changes"].push_back({{"type", "recolor"}, {"target", c.target}, {"albedo", to_json(c.albedo)}});
                break;
        }
    }
    j["features"] = {{"heads", s.features.heads},
                     {"dim", s.features.dim},
                     {"embed_dim", s.features.embed_dim},
                     {"noise_deg", s.features.noise_deg}};
    j["seg_masks"] = s.with_seg_masks;
    return j;
}

SceneSpec preset_scene(std::string_view kind, std::uint64_t seed, int size) {
    if (size < 16) throw ValidationError("synthetic preset size must be at least 16");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    SceneSpec s;
    s.height = s.width = size;
    s.seed = seed;
    s.cam1 = default_camera(s.width, s.height);
    s.cam2 = s.cam1;
    s.layout.push_back(wall());

    // Small viewpoint change used by the change-detection presets.
    auto small_motion = [&] {
        s.cam2.position = {0.5 * unit(rng), 0.3 * unit(rng), 0.3 * unit(rng)};
        s.cam2.rotation_deg = {4.0 * unit(rng), 2.0 * unit(rng), 0.0};
    };
    const Eigen::Vector3d distractor_color(60.0, 150.0, 70.0);

    if (kind == "plane") {
        return s;
    }
    if (kind == "plane_box") {
        s.layout.push_back(box_on_wall(1, 0.0, 0.0, 1.5, 3.0, {200.0, 60.0, 50.0}));
        const double yaw = 10.0;
        const Eigen::Vector3d pivot(0.0, 0.0, kWallDepth);
        s.cam2.position = pivot + camera_to_world_rotation({yaw, 0.0, 0.0}) * (s.cam1.position - pivot);
        s.cam2.rotation_deg = {yaw, 0.0, 0.0};
        return s;
    }
    if (kind == "recolor" || kind == "no_change") {
        s.layout.push_back(box_on_wall(1, 0.8 * unit(rng), 0.8 * unit(rng), 1.4, 1.0, {200.0, 60.0, 50.0}));
        s.layout.push_back(box_on_wall(2, 2.8 + 0.3 * unit(rng), -2.6 + 0.3 * unit(rng), 0.7, 0.6, distractor_color));
        small_motion();
        if (kind == "recolor") s.changes.push_back({ChangeKind::recolor, 1, {40.0, 70.0, 210.0}, std::nullopt});
        return s;
    }
    if (kind == "insert") {
        s.layout.push_back(box_on_wall(2, -2.8 + 0.3 * unit(rng), 2.6 + 0.3 * unit(rng), 0.7, 0.6, distractor_color));
        small_motion();
        s.changes.push_back({ChangeKind::insert, 0, {},
                             box_on_wall(10, 0.8 * unit(rng), 0.8 * unit(rng), 1.4, 0.5, {220.0, 200.0, 40.0})});
        return s;
    }
    if (kind == "occlusion") {
        s.layout.push_back(box_on_wall(1, 0.5 * unit(rng), 0.5 * unit(rng), 1.2, 4.0, {200.0, 60.0, 50.0}));
        const double sign = unit(rng) < 0.0 ? -1.0 : 1.0;
        s.cam2.position = {sign * (1.0 + 0.5 * (unit(rng) + 1.0)), 0.2 * unit(rng), 0.0};
        s.cam2.rotation_deg = {-sign * 3.0, 0.0, 0.0};
        return s;
    }
    throw ValidationError("unknown synthetic preset '" + std::string(kind) + "'");
}

SceneSpec random_geometry_scene(std::uint64_t seed, double max_rotation_deg, double max_translation_frac) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int attempt = 0; attempt < 100; ++attempt) {
        SceneSpec s;
        s.height = s.width = 64;
        s.seed = seed;
        s.cam1 = default_camera(s.width, s.height);
        s.cam2 = s.cam1;
        s.layout.push_back(wall());
        const int boxes = 1 + static_cast<int>(u01(rng) * 2.0);
        for (int b = 0; b < boxes; ++b) {
            s.layout.push_back(box_on_wall(b + 1, 2.0 * unit(rng), 2.0 * unit(rng), 0.8 + 0.9 * u01(rng),
                                           1.0 + 2.0 * u01(rng), random_albedo(rng)));
        }
        Eigen::Vector3d axis(unit(rng), unit(rng), 0.3 * unit(rng));
        if (axis.norm() < 1e-3) axis = Eigen::Vector3d::UnitY();
        axis.normalize();
        const double angle = deg2rad(max_rotation_deg * u01(rng));
        const Eigen::Matrix3d r_cw = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
        // Express the rotation as yaw/pitch/roll consistent with camera_to_world_rotation.
        const Eigen::Vector3d ypr = r_cw.eulerAngles(1, 0, 2) * 180.0 / std::numbers::pi;
        s.cam2.rotation_deg = ypr;
        Eigen::Vector3d dir(unit(rng), unit(rng), unit(rng));
        if (dir.norm() < 1e-3) dir = Eigen::Vector3d::UnitX();
        s.cam2.position = dir.normalized() * (max_translation_frac * kWallDepth * u01(rng));

        const SyntheticPair pair = generate_scene(s);
        const double overlap = static_cast<double>(count(pair.truth.overlap_1)) / static_cast<double>(s.height * s.width);
        if (overlap >= 0.2) return s;
    }
    throw ValidationError("could not draw a scene with sufficient overlap");
}

}  // namespace uscd::synth
