// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <Eigen/Geometry>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "uscd/illumination.hpp"
#include "uscd/metrics.hpp"
#include "uscd/pipeline.hpp"
#include "uscd/synthetic.hpp"
#include "uscd/tensor.hpp"

using namespace uscd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& why) {
        if (!ok && pass) detail << why << "; ";
        pass = pass && ok;
    }
};

double plain_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

double positive_depth_median(const DepthMap& d) {
    std::vector<double> v;
    for (float x : d.values())
        if (x > 0) v.push_back(x);
    return plain_median(v);
}

Camera pinhole(double f, int w, int h) {
    Camera c;
    c.intrinsics << f, 0, (w - 1) / 2.0, 0, f, (h - 1) / 2.0, 0, 0, 1;
    c.width = w;
    c.height = h;
    return c;
}

// Depth discontinuities (5% jump or a missing neighbour), dilated by 2 px.
Mask discontinuity_band(const DepthMap& d) {
    const int h = d.height(), w = d.width();
    Mask edge(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float a = d(x, y);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (!d.contains(x + dx, y + dy)) continue;
                    const float b = d(x + dx, y + dy);
                    if ((a > 0) != (b > 0) || (a > 0 && b > 0 && std::abs(a - b) > 0.05f * std::min(a, b))) edge(x, y) = 1;
                }
            }
        }
    }
    Mask band(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (edge(x, y))
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx)
                        if (band.contains(x + dx, y + dy)) band(x + dx, y + dy) = 1;
    return band;
}

// -----------------------------------------------------------------------------

Outcome geometry_identity() {
    Outcome o;
    const int n = 128;
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<float> u(0.5f, 30.0f);
    DepthMap depth(n, n);
    for (std::size_t i = 0; i < depth.size(); ++i) depth[i] = (rng() % 13 == 0) ? 0.0f : u(rng);
    Camera cam = pinhole(0.8 * n, n, n);
    cam.pose.topLeftCorner<3, 3>() = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    cam.pose.topRightCorner<3, 1>() = Eigen::Vector3d(0.4, -1.0, 2.0);

    const auto t0 = Clock::now();
    const CorrespondenceField f = correspondence_field(depth, cam, cam);
    const OcclusionMask occ = occlusion_mask(f, depth);
    const double secs = seconds_since(t0);

    double worst = 0.0;
    bool overlap_ok = true;
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            overlap_ok = overlap_ok && (f.valid(x, y) != 0) == (depth(x, y) > 0);
            if (f.valid(x, y)) worst = std::max({worst, std::abs(double(f.target(x, y, 0)) - x), std::abs(double(f.target(x, y, 1)) - y)});
        }
    }
    o.require(worst <= 1e-4, "identity error " + std::to_string(worst));
    o.require(overlap_ok, "overlap differs from depth>0");
    o.require(count(occ.mask) == 0, "occlusion not empty");
    o.require(secs < 1.0, "runtime " + std::to_string(secs));
    o.detail << "max |Δp| " << worst << " px, " << secs << " s at 128x128";
    return o;
}

Outcome reprojection_fixture() {
    Outcome o;
    const int n = 101;
    Camera c1 = pinhole(100, n, n);
    Camera c2 = c1;
    c2.pose(0, 3) = 0.2;
    const RelativePose rel = relative_pose(c1.pose, c2.pose);
    const Reprojection r = reproject_pixel({50, 50}, 2.0, c1.intrinsics, c2.intrinsics, rel);
    o.require(r.valid && static_cast<float>(r.pixel.x()) == 60.0f && static_cast<float>(r.pixel.y()) == 50.0f,
              "reproject_pixel mismatch");
    const CorrespondenceField f = correspondence_field(DepthMap(n, n, 1, 2.0f), c1, c2);
    o.require(f.valid(50, 50) && f.target(50, 50, 0) == 60.0f && f.target(50, 50, 1) == 50.0f, "field mismatch");
    o.detail << "p2 = (" << f.target(50, 50, 0) << ", " << f.target(50, 50, 1) << ")";
    return o;
}

struct OracleRun {
    Outcome outcome;
    std::vector<double> tau_ratio;  // tau / (alpha·med(D_other)), every direction of every scene
};

OracleRun oracle_equivalence() {
    OracleRun run;
    Outcome& o = run.outcome;
    const auto t0 = Clock::now();
    double worst = 1.0;
    int scenes = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed, ++scenes) {
        const synth::SceneSpec spec = synth::random_geometry_scene(seed, 30.0, 0.2);
        const synth::SyntheticPair p = synth::generate_scene(spec);
        const PairBundle& b = p.bundle;
        for (int v = 1; v <= 2; ++v) {
            const ViewInputs& self = v == 1 ? b.view_1 : b.view_2;
            const ViewInputs& other = v == 1 ? b.view_2 : b.view_1;
            const CorrespondenceField f = correspondence_field(self.depth, self.camera, other.camera);
            const Mask& oracle_overlap = v == 1 ? p.truth.overlap_1 : p.truth.overlap_2;
            o.require(f.valid == oracle_overlap, "overlap mismatch at seed " + std::to_string(seed));

            const OcclusionMask occ = occlusion_mask(f, other.depth);
            run.tau_ratio.push_back(occ.threshold.tau / (kDefaultAlpha * positive_depth_median(other.depth)));

            Mask excluded = discontinuity_band(self.depth);
            const Mask other_band = discontinuity_band(other.depth);
            for (int y = 0; y < f.height(); ++y)
                for (int x = 0; x < f.width(); ++x)
                    if (f.valid(x, y)) {
                        const Eigen::Vector2i q = nearest_pixel(f.at(x, y));
                        if (other_band(q.x(), q.y())) excluded(x, y) = 1;
                    }
            const Mask& oracle_occ = v == 1 ? p.truth.occlusion_1 : p.truth.occlusion_2;
            std::size_t n = 0, agree = 0;
            for (std::size_t i = 0; i < excluded.size(); ++i) {
                if (excluded[i]) continue;
                ++n;
                agree += (occ.mask[i] != 0) == (oracle_occ[i] != 0);
            }
            const double rate = n ? static_cast<double>(agree) / static_cast<double>(n) : 1.0;
            worst = std::min(worst, rate);
            o.require(rate >= 0.99, "occlusion agreement " + std::to_string(rate) + " at seed " + std::to_string(seed));
        }
    }
    const double secs = seconds_since(t0);
    o.require(secs < 30.0, "runtime " + std::to_string(secs));
    o.detail << scenes << " scenes, overlap exact, worst occlusion agreement " << worst * 100.0 << "%, " << secs << " s";
    return run;
}

Outcome adaptive_tau_check(const std::vector<double>& ratios) {
    Outcome o;
    const double min_ratio = *std::min_element(ratios.begin(), ratios.end());
    o.require(min_ratio >= 1.0, "tau below alpha·med(D) on a synthetic scene");

    // Constant ΔD = 0.125 over depths drawn from {2, 4, 8, 16}.
    const int w = 32, h = 24;
    DepthMap other(h, w);
    std::vector<double> depths;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            other(x, y) = static_cast<float>(2 << ((x * 7 + y * 3) % 4));
            depths.push_back(other(x, y));
        }
    DepthMap src = other;
    for (auto& v : src.values()) v += 0.125f;
    const Camera cam = pinhole(30, w, h);
    const OcclusionMask occ = occlusion_mask(correspondence_field(src, cam, cam), other);
    const double expected = 0.03 * plain_median(depths);
    o.require(occ.threshold.tau == expected, "constant-ΔD tau " + std::to_string(occ.threshold.tau));
    o.detail << ratios.size() << " directions, min tau/(0.03·med) " << min_ratio << "; fixture tau " << occ.threshold.tau
             << " == " << expected;
    return o;
}

struct EndToEnd {
    Outcome detection;
    Outcome invariant;
};

EndToEnd end_to_end() {
    EndToEnd e;
    Outcome& o = e.detection;
    std::size_t runs = 0, violations = 0;
    auto check_invariant = [&](const DetectionResult& r) {
        ++runs;
        violations += count(mask_and(r.view_1.refined.mask, r.view_1.occlusion.mask));
        violations += count(mask_and(r.view_2.refined.mask, r.view_2.occlusion.mask));
    };

    double worst_f1 = 1.0, worst_fp = 0.0, slowest = 0.0;
    for (const char* kind : {"recolor", "insert", "no_change"}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto t0 = Clock::now();
            const synth::SyntheticPair p = synth::generate_scene(synth::preset_scene(kind, seed, 128));
            const DetectionResult r = run_detect(p.bundle);
            const double secs = seconds_since(t0);
            slowest = std::max(slowest, secs);
            check_invariant(r);
            const std::string tag = std::string(kind) + "/" + std::to_string(seed);
            if (std::string(kind) == "no_change") {
                const double fp = static_cast<double>(count(mask_and(r.final_mask.mask, p.truth.overlap_1))) /
                                  static_cast<double>(count(p.truth.overlap_1));
                worst_fp = std::max(worst_fp, fp);
                o.require(fp <= 0.005, "FP rate " + std::to_string(fp) + " on " + tag);
            } else {
                const double f1 = score(r.final_mask.mask, p.truth.change_1).scores.f1;
                worst_f1 = std::min(worst_f1, f1);
                o.require(f1 >= 0.95, "F1 " + std::to_string(f1) + " on " + tag);
            }
            o.require(secs < 10.0, "runtime " + std::to_string(secs) + " s on " + tag);
        }
    }
    o.detail << "min F1 " << worst_f1 << ", max no-change FP rate " << worst_fp * 100.0 << "%, slowest " << slowest
             << " s/scene";

    // Extra runs for the invariant across the other presets and the ablation scenes.
    for (const char* kind : {"plane_box", "occlusion"}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) check_invariant(run_detect(synth::generate_scene(synth::preset_scene(kind, seed)).bundle));
    }
    e.invariant.require(violations == 0, std::to_string(violations) + " refined pixels inside the occlusion mask");
    e.invariant.detail << runs << " runs, " << violations << " violating pixels";
    return e;
}

Outcome ablation() {
    Outcome o;
    int better = 0, seeds = 0;
    std::ostringstream counts;
    for (std::uint64_t seed = 0; seed < 10; ++seed, ++seeds) {
        synth::SyntheticPair p = synth::generate_scene(synth::preset_scene("occlusion", seed));
        p.bundle.view_1.seg_masks.reset();
        p.bundle.view_2.seg_masks.reset();
        PipelineConfig with, without;
        without.use_occlusion = false;
        const Mask& gt = p.truth.change_1;
        const auto fp_with = score(run_detect(p.bundle, with).final_mask.mask, gt).confusion.fp;
        const auto fp_without = score(run_detect(p.bundle, without).final_mask.mask, gt).confusion.fp;
        better += fp_with < fp_without;
        counts << fp_with << "<" << fp_without << (seed < 9 ? " " : "");
    }
    o.require(better * 10 >= seeds * 9, "occlusion filtering reduced FP on only " + std::to_string(better) + " seeds");
    o.detail << better << "/" << seeds << " seeds with fewer FP (" << counts.str() << ")";
    return o;
}

Outcome metrics_oracle() {
    Outcome o;
    Mask gt(10, 10), pred(10, 10);
    gt(1, 1) = gt(2, 1) = 1;
    pred(1, 1) = pred(7, 7) = 1;
    const Scores s = score(pred, gt).scores;
    const double miou = (1.0 / 3.0 + 97.0 / 99.0) / 2.0;
    o.require(std::abs(s.precision - 0.5) <= 1e-6 && std::abs(s.recall - 0.5) <= 1e-6 && std::abs(s.f1 - 0.5) <= 1e-6,
              "P/R/F1");
    o.require(std::abs(s.miou - miou) <= 1e-6, "mIoU " + std::to_string(s.miou));
    Mask disjoint(10, 10);
    disjoint(5, 5) = 1;
    o.require(score(gt, gt).scores.f1 == 1.0, "F1(A,A)");
    o.require(score(disjoint, gt).scores.f1 == 0.0, "F1(disjoint)");
    o.detail << "F1 " << s.f1 << ", mIoU " << s.miou;
    return o;
}

std::vector<std::byte> npy_with_header(const std::string& body, std::size_t payload) {
    std::string header = body;
    const std::size_t total = 10 + header.size() + 1;
    header.append((total + 63) / 64 * 64 - total, ' ');
    header.push_back('\n');
    std::vector<std::byte> out;
    for (char c : std::string("\x93NUMPY\x01\x00", 8)) out.push_back(static_cast<std::byte>(c));
    out.push_back(static_cast<std::byte>(header.size() & 0xff));
    out.push_back(static_cast<std::byte>(header.size() >> 8));
    for (char c : header) out.push_back(static_cast<std::byte>(c));
    out.resize(out.size() + payload, std::byte{0});
    return out;
}

Outcome interchange() {
    Outcome o;
    std::mt19937_64 rng(2024);
    int exact = 0;
    const auto dir = std::filesystem::temp_directory_path() / "uscd_acceptance_npy";
    std::filesystem::create_directories(dir);
    for (int i = 0; i < 1000; ++i) {
        const auto dtype = static_cast<DType>(rng() % 4);
        std::vector<std::size_t> shape(rng() % 5);
        for (auto& d : shape) d = rng() % 6;
        Tensor t(dtype, shape);
        for (auto& b : t.bytes()) b = static_cast<std::byte>(dtype == DType::boolean ? rng() % 2 : rng() % 256);
        bool ok = decode_npy(encode_npy(t)) == t;
        if (i % 10 == 0) {
            write_tensor(t, dir / "t.npy");
            ok = ok && read_tensor(dir / "t.npy") == t;
        }
        exact += ok;
    }
    std::filesystem::remove_all(dir);
    o.require(exact == 1000, std::to_string(1000 - exact) + " tensors changed");

    std::vector<std::vector<std::byte>> corpus = {
        npy_with_header("{'descr': '<f4', 'fortran_order': False, }", 4),
        npy_with_header("{'fortran_order': False, 'shape': (1,), }", 4),
        npy_with_header("{'descr': '<f4', 'shape': (1,), }", 4),
        npy_with_header("{'descr': '<f4', 'fortran_order': True, 'shape': (1,), }", 4),
        npy_with_header("{'descr': '>f4', 'fortran_order': False, 'shape': (1,), }", 4),
        npy_with_header("{'descr': '<i4', 'fortran_order': False, 'shape': (1,), }", 4),
        npy_with_header("{'descr': '<f4', 'fortran_order': False, 'shape': (1, 1, 1, 1, 1), }", 4),
        npy_with_header("{'descr': '<f4', 'fortran_order': False, 'shape': (-1,), }", 4),
        npy_with_header("{'descr': '<f4', 'fortran_order': False, 'shape': (2,), }", 4),
        npy_with_header("{'descr': '<f4', 'fortran_order': False, 'shape': (1,), }", 8),
        npy_with_header("{'descr': '<f4' 'fortran_order': False, 'shape': (1,), }", 4),
        npy_with_header("{'descr': '<f4', 'fortran_order': False, 'shape': (1,), 'extra': 0, }", 4),
        npy_with_header("not a dict", 4),
        npy_with_header("{'descr': '|b1', 'fortran_order': False, 'shape': (1,), }", 0),
        {},
    };
    auto bad_magic = npy_with_header("{'descr': '<f4', 'fortran_order': False, 'shape': (1,), }", 4);
    bad_magic[0] = std::byte{'N'};
    corpus.push_back(bad_magic);
    auto bad_version = bad_magic;
    bad_version[0] = std::byte{0x93};
    bad_version[6] = std::byte{2};
    corpus.push_back(bad_version);
    auto no_newline = npy_with_header("{'descr': '<f4', 'fortran_order': False, 'shape': (1,), }", 4);
    no_newline[63] = std::byte{' '};
    corpus.push_back(no_newline);
    auto short_len = npy_with_header("{'descr': '<f4', 'fortran_order': False, 'shape': (1,), }", 4);
    short_len[8] = std::byte{0xff};
    short_len[9] = std::byte{0xff};
    corpus.push_back(short_len);
    auto bad_bool = npy_with_header("{'descr': '|b1', 'fortran_order': False, 'shape': (1,), }", 1);
    bad_bool.back() = std::byte{7};
    corpus.push_back(bad_bool);

    int rejected = 0;
    for (const auto& bytes : corpus) {
        try {
            decode_npy(bytes);
        } catch (const ValidationError&) {
            ++rejected;
        }
    }
    o.require(rejected == static_cast<int>(corpus.size()),
              std::to_string(corpus.size() - rejected) + " malformed files accepted");
    o.detail << exact << "/1000 bit-exact, " << rejected << "/" << corpus.size() << " malformed rejected";
    return o;
}

Outcome illumination() {
    Outcome o;
    // Values are multiples of 4 in [60, 120], so every gain below stays integral and unsaturated.
    const int n = 64;
    std::mt19937_64 rng(5);
    RgbImage base(n, n, 3);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
            for (int c = 0; c < 3; ++c) {
                const double smooth = 0.5 + 0.5 * std::sin(0.2 * x + 0.3 * y + c);
                const int level = std::clamp(static_cast<int>(smooth * 12.0) + static_cast<int>(rng() % 4), 0, 15);
                base(x, y, c) = static_cast<std::uint8_t>(60 + 4 * level);
            }
    const RgbImage ref = retinex(base);
    int worst = 0;
    for (double gain : {0.5, 0.75, 1.25, 1.5, 2.0}) {
        RgbImage scaled = base;
        for (auto& v : scaled.values()) v = static_cast<std::uint8_t>(std::lround(v * gain));
        const RgbImage out = retinex(scaled);
        for (std::size_t i = 0; i < out.size(); ++i) worst = std::max(worst, std::abs(out[i] - ref[i]));
    }
    o.require(worst <= 2, "Retinex drift " + std::to_string(worst));

    RgbImage src = base, target(n, n, 3);
    for (std::size_t i = 0; i < target.size(); i += 3) {
        target[i] = static_cast<std::uint8_t>(140 + rng() % 80);
        target[i + 1] = static_cast<std::uint8_t>(90 + rng() % 50);
        target[i + 2] = static_cast<std::uint8_t>(30 + rng() % 40);
    }
    const Grid<float> out = rgb_to_lab(color_transfer(src, target));
    const Grid<float> want = rgb_to_lab(target);
    double worst_rel = 0.0;
    for (int c = 0; c < 3; ++c) {
        auto moments = [&](const Grid<float>& g) {
            double s = 0, ss = 0;
            for (std::size_t i = c; i < g.size(); i += 3) s += g[i];
            const double mu = s / static_cast<double>(g.pixels());
            for (std::size_t i = c; i < g.size(); i += 3) ss += (g[i] - mu) * (g[i] - mu);
            return std::pair{mu, std::sqrt(ss / static_cast<double>(g.pixels()))};
        };
        const auto [mo, so] = moments(out);
        const auto [mr, sr] = moments(want);
        const double mean_rel = std::abs(mo - mr) / std::max(std::abs(mr), sr);
        const double std_rel = std::abs(so - sr) / sr;
        worst_rel = std::max({worst_rel, mean_rel, std_rel});
    }
    o.require(worst_rel <= 0.01, "colour transfer statistics off by " + std::to_string(worst_rel * 100) + "%");
    o.detail << "Retinex max drift " << worst << " levels over gains 0.5-2.0; colour transfer worst relative error "
             << worst_rel * 100.0 << "%";
    return o;
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](const char* name, const Outcome& o) {
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail.str() << '\n' << std::flush;
        failures += !o.pass;
    };
    auto guarded = [&](const char* name, const std::function<Outcome()>& f) {
        try {
            report(name, f());
        } catch (const std::exception& e) {
            Outcome o;
            o.pass = false;
            o.detail << "exception: " << e.what();
            report(name, o);
        }
    };

    guarded("geometry_identity", geometry_identity);
    guarded("reprojection_fixture", reprojection_fixture);
    std::vector<double> tau_ratios;
    guarded("oracle_equivalence", [&] {
        OracleRun r = oracle_equivalence();
        tau_ratios = r.tau_ratio;
        return std::move(r.outcome);
    });
    guarded("adaptive_tau", [&] {
        // Every preset direction in addition to the random scenes.
        for (const char* kind : {"plane_box", "recolor", "insert", "no_change", "occlusion"}) {
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                const auto p = synth::generate_scene(synth::preset_scene(kind, seed));
                for (int v = 1; v <= 2; ++v) {
                    const ViewInputs& s = v == 1 ? p.bundle.view_1 : p.bundle.view_2;
                    const ViewInputs& t = v == 1 ? p.bundle.view_2 : p.bundle.view_1;
                    const OcclusionMask occ = occlusion_mask(correspondence_field(s.depth, s.camera, t.camera), t.depth);
                    tau_ratios.push_back(occ.threshold.tau / (kDefaultAlpha * positive_depth_median(t.depth)));
                }
            }
        }
        return adaptive_tau_check(tau_ratios);
    });
    EndToEnd e2e;
    bool e2e_ran = false;
    guarded("end_to_end_detection", [&] {
        e2e = end_to_end();
        e2e_ran = true;
        return std::move(e2e.detection);
    });
    guarded("refined_proposal_excludes_occlusion", [&] {
        if (!e2e_ran) throw std::runtime_error("end-to-end runs did not complete");
        return std::move(e2e.invariant);
    });
    guarded("ablation_occlusion_reduces_fp", ablation);
    guarded("metrics_oracle", metrics_oracle);
    guarded("interchange_format", interchange);
    guarded("illumination_invariance", illumination);

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << '\n';
    return failures == 0 ? 0 : 1;
}
