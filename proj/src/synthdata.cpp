#include "posekit/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace posekit::synth {

namespace fs = std::filesystem;
namespace topo = posekit::topology;
using json = nlohmann::json;

namespace {

constexpr double deg = M_PI / 180.0;

struct BodyFrame {
    Point2 root;
    Point2 right_axis;  // body-frame +x in image coords
    Point2 up_axis;     // body-frame +y (toward the head)

    explicit BodyFrame(const PuppetParams& p) : root(p.root) {
        up_axis = {std::sin(p.lean), -std::cos(p.lean)};
        right_axis = rotate(up_axis, M_PI / 2.0);
    }
    Point2 to_image(double bx, double by) const {
        return root + right_axis * bx + up_axis * by;
    }
};

// direction in body frame: angle measured from straight down, swinging away
// from the body on side `sgn` (+1 left, -1 right)
Point2 limb_dir(double angle, double sgn) {
    return {sgn * std::sin(angle), -std::cos(angle)};
}

Point2 perp(Point2 d) { return {-d.y, d.x}; }

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

struct Capsule {
    Point2 a, b;
    double radius;
    float color[3];
};

double dist_to_segment(Point2 p, Point2 a, Point2 b) {
    const Point2 ab = b - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    double t = len2 > 0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Point2 q = a + ab * t;
    return norm(p - q);
}

void draw_capsule(Image& img, const Capsule& c) {
    const double pad = c.radius + 1.5;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(c.a.x, c.b.x) - pad)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(c.a.x, c.b.x) + pad)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(c.a.y, c.b.y) - pad)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(c.a.y, c.b.y) + pad)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = dist_to_segment({x + 0.5, y + 0.5}, c.a, c.b);
            const double alpha = std::clamp(0.5 + (c.radius - d), 0.0, 1.0);
            if (alpha <= 0.0) continue;
            float* p = img.at(x, y);
            for (int ch = 0; ch < 3; ++ch)
                p[ch] = static_cast<float>(p[ch] * (1.0 - alpha) + c.color[ch] * alpha);
        }
}

// Body-frame keypoint layout, in units of PuppetParams::scale.
// left side has positive body-frame x; face detail sits on the head disc.
void fk_body_frame(const PuppetParams& p, std::array<Point2, topo::kNumKeypoints>& out) {
    auto set = [&](int id, double bx, double by) { out[static_cast<size_t>(id)] = {bx, by}; };

    set(topo::kLeftHip, 0.11, 0.0);
    set(topo::kRightHip, -0.11, 0.0);
    set(topo::kLeftShoulder, 0.15, 0.40);
    set(topo::kRightShoulder, -0.15, 0.40);

    // head cluster
    set(topo::kNose, 0.0, 0.60);
    set(1, 0.02, 0.645);   // left eye inner
    set(2, 0.035, 0.645);  // left eye
    set(3, 0.05, 0.645);   // left eye outer
    set(4, -0.02, 0.645);
    set(5, -0.035, 0.645);
    set(6, -0.05, 0.645);
    set(7, 0.07, 0.61);    // ears
    set(8, -0.07, 0.61);
    set(9, 0.02, 0.56);    // mouth
    set(10, -0.02, 0.56);

    for (int side = 0; side < 2; ++side) {
        const double sgn = side == 0 ? 1.0 : -1.0;
        const int off = side;  // left ids are even offsets in each pair

        // arm chain
        const Point2 shoulder = out[static_cast<size_t>(topo::kLeftShoulder + off)];
        const Point2 ud = limb_dir(p.shoulder_angle[static_cast<size_t>(side)], sgn);
        const Point2 elbow = shoulder + ud * 0.28;
        const Point2 fd =
            limb_dir(p.shoulder_angle[static_cast<size_t>(side)] + p.elbow_bend[static_cast<size_t>(side)], sgn);
        const Point2 wrist = elbow + fd * 0.26;
        out[static_cast<size_t>(13 + off)] = elbow;
        out[static_cast<size_t>(15 + off)] = wrist;
        const Point2 hp = perp(fd);
        out[static_cast<size_t>(17 + off)] = wrist + fd * 0.07 + hp * 0.015;   // pinky
        out[static_cast<size_t>(19 + off)] = wrist + fd * 0.08 - hp * 0.015;   // index
        out[static_cast<size_t>(21 + off)] = wrist + fd * 0.04 - hp * 0.03;    // thumb

        // leg chain
        const Point2 hip = out[static_cast<size_t>(topo::kLeftHip + off)];
        const Point2 td = limb_dir(p.hip_angle[static_cast<size_t>(side)], sgn);
        const Point2 knee = hip + td * 0.42;
        const Point2 sd =
            limb_dir(p.hip_angle[static_cast<size_t>(side)] + p.knee_bend[static_cast<size_t>(side)], sgn);
        const Point2 ankle = knee + sd * 0.40;
        out[static_cast<size_t>(25 + off)] = knee;
        out[static_cast<size_t>(27 + off)] = ankle;
        out[static_cast<size_t>(29 + off)] = {ankle.x - 0.05 * sgn, ankle.y - 0.02};  // heel
        out[static_cast<size_t>(31 + off)] = {ankle.x + 0.13 * sgn, ankle.y - 0.02};  // foot index
    }
}

bool inside(Point2 p, double w, double h, double margin) {
    return p.x >= margin && p.x <= w - margin && p.y >= margin && p.y <= h - margin;
}

}  // namespace

uint64_t sample_seed(uint64_t seed, uint64_t index) {
    return splitmix64(seed * 0x2545f4914f6cdd1dull + index + 1);
}

Pose puppet_pose(const PuppetParams& params) {
    std::array<Point2, topo::kNumKeypoints> bf;
    fk_body_frame(params, bf);
    const BodyFrame frame(params);
    Pose pose;
    for (int i = 0; i < topo::kNumKeypoints; ++i)
        pose.points[static_cast<size_t>(i)] =
            frame.to_image(bf[static_cast<size_t>(i)].x * params.scale,
                           bf[static_cast<size_t>(i)].y * params.scale);
    pose.visibility.fill(1.0);
    return pose;
}

PuppetSample sample_puppet(std::mt19937_64& rng, int canvas_w, int canvas_h, bool upper_body) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto urange = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
    const double cmin = std::min(canvas_w, canvas_h);

    for (int attempt = 0; attempt < 200; ++attempt) {
        PuppetParams p;
        p.upper_body = upper_body;
        p.style_seed = rng();
        p.lean = urange(-30 * deg, 30 * deg);
        for (int s = 0; s < 2; ++s) {
            p.shoulder_angle[static_cast<size_t>(s)] = urange(5 * deg, 80 * deg);
            p.elbow_bend[static_cast<size_t>(s)] = urange(-10 * deg, 70 * deg);
            p.hip_angle[static_cast<size_t>(s)] = urange(-5 * deg, 25 * deg);
            p.knee_bend[static_cast<size_t>(s)] = urange(-10 * deg, 40 * deg);
        }
        if (upper_body) {
            p.scale = cmin * urange(0.60, 0.90);
            p.root = {canvas_w * urange(0.35, 0.65), canvas_h * urange(0.85, 1.05)};
        } else {
            p.scale = cmin * urange(0.28, 0.40);
            p.root = {canvas_w * urange(0.38, 0.62), canvas_h * urange(0.42, 0.58)};
        }

        const Pose pose = puppet_pose(p);
        const double margin = 2.0;
        if (upper_body) {
            // torso and head must fit; at least one leg point must not
            bool torso_ok = true;
            for (int id : {topo::kLeftShoulder, topo::kRightShoulder, topo::kLeftHip,
                           topo::kRightHip, topo::kNose})
                torso_ok = torso_ok &&
                           inside(pose.points[static_cast<size_t>(id)], canvas_w, canvas_h, margin);
            bool leg_out = false;
            for (int id = 25; id < topo::kNumKeypoints; ++id)
                leg_out = leg_out ||
                          !inside(pose.points[static_cast<size_t>(id)], canvas_w, canvas_h, 0.0);
            if (torso_ok && leg_out) return {p, pose};
        } else {
            bool all_in = true;
            for (const Point2& q : pose.points)
                all_in = all_in && inside(q, canvas_w, canvas_h, margin);
            if (all_in) return {p, pose};
        }
    }
    throw std::runtime_error("sample_puppet: could not fit a puppet on the canvas");
}

Image render_background(uint64_t style_seed, int w, int h) {
    std::mt19937_64 rng(splitmix64(style_seed));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    // three low-frequency plane waves per channel
    double fx[3][3], fy[3][3], ph[3][3], amp[3][3];
    for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k) {
            fx[c][k] = (u01(rng) * 4.0 + 1.0) * 2.0 * M_PI / w;
            fy[c][k] = (u01(rng) * 4.0 + 1.0) * 2.0 * M_PI / h;
            ph[c][k] = u01(rng) * 2.0 * M_PI;
            amp[c][k] = 0.04 + 0.05 * u01(rng);
        }
    const double base = 0.30 + 0.15 * u01(rng);
    Image img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float* p = img.at(x, y);
            for (int c = 0; c < 3; ++c) {
                double v = base;
                for (int k = 0; k < 3; ++k)
                    v += amp[c][k] * std::sin(fx[c][k] * x + fy[c][k] * y + ph[c][k]);
                p[c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    return img;
}

Image render_puppet(const PuppetParams& params, int canvas_w, int canvas_h) {
    Image img = render_background(params.style_seed, canvas_w, canvas_h);
    const Pose pose = puppet_pose(params);
    const double s = params.scale;
    std::mt19937_64 crng(splitmix64(params.style_seed ^ 0xc01055a1u));
    std::uniform_real_distribution<double> jitter(-0.08, 0.08);
    auto shade = [&](double r, double g, double b, float out[3]) {
        const double j = jitter(crng);
        out[0] = static_cast<float>(std::clamp(r + j, 0.0, 1.0));
        out[1] = static_cast<float>(std::clamp(g + j, 0.0, 1.0));
        out[2] = static_cast<float>(std::clamp(b + j, 0.0, 1.0));
    };

    const auto& pt = pose.points;
    auto P = [&](int id) { return pt[static_cast<size_t>(id)]; };
    const Point2 mid_hip = pose.mid_hip();
    const Point2 mid_shoulder = pose.mid_shoulder();
    const BodyFrame frame(params);
    const Point2 head_center = frame.to_image(0.0, 0.58 * s);

    std::vector<Capsule> caps;
    auto add = [&](Point2 a, Point2 b, double radius, double r, double g, double bch) {
        Capsule c{a, b, radius, {}};
        shade(r, g, bch, c.color);
        caps.push_back(c);
    };

    for (int side = 0; side < 2; ++side) {
        const int off = side;
        // legs first so the torso overlaps the hip joints
        add(P(topo::kLeftHip + off), P(25 + off), 0.06 * s, 0.20, 0.55, 0.25);
        add(P(25 + off), P(27 + off), 0.05 * s, 0.35, 0.70, 0.55);
        add(P(29 + off), P(31 + off), 0.04 * s, 0.40, 0.30, 0.18);
    }
    for (int side = 0; side < 2; ++side) {
        const int off = side;
        add(P(topo::kLeftShoulder + off), P(13 + off), 0.045 * s, 0.75, 0.20, 0.20);
        add(P(13 + off), P(15 + off), 0.04 * s, 0.85, 0.45, 0.15);
        add(P(15 + off), P(19 + off), 0.045 * s, 0.90, 0.70, 0.50);  // hand
    }
    add(mid_hip, mid_shoulder, 0.17 * s, 0.20, 0.33, 0.72);           // torso
    add(head_center, head_center, 0.115 * s, 0.92, 0.76, 0.62);       // head disc

    for (const Capsule& c : caps) draw_capsule(img, c);
    return img;
}

std::array<float, topo::kNumKeypoints> occlude(Image& img, const Pose& pose,
                                               std::mt19937_64& rng,
                                               const OcclusionConfig& cfg) {
    std::array<float, topo::kNumKeypoints> labels;
    labels.fill(1.0f);
    std::uniform_int_distribution<int> ucount(0, cfg.max_rects);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double cmin = std::min(img.width, img.height);
    const int count = ucount(rng);
    for (int r = 0; r < count; ++r) {
        const double rw = cmin * (cfg.min_frac + (cfg.max_frac - cfg.min_frac) * u01(rng));
        const double rh = cmin * (cfg.min_frac + (cfg.max_frac - cfg.min_frac) * u01(rng));
        const double x0 = (img.width - rw) * u01(rng);
        const double y0 = (img.height - rh) * u01(rng);
        float color[3] = {static_cast<float>(u01(rng)), static_cast<float>(u01(rng)),
                          static_cast<float>(u01(rng))};
        const int px0 = std::max(0, static_cast<int>(std::floor(x0)));
        const int py0 = std::max(0, static_cast<int>(std::floor(y0)));
        const int px1 = std::min(img.width - 1, static_cast<int>(std::ceil(x0 + rw)));
        const int py1 = std::min(img.height - 1, static_cast<int>(std::ceil(y0 + rh)));
        for (int y = py0; y <= py1; ++y)
            for (int x = px0; x <= px1; ++x) {
                float* p = img.at(x, y);
                p[0] = color[0];
                p[1] = color[1];
                p[2] = color[2];
            }
        for (int k = 0; k < topo::kNumKeypoints; ++k) {
            const Point2 q = pose.points[static_cast<size_t>(k)];
            if (q.x >= x0 && q.x <= x0 + rw && q.y >= y0 && q.y <= y0 + rh)
                labels[static_cast<size_t>(k)] = 0.0f;
        }
    }
    return labels;
}

TrainingSample crop_sample(const Image& img, const Pose& pose, const Roi& roi, int crop_size) {
    if (!(roi.side > 0.0)) throw std::invalid_argument("crop_sample: degenerate roi");
    TrainingSample s;
    s.image = image_to_tensor(crop_image(img, roi, crop_size));
    const SimilarityTransform to_crop = invert(roi_to_transform(roi, crop_size));
    s.pose = transform_pose(pose, to_crop);
    for (Point2& p : s.pose.points) p = p * (1.0 / crop_size);
    return s;
}

std::vector<ManifestRecord> generate_dataset(int n, uint64_t seed, const std::string& out_dir,
                                             const GenerateConfig& cfg) {
    if (n <= 0) throw std::invalid_argument("generate_dataset: n must be positive");
    fs::create_directories(out_dir);
    std::vector<ManifestRecord> records;
    records.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::mt19937_64 rng(sample_seed(seed, static_cast<uint64_t>(i)));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const bool upper = u01(rng) < cfg.upper_body_frac;
        const PuppetSample ps = sample_puppet(rng, cfg.canvas, cfg.canvas, upper);
        Image img = render_puppet(ps.params, cfg.canvas, cfg.canvas);
        const auto occ_labels = occlude(img, ps.pose, rng, cfg.occlusion);

        char name[32];
        std::snprintf(name, sizeof name, "img_%06d.ppm", i);
        write_ppm((fs::path(out_dir) / name).string(), img);

        ManifestRecord rec;
        rec.image = name;
        for (int k = 0; k < topo::kNumKeypoints; ++k) {
            const Point2 q = ps.pose.points[static_cast<size_t>(k)];
            rec.keypoints[static_cast<size_t>(k)] = q;
            // a point is visible when unoccluded and on the canvas
            const bool on_canvas =
                q.x >= 0 && q.x <= cfg.canvas && q.y >= 0 && q.y <= cfg.canvas;
            rec.visibility[static_cast<size_t>(k)] =
                (occ_labels[static_cast<size_t>(k)] > 0.5f && on_canvas) ? 1 : 0;
        }
        records.push_back(std::move(rec));
    }
    write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), records);
    return records;
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_manifest: cannot open " + path);
    for (const auto& rec : records) {
        json j;
        j["image"] = rec.image;
        json kps = json::array();
        for (const Point2& p : rec.keypoints) kps.push_back({p.x, p.y});
        j["keypoints"] = std::move(kps);
        j["visibility"] = rec.visibility;
        os << j.dump() << "\n";
    }
    if (!os) throw std::runtime_error("write_manifest: write failed for " + path);
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("read_manifest: cannot open " + path);
    std::vector<ManifestRecord> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line);
        ManifestRecord rec;
        rec.image = j.at("image").get<std::string>();
        const auto& kps = j.at("keypoints");
        const auto& vis = j.at("visibility");
        if (kps.size() != topo::kNumKeypoints || vis.size() != topo::kNumKeypoints)
            throw std::runtime_error("read_manifest: line " + std::to_string(lineno) +
                                     ": expected 33 keypoints/visibility entries");
        for (int k = 0; k < topo::kNumKeypoints; ++k) {
            rec.keypoints[static_cast<size_t>(k)] = {kps[static_cast<size_t>(k)][0].get<double>(),
                                                     kps[static_cast<size_t>(k)][1].get<double>()};
            rec.visibility[static_cast<size_t>(k)] = vis[static_cast<size_t>(k)].get<int>();
        }
        records.push_back(std::move(rec));
    }
    return records;
}

Pose record_pose(const ManifestRecord& rec) {
    Pose pose;
    for (int k = 0; k < topo::kNumKeypoints; ++k) {
        pose.points[static_cast<size_t>(k)] = rec.keypoints[static_cast<size_t>(k)];
        pose.visibility[static_cast<size_t>(k)] = rec.visibility[static_cast<size_t>(k)];
    }
    return pose;
}

std::vector<LoadedSample> load_dataset(const std::string& manifest_path) {
    const fs::path dir = fs::path(manifest_path).parent_path();
    std::vector<LoadedSample> out;
    for (const auto& rec : read_manifest(manifest_path)) {
        LoadedSample s;
        s.image = read_ppm((dir / rec.image).string());
        s.pose = record_pose(rec);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace posekit::synth
