#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/image.hpp"

namespace posekit::synth {

/// Articulated puppet: root/lean/scale plus per-limb joint angles. All 33
/// keypoints follow by forward kinematics.
struct PuppetParams {
    Point2 root;         // mid-hip, image coordinates
    double scale = 40;   // pixels; limb lengths are fixed fractions of this
    double lean = 0;     // body-axis lean, positive clockwise in y-down view
    // per side: 0 = left, 1 = right
    std::array<double, 2> shoulder_angle{};  // upper-arm swing away from the body
    std::array<double, 2> elbow_bend{};
    std::array<double, 2> hip_angle{};
    std::array<double, 2> knee_bend{};
    uint64_t style_seed = 0;  // colors and background texture
    bool upper_body = false;
};

/// Forward kinematics only; no canvas checks.
Pose puppet_pose(const PuppetParams& params);

struct PuppetSample {
    PuppetParams params;
    Pose pose;
};

/// Random puppet that fits the canvas (hips/shoulders always well inside).
/// In upper-body mode the puppet is large and low so at least one leg
/// keypoint falls outside the canvas.
PuppetSample sample_puppet(std::mt19937_64& rng, int canvas_w, int canvas_h,
                           bool upper_body = false);

Image render_background(uint64_t style_seed, int w, int h);

/// Anti-aliased capsule figure over a textured background; joint centers
/// coincide with the rendered limb geometry.
Image render_puppet(const PuppetParams& params, int canvas_w, int canvas_h);

struct OcclusionConfig {
    int max_rects = 3;
    double min_frac = 0.10;  // rectangle side as a fraction of min(w, h)
    double max_frac = 0.50;
};

/// Draws 0..max_rects random filled rectangles onto the image. A keypoint's
/// label is 0 iff its coordinate lies inside any drawn rectangle, else 1.
/// Coordinates are untouched; occluded points must still be predicted.
std::array<float, topology::kNumKeypoints> occlude(Image& img, const Pose& pose,
                                                   std::mt19937_64& rng,
                                                   const OcclusionConfig& cfg = {});

/// Network input sample: crop tensor plus the pose in crop-normalized [0,1]^2
/// coordinates (off-crop points keep their out-of-range values).
struct TrainingSample {
    Tensor<float> image;  // [3, S, S]
    Pose pose;            // crop-normalized; carries visibility labels
};

TrainingSample crop_sample(const Image& img, const Pose& pose, const Roi& roi, int crop_size);

struct ManifestRecord {
    std::string image;  // path relative to the manifest
    std::array<Point2, topology::kNumKeypoints> keypoints;  // absolute pixels
    std::array<int, topology::kNumKeypoints> visibility;    // 0 or 1
};

struct GenerateConfig {
    int canvas = 128;
    double upper_body_frac = 0.20;
    OcclusionConfig occlusion;
};

/// Writes n PPM images plus manifest.jsonl under out_dir. Sample i derives an
/// independent rng stream from (seed, i), so output is a pure function of the
/// seed regardless of generation order.
std::vector<ManifestRecord> generate_dataset(int n, uint64_t seed, const std::string& out_dir,
                                             const GenerateConfig& cfg = {});

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);
std::vector<ManifestRecord> read_manifest(const std::string& path);

struct LoadedSample {
    Image image;
    Pose pose;  // absolute pixel coords, visibility from the manifest
};

/// Loads every record's image into memory.
std::vector<LoadedSample> load_dataset(const std::string& manifest_path);

Pose record_pose(const ManifestRecord& rec);

/// Independent per-sample rng stream.
uint64_t sample_seed(uint64_t seed, uint64_t index);

}  // namespace posekit::synth
