#pragma once

#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/image.hpp"
#include "posekit/posenet.hpp"

namespace posekit::track {

/// Person detector interface. `frame_index` lets clip-level oracle detectors
/// look up ground truth; real detectors ignore it.
struct DetectorPort {
    virtual ~DetectorPort() = default;
    virtual std::optional<Detection> detect(const Image& img, int frame_index) = 0;
};

/// Emits the Detection a perfect detector would produce from per-frame ground
/// truth, with optional Gaussian perturbation (fractions of the circle
/// radius). Frames with no stored pose yield no detection.
class OracleDetector : public DetectorPort {
public:
    explicit OracleDetector(std::vector<std::optional<Pose>> gt, double noise_frac = 0.0,
                            uint64_t seed = 0);
    std::optional<Detection> detect(const Image& img, int frame_index) override;

private:
    std::vector<std::optional<Pose>> gt_;
    double noise_frac_;
    std::mt19937_64 rng_;
};

struct NullDetector : DetectorPort {
    std::optional<Detection> detect(const Image&, int) override { return std::nullopt; }
};

/// Pose estimator interface; the indirection lets tests script the estimator
/// (e.g. fixed poses with a chosen visibility sequence) without a model.
struct EstimatorPort {
    virtual ~EstimatorPort() = default;
    virtual Pose estimate(const Image& img, const Roi& roi) = 0;
};

class ModelEstimator : public EstimatorPort {
public:
    explicit ModelEstimator(const PoseModel& model) : model_(&model) {}
    Pose estimate(const Image& img, const Roi& roi) override {
        return predict_pose(*model_, img, roi);
    }

private:
    const PoseModel* model_;
};

struct TrackerConfig {
    double presence_threshold = 0.5;
    double roi_padding = kDefaultRoiPadding;
    int crop_size = 64;  // must match the model's input size when using one

    void validate() const;
};

/// Mean visibility of the four torso keypoints (shoulders and hips).
double presence_score(const std::array<double, topology::kNumKeypoints>& visibility);

struct FrameResult {
    int frame = 0;
    Pose pose;               // image coordinates; meaningless when no_person
    double presence = 0.0;
    Roi roi_used;
    bool detector_ran = false;
    bool no_person = false;  // detector ran and found nothing
    bool lost = false;       // presence fell below threshold this frame
};

/// The detector-tracker state machine. AwaitingDetection runs the detector;
/// once a person is found the pose network's own ROI proposal carries frame
/// to frame until presence drops below the threshold.
class Tracker {
public:
    explicit Tracker(TrackerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

    FrameResult process_frame(const Image& img, DetectorPort& detector, EstimatorPort& estimator,
                              int frame_index);
    bool tracking() const { return tracking_; }
    const TrackerConfig& config() const { return cfg_; }
    void reset() { tracking_ = false; }

private:
    TrackerConfig cfg_;
    bool tracking_ = false;
    Roi roi_;
};

struct ClipResult {
    std::vector<FrameResult> frames;
    std::vector<int> detector_invocations;  // frame indices where the detector ran
};

/// Sequential application of process_frame over a clip; deterministic.
ClipResult run_clip(const std::vector<Image>& frames, const TrackerConfig& cfg,
                    DetectorPort& detector, EstimatorPort& estimator);

}  // namespace posekit::track
