#include "posekit/tracker.hpp"

#include <stdexcept>

namespace posekit::track {

namespace topo = posekit::topology;

OracleDetector::OracleDetector(std::vector<std::optional<Pose>> gt, double noise_frac,
                               uint64_t seed)
    : gt_(std::move(gt)), noise_frac_(noise_frac), rng_(seed) {}

std::optional<Detection> OracleDetector::detect(const Image&, int frame_index) {
    if (frame_index < 0 || static_cast<size_t>(frame_index) >= gt_.size()) return std::nullopt;
    const auto& pose = gt_[static_cast<size_t>(frame_index)];
    if (!pose) return std::nullopt;
    Detection det = detection_from_pose(*pose);
    if (noise_frac_ > 0.0) {
        std::normal_distribution<double> gauss(0.0, noise_frac_ * det.circle_radius);
        det.mid_hip.x += gauss(rng_);
        det.mid_hip.y += gauss(rng_);
        std::normal_distribution<double> angle(0.0, noise_frac_);
        det.incline = normalize_angle(det.incline + angle(rng_));
    }
    return det;
}

void TrackerConfig::validate() const {
    if (!(presence_threshold > 0.0 && presence_threshold < 1.0))
        throw std::invalid_argument("tracker: presence_threshold must lie in (0,1)");
    if (roi_padding < 1.0) throw std::invalid_argument("tracker: roi_padding must be >= 1");
    if (crop_size < 1) throw std::invalid_argument("tracker: crop_size must be positive");
}

double presence_score(const std::array<double, topo::kNumKeypoints>& visibility) {
    return (visibility[topo::kLeftShoulder] + visibility[topo::kRightShoulder] +
            visibility[topo::kLeftHip] + visibility[topo::kRightHip]) /
           4.0;
}

FrameResult Tracker::process_frame(const Image& img, DetectorPort& detector,
                                   EstimatorPort& estimator, int frame_index) {
    FrameResult r;
    r.frame = frame_index;
    Roi roi;
    if (!tracking_) {
        r.detector_ran = true;
        const auto det = detector.detect(img, frame_index);
        if (!det) {
            r.no_person = true;
            return r;  // stay awaiting
        }
        roi = detection_to_roi(*det, cfg_.roi_padding);
    } else {
        roi = roi_;
    }

    r.roi_used = roi;
    r.pose = estimator.estimate(img, roi);
    r.presence = presence_score(r.pose.visibility);
    bool next_roi_ok = false;
    Roi next_roi;
    if (r.presence >= cfg_.presence_threshold) {
        try {
            next_roi = pose_to_roi(r.pose, cfg_.roi_padding);
            next_roi_ok = true;
        } catch (const std::exception&) {
            // degenerate prediction (e.g. collapsed pose): treat as a loss
        }
    }
    if (next_roi_ok) {
        tracking_ = true;
        roi_ = next_roi;
    } else {
        // emit the losing frame's pose anyway; detector runs next frame
        r.lost = true;
        tracking_ = false;
    }
    return r;
}

ClipResult run_clip(const std::vector<Image>& frames, const TrackerConfig& cfg,
                    DetectorPort& detector, EstimatorPort& estimator) {
    if (frames.empty()) throw std::invalid_argument("run_clip: empty clip");
    Tracker tracker(cfg);
    ClipResult out;
    for (size_t i = 0; i < frames.size(); ++i) {
        FrameResult r = tracker.process_frame(frames[i], detector, estimator,
                                              static_cast<int>(i));
        if (r.detector_ran) out.detector_invocations.push_back(static_cast<int>(i));
        out.frames.push_back(std::move(r));
    }
    return out;
}

}  // namespace posekit::track
