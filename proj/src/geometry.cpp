#include "posekit/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace posekit {

double normalize_angle(double a) {
    a = std::fmod(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    if (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

SimilarityTransform invert(const SimilarityTransform& t) {
    if (!(t.scale > 0.0)) throw std::domain_error("transform: non-positive scale");
    SimilarityTransform inv;
    inv.rotation = -t.rotation;
    inv.scale = 1.0 / t.scale;
    inv.translation = rotate(t.translation, -t.rotation) * (-inv.scale);
    return inv;
}

SimilarityTransform compose(const SimilarityTransform& outer, const SimilarityTransform& inner) {
    SimilarityTransform c;
    c.rotation = outer.rotation + inner.rotation;
    c.scale = outer.scale * inner.scale;
    c.translation = rotate(inner.translation, outer.rotation) * outer.scale + outer.translation;
    return c;
}

double estimate_rotation(const Pose& pose) {
    const Point2 v = pose.mid_shoulder() - pose.mid_hip();
    if (norm(v) < 1e-12)
        throw std::domain_error("estimate_rotation: degenerate pose, mid-hip equals mid-shoulder");
    // Want R(theta) * v parallel to (0,-1): theta = -pi/2 - angle(v).
    return normalize_angle(-M_PI / 2.0 - std::atan2(v.y, v.x));
}

Roi pose_to_roi(const Pose& pose, double padding) {
    if (padding < 1.0) throw std::invalid_argument("pose_to_roi: padding must be >= 1");
    const double theta = estimate_rotation(pose);
    const Point2 center = pose.mid_hip();
    double extent = 0.0;
    for (const Point2& p : pose.points) {
        const Point2 r = rotate(p - center, theta);
        extent = std::max({extent, std::abs(r.x), std::abs(r.y)});
    }
    return Roi{center, padding * 2.0 * extent, theta};
}

Roi detection_to_roi(const Detection& det, double padding) {
    if (!(det.circle_radius > 0.0))
        throw std::invalid_argument("detection_to_roi: circle radius must be positive");
    return Roi{det.mid_hip, 2.0 * det.circle_radius * padding, normalize_angle(-det.incline)};
}

SimilarityTransform roi_to_transform(const Roi& roi, double crop_size) {
    if (!(roi.side > 0.0)) throw std::invalid_argument("roi_to_transform: non-positive side");
    if (!(crop_size > 0.0)) throw std::invalid_argument("roi_to_transform: non-positive crop size");
    SimilarityTransform t;
    t.rotation = -roi.rotation;
    t.scale = roi.side / crop_size;
    const Point2 crop_center{crop_size / 2.0, crop_size / 2.0};
    t.translation = roi.center - rotate(crop_center, t.rotation) * t.scale;
    return t;
}

Pose transform_pose(const Pose& pose, const SimilarityTransform& t) {
    Pose out = pose;
    for (int i = 0; i < topology::kNumKeypoints; ++i)
        out.points[static_cast<size_t>(i)] = t.apply(pose.points[static_cast<size_t>(i)]);
    return out;
}

Roi jitter_roi(const Roi& roi, std::mt19937_64& rng, double scale_frac, double shift_frac) {
    if (scale_frac < 0.0 || scale_frac >= 1.0 || shift_frac < 0.0 || shift_frac >= 1.0)
        throw std::invalid_argument("jitter_roi: fractions must be in [0, 1)");
    std::uniform_real_distribution<double> uscale(1.0 - scale_frac, 1.0 + scale_frac);
    std::uniform_real_distribution<double> ushift(-shift_frac, shift_frac);
    Roi out = roi;
    out.side = roi.side * uscale(rng);
    out.center.x = roi.center.x + ushift(rng) * roi.side;
    out.center.y = roi.center.y + ushift(rng) * roi.side;
    return out;
}

Detection detection_from_pose(const Pose& pose) {
    Detection det;
    det.mid_hip = pose.mid_hip();
    double r = 0.0;
    for (const Point2& p : pose.points) r = std::max(r, norm(p - det.mid_hip));
    det.circle_radius = std::max(r, 1e-9);
    const Point2 v = pose.mid_shoulder() - det.mid_hip;
    // lean of the body axis off vertical, positive clockwise in y-down view
    det.incline = std::atan2(v.x, -v.y);
    return det;
}

}  // namespace posekit
