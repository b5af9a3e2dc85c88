#pragma once

#include <array>
#include <cmath>
#include <random>

#include "posekit/topology.hpp"

namespace posekit {

// Image convention throughout: x grows right, y grows down.
// Angles are radians internally; degrees exist only at the CLI boundary.

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    Point2 operator+(Point2 o) const { return {x + o.x, y + o.y}; }
    Point2 operator-(Point2 o) const { return {x - o.x, y - o.y}; }
    Point2 operator*(double s) const { return {x * s, y * s}; }
};

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline Point2 midpoint(Point2 a, Point2 b) { return {(a.x + b.x) / 2.0, (a.y + b.y) / 2.0}; }

/// Rotation by `angle` with the standard matrix [[c,-s],[s,c]].
inline Point2 rotate(Point2 p, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * p.x - s * p.y, s * p.x + c * p.y};
}

/// Normalize an angle to (-pi, pi].
double normalize_angle(double a);

struct Pose {
    std::array<Point2, topology::kNumKeypoints> points{};
    std::array<double, topology::kNumKeypoints> visibility{};

    Point2 mid_hip() const {
        return midpoint(points[topology::kLeftHip], points[topology::kRightHip]);
    }
    Point2 mid_shoulder() const {
        return midpoint(points[topology::kLeftShoulder], points[topology::kRightShoulder]);
    }
};

/// Rotated square crop window: `rotation` is the angle by which the crop is
/// rotated relative to the image axes.
struct Roi {
    Point2 center;
    double side = 0.0;
    double rotation = 0.0;
};

/// Person-detector output: alignment parameters only, no box.
struct Detection {
    Point2 mid_hip;
    double circle_radius = 0.0;  // circle circumscribing the whole person
    double incline = 0.0;        // body-axis lean, positive = clockwise in y-down view
};

/// p -> scale * R(rotation) * p + translation. Invertible (scale > 0).
struct SimilarityTransform {
    double rotation = 0.0;
    double scale = 1.0;
    Point2 translation;

    Point2 apply(Point2 p) const { return rotate(p, rotation) * scale + translation; }
};

SimilarityTransform invert(const SimilarityTransform& t);
SimilarityTransform compose(const SimilarityTransform& outer, const SimilarityTransform& inner);

/// Angle that, applied to the image about mid-hip, points the
/// mid-hip -> mid-shoulder vector in the -y direction (shoulders up).
/// Throws std::domain_error when mid-hip and mid-shoulder coincide.
double estimate_rotation(const Pose& pose);

inline constexpr double kDefaultRoiPadding = 1.25;

/// Square ROI centered on mid-hip, rotated so the torso axis verticalizes,
/// sized so every keypoint fits the crop (Chebyshev extent in the rotated
/// frame) times `padding`.
Roi pose_to_roi(const Pose& pose, double padding = kDefaultRoiPadding);

/// ROI from detector alignment parameters. Throws std::invalid_argument on
/// non-positive radius.
Roi detection_to_roi(const Detection& det, double padding = kDefaultRoiPadding);

/// Transform mapping crop pixel coordinates [0, crop_size]^2 into image
/// coordinates; the crop center maps onto roi.center.
SimilarityTransform roi_to_transform(const Roi& roi, double crop_size);

Pose transform_pose(const Pose& pose, const SimilarityTransform& t);

/// Random scale/shift augmentation; rotation unchanged. Fractions in [0, 1).
Roi jitter_roi(const Roi& roi, std::mt19937_64& rng, double scale_frac = 0.10,
               double shift_frac = 0.10);

/// Detection a perfect detector would emit for this pose (used by the oracle
/// detector and by consistency tests against estimate_rotation).
Detection detection_from_pose(const Pose& pose);

}  // namespace posekit
