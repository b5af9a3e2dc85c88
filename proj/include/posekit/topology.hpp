#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace posekit::topology {

inline constexpr int kNumKeypoints = 33;

// Canonical indices referenced throughout the codebase.
inline constexpr int kNose = 0;
inline constexpr int kLeftShoulder = 11;
inline constexpr int kRightShoulder = 12;
inline constexpr int kLeftWrist = 15;
inline constexpr int kRightWrist = 16;
inline constexpr int kLeftHip = 23;
inline constexpr int kRightHip = 24;

/// Name of keypoint `id`; throws std::out_of_range for id outside [0, 32].
const std::string& keypoint_name(int id);

/// Reverse lookup; throws std::invalid_argument for unknown names.
int keypoint_index(std::string_view name);

/// Left/right partner of `id`, or -1 for unpaired (nose).
int mirror_keypoint(int id);

struct TopologySubset {
    std::string name;
    std::vector<int> members;
};

/// The 17 keypoints shared with the Coco topology, in canonical Coco order
/// (nose, eyes, ears, shoulders, elbows, wrists, hips, knees, ankles).
const TopologySubset& coco17_subset();

/// Full-body subset (all 33 points in index order).
const TopologySubset& full_subset();

/// Conventional skeleton edge list for rendering and debugging. Non-normative:
/// limbs, torso rectangle, and a face contour.
const std::vector<std::pair<int, int>>& skeleton_edges();

}  // namespace posekit::topology
