#include "posekit/topology.hpp"

#include <stdexcept>
#include <unordered_map>

namespace posekit::topology {

namespace {

const std::array<std::string, kNumKeypoints>& names() {
    static const std::array<std::string, kNumKeypoints> kNames = {
        "Nose",
        "Left eye inner",
        "Left eye",
        "Left eye outer",
        "Right eye inner",
        "Right eye",
        "Right eye outer",
        "Left ear",
        "Right ear",
        "Mouth left",
        "Mouth right",
        "Left shoulder",
        "Right shoulder",
        "Left elbow",
        "Right elbow",
        "Left wrist",
        "Right wrist",
        "Left pinky #1 knuckle",
        "Right pinky #1 knuckle",
        "Left index #1 knuckle",
        "Right index #1 knuckle",
        "Left thumb #2 knuckle",
        "Right thumb #2 knuckle",
        "Left hip",
        "Right hip",
        "Left knee",
        "Right knee",
        "Left ankle",
        "Right ankle",
        "Left heel",
        "Right heel",
        "Left foot index",
        "Right foot index",
    };
    return kNames;
}

}  // namespace

const std::string& keypoint_name(int id) {
    if (id < 0 || id >= kNumKeypoints)
        throw std::out_of_range("keypoint_name: index " + std::to_string(id) +
                                " outside [0, 32]");
    return names()[static_cast<size_t>(id)];
}

int keypoint_index(std::string_view name) {
    static const std::unordered_map<std::string_view, int> lookup = [] {
        std::unordered_map<std::string_view, int> m;
        for (int i = 0; i < kNumKeypoints; ++i) m.emplace(names()[static_cast<size_t>(i)], i);
        return m;
    }();
    auto it = lookup.find(name);
    if (it == lookup.end())
        throw std::invalid_argument("keypoint_index: unknown keypoint name '" +
                                    std::string(name) + "'");
    return it->second;
}

int mirror_keypoint(int id) {
    keypoint_name(id);  // validate
    if (id == kNose) return -1;
    // pairs are (odd, even) consecutive indices from 1 onward
    return (id % 2 == 1) ? id + 1 : id - 1;
}

const TopologySubset& coco17_subset() {
    // Coco order: nose, L/R eye, L/R ear, L/R shoulder, L/R elbow, L/R wrist,
    // L/R hip, L/R knee, L/R ankle. Eyes map to the plain "Left eye"/"Right
    // eye" points, not the inner/outer variants.
    static const TopologySubset kCoco{
        "coco17", {0, 2, 5, 7, 8, 11, 12, 13, 14, 15, 16, 23, 24, 25, 26, 27, 28}};
    return kCoco;
}

const TopologySubset& full_subset() {
    static const TopologySubset kFull = [] {
        TopologySubset s{"full33", {}};
        for (int i = 0; i < kNumKeypoints; ++i) s.members.push_back(i);
        return s;
    }();
    return kFull;
}

const std::vector<std::pair<int, int>>& skeleton_edges() {
    static const std::vector<std::pair<int, int>> kEdges = {
        // face contour
        {0, 1},   {1, 2},   {2, 3},   {3, 7},   {0, 4},   {4, 5},   {5, 6},   {6, 8},
        {9, 10},
        // torso rectangle
        {11, 12}, {11, 23}, {12, 24}, {23, 24},
        // left arm + hand
        {11, 13}, {13, 15}, {15, 17}, {15, 19}, {15, 21}, {17, 19},
        // right arm + hand
        {12, 14}, {14, 16}, {16, 18}, {16, 20}, {16, 22}, {18, 20},
        // left leg + foot
        {23, 25}, {25, 27}, {27, 29}, {27, 31}, {29, 31},
        // right leg + foot
        {24, 26}, {26, 28}, {28, 30}, {28, 32}, {30, 32},
    };
    return kEdges;
}

}  // namespace posekit::topology
