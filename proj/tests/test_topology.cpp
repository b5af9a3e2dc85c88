#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "posekit/topology.hpp"

using namespace posekit::topology;

TEST_CASE("keypoint names match the published list") {
    CHECK(keypoint_name(0) == "Nose");
    CHECK(keypoint_name(11) == "Left shoulder");
    CHECK(keypoint_name(16) == "Right wrist");
    CHECK(keypoint_name(23) == "Left hip");
    CHECK(keypoint_name(24) == "Right hip");
    CHECK(keypoint_name(32) == "Right foot index");
}

TEST_CASE("keypoint_name is total and injective; reverse lookup inverts it") {
    std::set<std::string> seen;
    for (int i = 0; i < kNumKeypoints; ++i) {
        const std::string& n = keypoint_name(i);
        CHECK(!n.empty());
        CHECK(seen.insert(n).second);
        CHECK(keypoint_index(n) == i);
    }
    CHECK(seen.size() == 33);
}

TEST_CASE("out-of-range and unknown lookups throw") {
    CHECK_THROWS_AS((void)keypoint_name(-1), std::out_of_range);
    CHECK_THROWS_AS((void)keypoint_name(33), std::out_of_range);
    CHECK_THROWS_AS((void)keypoint_index("Neck"), std::invalid_argument);
}

TEST_CASE("coco17 subset") {
    const TopologySubset& s = coco17_subset();
    REQUIRE(s.members.size() == 17);
    CHECK(s.members[0] == 0);   // Nose
    CHECK(s.members[1] == 2);   // Left eye (plain variant)
    CHECK(s.members[2] == 5);   // Right eye
    CHECK(s.members[5] == 11);  // Left shoulder
    CHECK(s.members[16] == 28); // Right ankle

    std::set<int> uniq(s.members.begin(), s.members.end());
    CHECK(uniq.size() == 17);
    for (int id : s.members) {
        CHECK(id >= 0);
        CHECK(id < kNumKeypoints);
    }

    // Coco keypoint names, resolved against this topology's naming.
    const char* coco_names[17] = {
        "Nose", "Left eye", "Right eye", "Left ear", "Right ear",
        "Left shoulder", "Right shoulder", "Left elbow", "Right elbow",
        "Left wrist", "Right wrist", "Left hip", "Right hip",
        "Left knee", "Right knee", "Left ankle", "Right ankle"};
    for (int i = 0; i < 17; ++i)
        CHECK(keypoint_name(s.members[static_cast<size_t>(i)]) == coco_names[i]);
}

TEST_CASE("left/right mirror pairs") {
    CHECK(mirror_keypoint(kNose) == -1);
    CHECK(mirror_keypoint(kLeftShoulder) == kRightShoulder);
    CHECK(mirror_keypoint(kRightShoulder) == kLeftShoulder);
    CHECK(mirror_keypoint(kLeftHip) == kRightHip);
    for (int i = 1; i < kNumKeypoints; ++i) {
        const int m = mirror_keypoint(i);
        CHECK(mirror_keypoint(m) == i);
        CHECK(m != i);
    }
}

TEST_CASE("skeleton edges reference valid keypoints") {
    for (auto [a, b] : skeleton_edges()) {
        CHECK(a >= 0);
        CHECK(a < kNumKeypoints);
        CHECK(b >= 0);
        CHECK(b < kNumKeypoints);
        CHECK(a != b);
    }
}
