#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/synthdata.hpp"
#include "posekit/topology.hpp"

namespace posekit::eval {

/// How keypoints with ground-truth visibility 0 are scored.
enum class InvisibleRule {
    Exclude,         // dropped from numerator and denominator (default)
    CountIncorrect,  // kept in the denominator, never correct
};

struct EvalConfig {
    double tolerance = 0.2;  // fraction of torso size
    std::vector<int> subset = topology::coco17_subset().members;
    InvisibleRule invisible = InvisibleRule::Exclude;
};

/// Distance between mid-shoulder and mid-hip. Rotation/translation invariant;
/// throws on a degenerate (zero-length) torso.
double torso_size(const Pose& gt);

struct SampleEval {
    std::vector<int> keypoints;  // subset indices that were scored
    std::vector<bool> correct;   // parallel to keypoints
    int correct_count = 0;
    int total = 0;
    double pck = 100.0;  // 100 when nothing was scored
};

/// Keypoint k is correct iff ||pred_k - gt_k|| < tolerance * torso_size(gt)
/// (strict inequality at the boundary).
SampleEval pck(const Pose& pred, const Pose& gt, const EvalConfig& cfg = {});

struct EvalReport {
    std::string model_label = "model";
    std::array<int64_t, topology::kNumKeypoints> kp_correct{};
    std::array<int64_t, topology::kNumKeypoints> kp_total{};
    int64_t correct = 0;
    int64_t total = 0;
    std::vector<double> sample_pck;
    double seconds = 0.0;
    double fps = 0.0;

    double aggregate_pck() const {
        return total > 0 ? 100.0 * static_cast<double>(correct) / static_cast<double>(total)
                         : 100.0;
    }
    void merge(const SampleEval& s);
};

using Predictor = std::function<Pose(const synth::LoadedSample&)>;

/// Runs the predictor over every sample in order, timing the predictor calls.
EvalReport evaluate_dataset(const Predictor& predictor,
                            const std::vector<synth::LoadedSample>& dataset,
                            const EvalConfig& cfg = {}, const std::string& label = "model");

/// Human-baseline protocol: scores B against A and A against B (matching
/// records by image path) and merges the counts of both directions.
EvalReport annotator_agreement(const std::vector<synth::ManifestRecord>& a,
                               const std::vector<synth::ManifestRecord>& b,
                               const EvalConfig& cfg = {});

enum class ReportFormat { Markdown, Csv };

/// One row per report: Model | FPS | <dataset> PCK@<tol>.
std::string emit_report(const std::vector<EvalReport>& reports, ReportFormat fmt,
                        const std::string& dataset_label = "Synthetic", double tolerance = 0.2);

}  // namespace posekit::eval
