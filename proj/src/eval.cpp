#include "posekit/eval.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace posekit::eval {

double torso_size(const Pose& gt) {
    const double t = norm(gt.mid_shoulder() - gt.mid_hip());
    if (!(t > 0.0)) throw std::invalid_argument("torso_size: degenerate torso");
    return t;
}

SampleEval pck(const Pose& pred, const Pose& gt, const EvalConfig& cfg) {
    if (cfg.tolerance <= 0) throw std::invalid_argument("pck: tolerance must be positive");
    const double thresh = cfg.tolerance * torso_size(gt);
    SampleEval out;
    for (int k : cfg.subset) {
        const bool visible = gt.visibility[static_cast<size_t>(k)] > 0.5;
        if (!visible && cfg.invisible == InvisibleRule::Exclude) continue;
        const double err =
            norm(pred.points[static_cast<size_t>(k)] - gt.points[static_cast<size_t>(k)]);
        const bool ok = visible && err < thresh;
        out.keypoints.push_back(k);
        out.correct.push_back(ok);
        out.correct_count += ok ? 1 : 0;
        ++out.total;
    }
    out.pck = out.total > 0 ? 100.0 * out.correct_count / out.total : 100.0;
    return out;
}

void EvalReport::merge(const SampleEval& s) {
    for (size_t i = 0; i < s.keypoints.size(); ++i) {
        const auto k = static_cast<size_t>(s.keypoints[i]);
        kp_correct[k] += s.correct[i] ? 1 : 0;
        kp_total[k] += 1;
    }
    correct += s.correct_count;
    total += s.total;
    sample_pck.push_back(s.pck);
}

EvalReport evaluate_dataset(const Predictor& predictor,
                            const std::vector<synth::LoadedSample>& dataset,
                            const EvalConfig& cfg, const std::string& label) {
    if (dataset.empty()) throw std::invalid_argument("evaluate_dataset: empty dataset");
    EvalReport report;
    report.model_label = label;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& sample : dataset) {
        const Pose pred = predictor(sample);
        report.merge(pck(pred, sample.pose, cfg));
    }
    const auto t1 = std::chrono::steady_clock::now();
    report.seconds = std::chrono::duration<double>(t1 - t0).count();
    report.fps = report.seconds > 0 ? static_cast<double>(dataset.size()) / report.seconds : 0.0;
    return report;
}

EvalReport annotator_agreement(const std::vector<synth::ManifestRecord>& a,
                               const std::vector<synth::ManifestRecord>& b,
                               const EvalConfig& cfg) {
    if (a.size() != b.size())
        throw std::invalid_argument("annotator_agreement: manifests differ in length");
    std::map<std::string, const synth::ManifestRecord*> by_image;
    for (const auto& rec : b) by_image[rec.image] = &rec;
    EvalReport report;
    report.model_label = "agreement";
    for (const auto& ra : a) {
        auto it = by_image.find(ra.image);
        if (it == by_image.end())
            throw std::invalid_argument("annotator_agreement: image " + ra.image +
                                        " missing from second manifest");
        const Pose pa = synth::record_pose(ra);
        const Pose pb = synth::record_pose(*it->second);
        // both directions: each annotator serves as ground truth once
        report.merge(pck(pb, pa, cfg));
        report.merge(pck(pa, pb, cfg));
    }
    return report;
}

std::string emit_report(const std::vector<EvalReport>& reports, ReportFormat fmt,
                        const std::string& dataset_label, double tolerance) {
    if (reports.empty()) throw std::invalid_argument("emit_report: no reports");
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    const std::string metric =
        dataset_label + ", PCK@" + [&] {
            std::ostringstream t;
            t << tolerance;
            return t.str();
        }();
    if (fmt == ReportFormat::Markdown) {
        os << "| Model | FPS | " << metric << " |\n";
        os << "|---|---|---|\n";
        for (const auto& r : reports)
            os << "| " << r.model_label << " | " << r.fps << " | " << r.aggregate_pck() << " |\n";
    } else {
        os << "model,fps,pck\n";
        for (const auto& r : reports)
            os << r.model_label << "," << r.fps << "," << r.aggregate_pck() << "\n";
    }
    return os.str();
}

}  // namespace posekit::eval
