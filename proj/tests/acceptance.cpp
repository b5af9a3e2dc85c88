// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier than the unit suites; the end-to-end trainings dominate.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "posekit/eval.hpp"
#include "posekit/grad_check.hpp"
#include "posekit/posenet.hpp"
#include "posekit/synthdata.hpp"
#include "posekit/tracker.hpp"

using namespace posekit;
namespace topo = posekit::topology;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int index, const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", ok ? "PASS" : "FAIL", index, name,
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[256];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

NetworkConfig tiny_config() {
    NetworkConfig cfg;
    cfg.input_size = 32;
    cfg.heatmap_size = 8;
    cfg.base_channels = 2;
    cfg.num_keypoints = 3;
    return cfg;
}

template <typename T>
Tensor<T> random_tensor(const std::vector<int>& shape, std::mt19937_64& rng, double lo,
                        double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<T> t(shape);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(u(rng));
    return t;
}

std::map<std::string, Tensor<double>> cast_params(const PoseModel& m) {
    std::map<std::string, Tensor<double>> out;
    for (const auto& [name, t] : m.params) out.emplace(name, t.cast<double>());
    return out;
}

// ---- criterion 1: gradient correctness --------------------------------------

// one compound graph touching every differentiable op
double op_suite_worst(uint64_t seed, double* min_relu) {
    std::mt19937_64 rng(seed);
    auto rt = [&](std::vector<int> shape, double lo, double hi) {
        return random_tensor<double>(shape, rng, lo, hi);
    };
    std::map<std::string, Tensor<double>> params;
    params["w1"] = rt({4, 2, 3, 3}, -0.4, 0.4);
    params["b1"] = rt({4}, -0.2, 0.2);
    params["w3"] = rt({3, 4, 3, 3}, -0.4, 0.4);
    params["w2"] = rt({2, 11, 1, 1}, -0.4, 0.4);
    params["lw"] = rt({3, 32}, -0.3, 0.3);
    params["lb"] = rt({3}, -0.2, 0.2);
    const auto x = rt({2, 2, 8, 8}, -1, 1);
    const auto mse_t = rt({2, 2, 4, 4}, -1, 1);
    const auto mask = rt({2, 2, 4, 4}, 0, 1);
    const auto bce_t = rt({2, 3}, 0, 1);

    auto build = [&](Graph<double>& g, const std::map<std::string, Tensor<double>>& p) {
        const int in = g.input(x);
        const int c1 = g.relu(g.bias_add(g.conv2d(in, g.parameter("w1", p.at("w1")), 2),
                                         g.parameter("b1", p.at("b1"))));   // [2,4,4,4]
        const int up = g.upsample2x(c1);                                    // [2,4,8,8]
        const int c2 = g.conv2d(up, g.parameter("w3", p.at("w3")), 2);      // [2,3,4,4]
        const int cat = g.concat_channels({g.sigmoid(c1), g.affine(c1, 2.0, -0.1), c2});
        const int c3 = g.conv2d(cat, g.parameter("w2", p.at("w2")), 1);     // [2,2,4,4]
        const int flat = g.reshape(g.add(c3, c3), {2, 32});
        const int lin = g.linear(flat, g.parameter("lw", p.at("lw")), g.parameter("lb", p.at("lb")));
        const int l1 = g.masked_mse_loss(c3, g.input(mse_t), g.input(mask));
        const int l2 = g.bce_loss(lin, g.input(bce_t));
        const int l3 = g.mse_loss(g.sigmoid(lin), g.input(bce_t));
        const int l4 = g.masked_bce_loss(c3, g.input(mask), g.input(mask));
        return g.add(g.add(l1, l2), g.add(l3, g.scale(l4, 0.5)));
    };
    const GradCheckResult res = grad_check(params, build, 1e-5, 6);
    *min_relu = res.min_abs_relu_input;
    return res.max_rel_error;
}

bool criterion_gradients(std::string& detail) {
    const auto t0 = Clock::now();
    double worst = 0.0;
    int accepted = 0;
    for (uint64_t seed = 0; accepted < 20 && seed < 80; ++seed) {
        double min_relu = 0.0;
        const double err = op_suite_worst(seed, &min_relu);
        if (min_relu < 1e-4) continue;
        ++accepted;
        worst = std::max(worst, err);
    }

    // full network graph
    const NetworkConfig cfg = tiny_config();
    std::mt19937_64 rng(7);
    int net_accepted = 0;
    double net_worst = 0.0;
    for (uint64_t seed = 0; net_accepted < 20 && seed < 80; ++seed) {
        const PoseModel model = init_model(cfg, 500 + seed);
        const int K = cfg.num_keypoints, H = cfg.heatmap_size, S = cfg.input_size;
        const auto input = random_tensor<double>({1, 3, S, S}, rng, 0, 1);
        const auto hm_t = random_tensor<double>({1, K, H, H}, rng, 0, 1);
        const auto off_t = random_tensor<double>({1, 2 * K, H, H}, rng, -0.5, 0.5);
        const auto coord_t = random_tensor<double>({1, 2 * K}, rng, 0, 1);
        const auto vis_t = random_tensor<double>({1, K}, rng, 0, 1);
        const Tensor<double> m_hm({1, K, H, H}, 1.0);
        const Tensor<double> m_off({1, 2 * K, H, H}, 1.0);
        const Tensor<double> m_c({1, 2 * K}, 1.0);
        auto build = [&](Graph<double>& g, const std::map<std::string, Tensor<double>>& p) {
            const auto heads = build_network(g, cfg, p, g.input(input), true);
            return total_loss(g, cfg, heads, g.input(hm_t), g.input(m_hm), g.input(off_t),
                              g.input(m_off), g.input(coord_t), g.input(m_c), g.input(vis_t));
        };
        const GradCheckResult res = grad_check(cast_params(model), build, 1e-5, 3);
        if (res.min_abs_relu_input < 1e-4) continue;
        ++net_accepted;
        net_worst = std::max(net_worst, res.max_rel_error);
    }

    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    detail = fmt("op-suite max %.2e over %d seeds, net max %.2e over %d seeds, %.1fs", worst,
                 accepted, net_worst, net_accepted, secs);
    return accepted >= 20 && worst < 1e-3 && net_accepted >= 20 && net_worst < 1e-3 &&
           secs < 120.0;
}

// ---- criterion 2: gradient-stop invariant -----------------------------------

bool criterion_gradient_stop(std::string& detail) {
    NetworkConfig cfg = tiny_config();
    cfg.heatmap_weight = 0.0f;
    cfg.offset_weight = 0.0f;
    PoseModel model = init_model(cfg, 11);
    std::mt19937_64 rng(12);
    model.params.at("coord_head.w") =
        random_tensor<float>(model.params.at("coord_head.w").shape(), rng, -0.1, 0.1);
    model.params.at("vis_head.w") =
        random_tensor<float>(model.params.at("vis_head.w").shape(), rng, -0.1, 0.1);

    const int K = cfg.num_keypoints, S = cfg.input_size;
    const auto input = random_tensor<double>({1, 3, S, S}, rng, 0, 1);
    const auto coord_t = random_tensor<double>({1, 2 * K}, rng, 0, 1);
    const auto vis_t = random_tensor<double>({1, K}, rng, 0, 1);
    const Tensor<double> m_c({1, 2 * K}, 1.0);
    const Tensor<double> dummy_hm({1, K, cfg.heatmap_size, cfg.heatmap_size});
    const Tensor<double> dummy_off({1, 2 * K, cfg.heatmap_size, cfg.heatmap_size});

    auto dp = cast_params(model);
    auto loss_of = [&](Graph<double>& g, const std::map<std::string, Tensor<double>>& p,
                       const Tensor<double>* frozen) {
        const auto heads = build_network(g, cfg, p, g.input(input), true, frozen);
        return total_loss(g, cfg, heads, g.input(dummy_hm), g.input(dummy_hm),
                          g.input(dummy_off), g.input(dummy_off), g.input(coord_t),
                          g.input(m_c), g.input(vis_t));
    };

    Graph<double> g;
    const int loss = loss_of(g, dp, nullptr);
    g.backward(loss);
    double max_branch_grad = 0.0;
    bool nonzero_elsewhere = false;
    for (int id = 0; id < g.num_nodes(); ++id) {
        const auto& n = g.node(id);
        if (n.op != Graph<double>::Op::Parameter) continue;
        const bool branch = n.name.rfind("dec", 0) == 0 || n.name.rfind("hm_head", 0) == 0 ||
                            n.name.rfind("off_head", 0) == 0;
        for (int64_t i = 0; i < n.grad.size(); ++i) {
            if (branch)
                max_branch_grad = std::max(max_branch_grad, std::abs(n.grad[i]));
            else
                nonzero_elsewhere = nonzero_elsewhere || n.grad[i] != 0.0;
        }
    }

    // finite differences on the frozen-stop graph
    Tensor<double> frozen;
    {
        Graph<double> g0;
        const auto h0 = build_network(g0, cfg, dp, g0.input(input), true);
        frozen = g0.value(h0.decoder);
    }
    double max_fd = 0.0;
    const double eps = 1e-5;
    for (const char* name : {"dec2.w", "dec3.w", "hm_head.w", "off_head.w", "dec3.b"}) {
        Tensor<double>& t = dp.at(name);
        for (int64_t i = 0; i < t.size(); i += std::max<int64_t>(1, t.size() / 4)) {
            const double orig = t[i];
            t[i] = orig + eps;
            Graph<double> gp;
            const double lp = gp.value(loss_of(gp, dp, &frozen))[0];
            t[i] = orig - eps;
            Graph<double> gm;
            const double lm = gm.value(loss_of(gm, dp, &frozen))[0];
            t[i] = orig;
            max_fd = std::max(max_fd, std::abs(lp - lm) / (2.0 * eps));
        }
    }
    detail = fmt("analytic branch max |g| = %g, frozen-FD max %.2e", max_branch_grad, max_fd);
    return max_branch_grad == 0.0 && nonzero_elsewhere && max_fd <= 1e-6;
}

// ---- criterion 3: head-strip equivalence ------------------------------------

bool criterion_strip(std::string& detail) {
    const NetworkConfig cfg = NetworkConfig::lite_toy();
    PoseModel model = init_model(cfg, 21);
    std::mt19937_64 rng(22);
    for (auto& [name, t] : model.params)
        if (name.rfind("coord_head", 0) == 0 || name.rfind("vis_head", 0) == 0)
            t = random_tensor<float>(t.shape(), rng, -0.2, 0.2);
    const PoseModel stripped = strip_heatmap_head(model);
    bool identical = true;
    for (int trial = 0; trial < 100 && identical; ++trial) {
        const auto crop = random_tensor<float>({3, cfg.input_size, cfg.input_size}, rng, 0, 1);
        const InferResult a = infer(model, crop);
        const InferResult b = infer(stripped, crop);
        for (int k = 0; k < cfg.num_keypoints; ++k)
            identical = identical && a.coords[static_cast<size_t>(k)].x == b.coords[static_cast<size_t>(k)].x &&
                        a.coords[static_cast<size_t>(k)].y == b.coords[static_cast<size_t>(k)].y &&
                        a.visibility[static_cast<size_t>(k)] == b.visibility[static_cast<size_t>(k)];
    }
    detail = fmt("100 inputs bit-identical: %s; params %lld -> %lld",
                 identical ? "yes" : "NO", static_cast<long long>(model.parameter_count()),
                 static_cast<long long>(stripped.parameter_count()));
    return identical && stripped.parameter_count() < model.parameter_count();
}

// ---- criterion 4: end-to-end toy training -----------------------------------

struct TrainedModels {
    PoseModel full, lite;
    std::vector<synth::LoadedSample> test_set;
    double full_pck = 0.0, lite_pck = 0.0;
    double full_fps = 0.0;
};

double heldout_pck(const PoseModel& model, const std::vector<synth::LoadedSample>& test,
                   double* fps = nullptr) {
    const eval::EvalReport r = eval::evaluate_dataset(
        [&](const synth::LoadedSample& s) {
            return predict_pose(model, s.image, pose_to_roi(s.pose));
        },
        test);
    if (fps) *fps = r.fps;
    return r.aggregate_pck();
}

bool criterion_training(std::string& detail, TrainedModels& out) {
    const auto t0 = Clock::now();
    const fs::path dir = fs::temp_directory_path() / "posekit_acceptance_ds";
    // reuse a complete previous generation; a half-written one is regenerated
    bool have = false;
    if (std::ifstream m(dir / "manifest.jsonl"); m) {
        std::string line;
        int lines = 0;
        while (std::getline(m, line)) ++lines;
        have = lines == 2200;
    }
    if (!have) {
        fs::remove_all(dir);
        synth::generate_dataset(2200, 1, dir.string());
    }
    auto all = synth::load_dataset((dir / "manifest.jsonl").string());
    out.test_set.assign(all.end() - 200, all.end());
    all.resize(2000);

    // budgets calibrated on a single core: ~25 s/epoch full, ~7 s/epoch lite
    TrainOptions opts;
    opts.batch_size = 16;
    opts.seed = 1;

    opts.epochs = 25;
    out.full = init_model(NetworkConfig::full_toy(), 1);
    train(out.full, all, opts);
    out.full_pck = heldout_pck(out.full, out.test_set, &out.full_fps);

    opts.epochs = 30;
    out.lite = init_model(NetworkConfig::lite_toy(), 1);
    train(out.lite, all, opts);
    out.lite_pck = heldout_pck(out.lite, out.test_set);

    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    detail = fmt("full-toy PCK %.2f (need >=90), lite-toy %.2f (need >=80), %.0fs",
                 out.full_pck, out.lite_pck, secs);
    return out.full_pck >= 90.0 && out.lite_pck >= 80.0;
}

// ---- criterion 5: overfit sanity --------------------------------------------

bool criterion_overfit(std::string& detail) {
    const auto t0 = Clock::now();
    const fs::path dir = fs::temp_directory_path() / "posekit_acceptance_overfit";
    fs::remove_all(dir);
    synth::GenerateConfig gen;
    gen.occlusion.max_rects = 0;
    synth::generate_dataset(8, 2024, dir.string(), gen);
    const auto dataset = synth::load_dataset((dir / "manifest.jsonl").string());

    NetworkConfig cfg;
    cfg.input_size = 32;
    cfg.heatmap_size = 8;
    cfg.base_channels = 8;
    PoseModel model = init_model(cfg, 1);
    TrainOptions opts;
    opts.epochs = 500;  // batch == dataset -> 500 steps
    opts.batch_size = 8;
    opts.seed = 9;
    opts.jitter_scale = 0.0;
    opts.jitter_shift = 0.0;
    opts.aug_occlusion.max_rects = 0;
    train(model, dataset, opts);
    const double pck = heldout_pck(model, dataset);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    fs::remove_all(dir);
    detail = fmt("train PCK %.2f after 500 steps, %.1fs", pck, secs);
    return pck == 100.0 && secs < 120.0;
}

// ---- criterion 6: PCK oracle + invariances ----------------------------------

Pose random_pose(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 100.0);
    Pose p;
    for (auto& q : p.points) q = {u(rng), u(rng)};
    p.points[topo::kLeftShoulder] = {40, 20};
    p.points[topo::kRightShoulder] = {60, 20};
    p.points[topo::kLeftHip] = {40, 60};
    p.points[topo::kRightHip] = {60, 60};
    p.visibility.fill(1.0);
    return p;
}

Pose rigid(const Pose& p, double angle, Point2 shift, double scale) {
    Pose out = p;
    for (auto& q : out.points) q = rotate(q, angle) * scale + shift;
    return out;
}

bool criterion_pck_oracle(std::string& detail) {
    std::mt19937_64 rng(61);
    std::normal_distribution<double> noise(0.0, 5.0);

    // brute-force recomputation on 100 random pairs
    std::vector<synth::LoadedSample> dataset(100);
    std::vector<Pose> preds(100);
    for (size_t i = 0; i < dataset.size(); ++i) {
        dataset[i].image = Image(2, 2);
        dataset[i].pose = random_pose(rng);
        if (i % 4 == 0) dataset[i].pose.visibility[topo::kLeftWrist] = 0.0;
        preds[i] = dataset[i].pose;
        for (auto& q : preds[i].points) q = q + Point2{noise(rng), noise(rng)};
    }
    size_t next = 0;
    const eval::EvalReport rep =
        eval::evaluate_dataset([&](const synth::LoadedSample&) { return preds[next++]; }, dataset);
    int64_t correct = 0, total = 0;
    for (size_t i = 0; i < dataset.size(); ++i) {
        const Pose& gt = dataset[i].pose;
        const double torso = norm(midpoint(gt.points[11], gt.points[12]) -
                                  midpoint(gt.points[23], gt.points[24]));
        for (int k : topo::coco17_subset().members) {
            if (gt.visibility[static_cast<size_t>(k)] == 0.0) continue;
            const Point2 d = preds[i].points[static_cast<size_t>(k)] -
                             gt.points[static_cast<size_t>(k)];
            correct += norm(d) < 0.2 * torso ? 1 : 0;
            ++total;
        }
    }
    const bool oracle_ok = rep.correct == correct && rep.total == total &&
                           std::abs(rep.aggregate_pck() - 100.0 * correct / total) < 1e-9;

    // invariances + monotonicity on 1000 cases
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    std::uniform_real_distribution<double> shift(-150.0, 150.0);
    std::uniform_real_distribution<double> scl(0.2, 5.0);
    bool props_ok = true;
    for (int trial = 0; trial < 1000 && props_ok; ++trial) {
        const Pose gt = random_pose(rng);
        Pose pred = gt;
        for (auto& q : pred.points) q = q + Point2{noise(rng), noise(rng)};
        const eval::SampleEval base = eval::pck(pred, gt, {});
        const double a = angle(rng), s = scl(rng);
        const Point2 t{shift(rng), shift(rng)};
        const eval::SampleEval moved = eval::pck(rigid(pred, a, t, s), rigid(gt, a, t, s), {});
        props_ok = props_ok && base.correct == moved.correct;
        eval::EvalConfig lo, hi;
        lo.tolerance = 0.1 + 0.2 * (trial % 5) / 5.0;
        hi.tolerance = lo.tolerance + 0.1;
        props_ok = props_ok &&
                   eval::pck(pred, gt, hi).correct_count >= eval::pck(pred, gt, lo).correct_count;
    }
    detail = fmt("oracle counts %s, 1000 property cases %s", oracle_ok ? "match" : "DIFFER",
                 props_ok ? "hold" : "VIOLATED");
    return oracle_ok && props_ok;
}

// ---- criterion 7: tracker state machine -------------------------------------

class ScriptedEstimator : public track::EstimatorPort {
public:
    explicit ScriptedEstimator(std::vector<bool> present) : present_(std::move(present)) {}
    Pose estimate(const Image&, const Roi&) override {
        synth::PuppetParams pp;
        pp.root = {64, 70};
        pp.scale = 30;
        pp.shoulder_angle = {0.5, 0.5};
        pp.hip_angle = {0.1, 0.1};
        Pose p = synth::puppet_pose(pp);
        p.visibility.fill(present_.at(static_cast<size_t>(calls_++)) ? 1.0 : 0.1);
        return p;
    }

private:
    std::vector<bool> present_;
    int calls_ = 0;
};

track::ClipResult run_script(const std::vector<bool>& script) {
    synth::PuppetParams pp;
    pp.root = {64, 70};
    pp.scale = 30;
    pp.shoulder_angle = {0.5, 0.5};
    pp.hip_angle = {0.1, 0.1};
    const std::vector<Image> frames(script.size(), Image(128, 128));
    std::vector<std::optional<Pose>> gt(script.size(), synth::puppet_pose(pp));
    track::OracleDetector detector(gt);
    ScriptedEstimator estimator(script);
    return track::run_clip(frames, track::TrackerConfig{}, detector, estimator);
}

std::vector<int> reference_invocations(const std::vector<bool>& script) {
    std::vector<int> out;
    bool tracking = false;
    for (size_t i = 0; i < script.size(); ++i) {
        if (!tracking) out.push_back(static_cast<int>(i));
        tracking = script[i];
    }
    return out;
}

bool criterion_tracker(std::string& detail) {
    // 50 frames, presence forced low at frames 10 and 30 (1-indexed)
    std::vector<bool> script(50, true);
    script[9] = false;
    script[29] = false;
    const track::ClipResult fixed = run_script(script);
    const bool fixed_ok = fixed.detector_invocations == std::vector<int>{0, 10, 30};

    std::mt19937_64 rng(71);
    std::bernoulli_distribution coin(0.65);
    bool random_ok = true;
    for (int trial = 0; trial < 100 && random_ok; ++trial) {
        std::vector<bool> s(30);
        for (size_t i = 0; i < s.size(); ++i) s[i] = coin(rng);
        random_ok = run_script(s).detector_invocations == reference_invocations(s);
    }
    detail = fmt("fixed script invocations at {1,11,31}: %s; 100 random scripts: %s",
                 fixed_ok ? "yes" : "NO", random_ok ? "match" : "DIFFER");
    return fixed_ok && random_ok;
}

// ---- criterion 8: alignment properties --------------------------------------

bool criterion_alignment(std::string& detail) {
    std::mt19937_64 rng(81);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double worst_inv = 0.0, worst_round = 0.0, worst_vertical = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        synth::PuppetParams pp;
        pp.root = {200.0 + 100.0 * u01(rng), 200.0 + 100.0 * u01(rng)};
        pp.scale = 40.0 + 40.0 * u01(rng);
        pp.lean = (u01(rng) - 0.5) * 1.2;
        for (int s = 0; s < 2; ++s) {
            pp.shoulder_angle[static_cast<size_t>(s)] = u01(rng) * 1.2;
            pp.elbow_bend[static_cast<size_t>(s)] = u01(rng);
            pp.hip_angle[static_cast<size_t>(s)] = u01(rng) * 0.4;
            pp.knee_bend[static_cast<size_t>(s)] = u01(rng) * 0.6;
        }
        const Pose pose = synth::puppet_pose(pp);

        // verticalization
        const double rot = estimate_rotation(pose);
        const Point2 hip = pose.mid_hip();
        const Point2 v = rotate(pose.mid_shoulder() - hip, rot);
        worst_vertical = std::max(worst_vertical, std::abs(v.x));

        // rigid-motion invariance of aligned crop coordinates
        const int S = 64;
        const Roi roi = pose_to_roi(pose);
        const SimilarityTransform to_crop = invert(roi_to_transform(roi, S));
        const Pose aligned = transform_pose(pose, to_crop);
        SimilarityTransform motion;
        motion.rotation = (u01(rng) - 0.5) * 2.0 * M_PI;
        motion.scale = 1.0;  // rigid
        motion.translation = {(u01(rng) - 0.5) * 300.0, (u01(rng) - 0.5) * 300.0};
        const Pose moved = transform_pose(pose, motion);
        const Roi roi2 = pose_to_roi(moved);
        const Pose aligned2 = transform_pose(moved, invert(roi_to_transform(roi2, S)));
        for (int k = 0; k < topo::kNumKeypoints; ++k)
            worst_inv = std::max(
                worst_inv, norm(aligned.points[static_cast<size_t>(k)] -
                                aligned2.points[static_cast<size_t>(k)]));

        // transform round-trip
        const SimilarityTransform t = roi_to_transform(roi, S);
        const Point2 probe{u01(rng) * S, u01(rng) * S};
        worst_round = std::max(worst_round, norm(invert(t).apply(t.apply(probe)) - probe));
    }
    detail = fmt("rigid-motion %.2e (<=1e-6), round-trip %.2e (<=1e-9), vertical %.2e (<=1e-9)",
                 worst_inv, worst_round, worst_vertical);
    return worst_inv <= 1e-6 && worst_round <= 1e-9 && worst_vertical <= 1e-9;
}

// ---- criterion 9: occlusion / visibility ------------------------------------

bool criterion_occlusion(std::string& detail, const TrainedModels& models) {
    // predicate exactness via the generator's documented draw order
    synth::PuppetParams pp;
    pp.root = {48, 52};
    pp.scale = 30;
    const Pose pose = synth::puppet_pose(pp);
    const synth::OcclusionConfig cfg{3, 0.10, 0.50};
    bool predicate_ok = true;
    int cases = 0;
    for (uint64_t seed = 0; seed < 1000 && predicate_ok; ++seed) {
        Image img(96, 96);
        std::mt19937_64 rng(seed), replay(seed);
        const auto labels = synth::occlude(img, pose, rng, cfg);
        std::uniform_int_distribution<int> ucount(0, cfg.max_rects);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::array<float, topo::kNumKeypoints> expect;
        expect.fill(1.0f);
        const int count = ucount(replay);
        for (int r = 0; r < count; ++r) {
            const double rw = 96.0 * (cfg.min_frac + (cfg.max_frac - cfg.min_frac) * u01(replay));
            const double rh = 96.0 * (cfg.min_frac + (cfg.max_frac - cfg.min_frac) * u01(replay));
            const double x0 = (96.0 - rw) * u01(replay);
            const double y0 = (96.0 - rh) * u01(replay);
            u01(replay);
            u01(replay);
            u01(replay);
            for (int k = 0; k < topo::kNumKeypoints; ++k) {
                const Point2 q = pose.points[static_cast<size_t>(k)];
                if (q.x >= x0 && q.x <= x0 + rw && q.y >= y0 && q.y <= y0 + rh)
                    expect[static_cast<size_t>(k)] = 0.0f;
            }
        }
        for (int k = 0; k < topo::kNumKeypoints; ++k) {
            predicate_ok = predicate_ok &&
                           labels[static_cast<size_t>(k)] == expect[static_cast<size_t>(k)];
            ++cases;
        }
    }

    // visibility classification accuracy of the trained full-toy model
    int64_t hits = 0, n = 0;
    for (const auto& s : models.test_set) {
        const Pose pred = predict_pose(models.full, s.image, pose_to_roi(s.pose));
        for (int k = 0; k < topo::kNumKeypoints; ++k) {
            const bool predicted = pred.visibility[static_cast<size_t>(k)] >= 0.5;
            const bool actual = s.pose.visibility[static_cast<size_t>(k)] > 0.5;
            hits += predicted == actual ? 1 : 0;
            ++n;
        }
    }
    const double acc = 100.0 * static_cast<double>(hits) / static_cast<double>(n);
    detail = fmt("predicate exact on %d labels: %s; visibility accuracy %.2f%% (need >=85)",
                 cases, predicate_ok ? "yes" : "NO", acc);
    return predicate_ok && acc >= 85.0;
}

// ---- criterion 10: pipeline end-to-end --------------------------------------

bool criterion_pipeline(std::string& detail, const TrainedModels& models) {
    // smooth clip: a puppet swinging its limbs and drifting across the canvas
    const int frames_n = 40;
    std::vector<Image> frames;
    std::vector<Pose> gt;
    std::vector<std::optional<Pose>> det_gt;
    for (int f = 0; f < frames_n; ++f) {
        const double t = static_cast<double>(f) / frames_n;
        synth::PuppetParams pp;
        pp.root = {52.0 + 24.0 * t, 66.0 + 6.0 * std::sin(t * 2.0 * M_PI)};
        pp.scale = 32.0 + 4.0 * std::sin(t * 4.0);
        pp.lean = 0.25 * std::sin(t * 2.0 * M_PI);
        const double sw = 0.5 + 0.35 * std::sin(t * 6.0);
        pp.shoulder_angle = {sw, 0.9 - sw};
        pp.elbow_bend = {0.3, 0.3};
        pp.hip_angle = {0.12, 0.12};
        pp.knee_bend = {0.2, 0.2};
        pp.style_seed = 5;
        frames.push_back(synth::render_puppet(pp, 128, 128));
        gt.push_back(synth::puppet_pose(pp));
        det_gt.push_back(gt.back());
    }
    track::OracleDetector detector(det_gt);
    track::ModelEstimator estimator(models.full);
    track::TrackerConfig tcfg;
    tcfg.crop_size = models.full.config.input_size;
    const auto t0 = Clock::now();
    const track::ClipResult clip = track::run_clip(frames, tcfg, detector, estimator);
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();

    eval::EvalReport report;
    report.model_label = "full-toy tracked";
    double pck_sum = 0.0;
    int counted = 0;
    for (int f = 1; f < frames_n; ++f) {  // frames after the first
        const eval::SampleEval s =
            eval::pck(clip.frames[static_cast<size_t>(f)].pose, gt[static_cast<size_t>(f)], {});
        report.merge(s);
        pck_sum += s.pck;
        ++counted;
    }
    report.seconds = secs;
    report.fps = frames_n / secs;
    const double mean_pck = pck_sum / counted;

    std::printf("%s", eval::emit_report({report}, eval::ReportFormat::Markdown, "Clip").c_str());
    detail = fmt("mean per-frame PCK %.2f (need >=85), %.1f fps, detector ran %zu time(s)",
                 mean_pck, report.fps, clip.detector_invocations.size());
    return mean_pck >= 85.0;
}

}  // namespace

int main() {
    std::string detail;
    TrainedModels models;

    bool ok = criterion_gradients(detail);
    report(1, "gradient correctness", ok, detail);

    ok = criterion_gradient_stop(detail);
    report(2, "gradient-stop invariant", ok, detail);

    ok = criterion_strip(detail);
    report(3, "head-strip equivalence", ok, detail);

    ok = criterion_training(detail, models);
    report(4, "end-to-end toy training", ok, detail);

    ok = criterion_overfit(detail);
    report(5, "overfit sanity", ok, detail);

    ok = criterion_pck_oracle(detail);
    report(6, "PCK oracle equivalence", ok, detail);

    ok = criterion_tracker(detail);
    report(7, "tracker state machine", ok, detail);

    ok = criterion_alignment(detail);
    report(8, "alignment properties", ok, detail);

    ok = criterion_occlusion(detail, models);
    report(9, "occlusion and visibility", ok, detail);

    ok = criterion_pipeline(detail, models);
    report(10, "pipeline end-to-end", ok, detail);

    std::printf("%d/10 criteria passed\n", 10 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
