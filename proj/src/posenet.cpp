#include "posekit/posenet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "posekit/checkpoint.hpp"
#include "posekit/optimizer.hpp"

namespace posekit {

namespace topo = posekit::topology;
using json = nlohmann::json;

NetworkConfig NetworkConfig::full_toy() {
    NetworkConfig cfg;
    cfg.preset = "full-toy";
    cfg.base_channels = 16;
    // coordinate MSE is numerically tiny next to the BCE terms; without the
    // boost the shared encoder optimizes for heatmaps and regression stalls
    cfg.regression_weight = 30.0f;
    return cfg;
}

NetworkConfig NetworkConfig::lite_toy() {
    NetworkConfig cfg;
    cfg.preset = "lite-toy";
    cfg.base_channels = 8;
    cfg.regression_weight = 30.0f;
    return cfg;
}

void NetworkConfig::validate() const {
    if (input_size <= 0 || input_size % 32 != 0)
        throw std::invalid_argument("config: input_size must be a positive multiple of 32");
    if (heatmap_size * 4 != input_size)
        throw std::invalid_argument("config: heatmap_size must equal input_size / 4");
    if (num_keypoints < 1) throw std::invalid_argument("config: num_keypoints must be >= 1");
    if (base_channels < 1) throw std::invalid_argument("config: base_channels must be >= 1");
    if (heatmap_sigma <= 0) throw std::invalid_argument("config: heatmap_sigma must be positive");
    for (float w : {heatmap_weight, offset_weight, regression_weight, visibility_weight})
        if (w < 0) throw std::invalid_argument("config: loss weights must be non-negative");
}

std::map<std::string, std::vector<int>> parameter_shapes(const NetworkConfig& cfg,
                                                         bool with_train_heads) {
    cfg.validate();
    const int C = cfg.base_channels, K = cfg.num_keypoints;
    const int bottom = cfg.input_size / 32;
    const int flat = 8 * C * bottom * bottom;
    std::map<std::string, std::vector<int>> s;
    auto conv = [&s](const std::string& name, int out, int in, int k) {
        s[name + ".w"] = {out, in, k, k};
        s[name + ".b"] = {out};
    };
    conv("enc1", C, 3, 3);
    conv("enc2", 2 * C, C, 3);
    conv("enc3", 4 * C, 2 * C, 3);
    conv("enc4", 8 * C, 4 * C, 3);
    conv("dec3", 4 * C, 8 * C + 4 * C, 3);
    conv("dec2", 2 * C, 4 * C + 2 * C, 3);
    if (with_train_heads) {
        conv("hm_head", K, 2 * C, 1);
        conv("off_head", 2 * K, 2 * C, 1);
    }
    conv("reg1", 4 * C, 2 * C + 2 * C, 3);
    conv("reg2", 8 * C, 4 * C + 4 * C, 3);
    conv("reg3", 8 * C, 8 * C, 3);
    s["coord_head.w"] = {2 * K, flat};
    s["coord_head.b"] = {2 * K};
    s["vis_head.w"] = {K, flat};
    s["vis_head.b"] = {K};
    return s;
}

int64_t PoseModel::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
}

PoseModel init_model(const NetworkConfig& cfg, uint64_t seed) {
    PoseModel model;
    model.config = cfg;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (const auto& [name, shape] : parameter_shapes(cfg)) {
        Tensor<float> t(shape);
        const bool is_output_head =
            name.rfind("coord_head", 0) == 0 || name.rfind("vis_head", 0) == 0;
        if (name.ends_with(".w") && !is_output_head) {
            int64_t fan_in = 1;
            for (size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
            const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (int64_t i = 0; i < t.size(); ++i)
                t[i] = static_cast<float>(gauss(rng) * std_dev);
        }
        // biases and output heads start at zero: untrained coords sit at 0.5
        model.params.emplace(name, std::move(t));
    }
    return model;
}

void save_model(const std::string& path, const PoseModel& model) {
    save_checkpoint(path, model.params);
    std::ofstream os(path + ".json");
    if (!os) throw std::runtime_error("save_model: cannot open " + path + ".json");
    os << config_to_json(model.config).dump(2) << "\n";
}

PoseModel load_model(const std::string& path) {
    PoseModel model;
    model.params = load_checkpoint(path);
    std::ifstream is(path + ".json");
    if (!is) throw std::runtime_error("load_model: missing config sidecar " + path + ".json");
    json j;
    is >> j;
    model.config = config_from_json(j);
    model.stripped = model.params.find("hm_head.w") == model.params.end();
    return model;
}

json config_to_json(const NetworkConfig& cfg) {
    return json{{"input_size", cfg.input_size},
                {"num_keypoints", cfg.num_keypoints},
                {"base_channels", cfg.base_channels},
                {"heatmap_size", cfg.heatmap_size},
                {"heatmap_sigma", cfg.heatmap_sigma},
                {"heatmap_weight", cfg.heatmap_weight},
                {"offset_weight", cfg.offset_weight},
                {"regression_weight", cfg.regression_weight},
                {"visibility_weight", cfg.visibility_weight},
                {"preset", cfg.preset}};
}

NetworkConfig config_from_json(const json& j) {
    NetworkConfig cfg;
    if (j.contains("preset")) {
        const auto p = j.at("preset").get<std::string>();
        if (p == "full-toy")
            cfg = NetworkConfig::full_toy();
        else if (p == "lite-toy")
            cfg = NetworkConfig::lite_toy();
        else
            throw std::invalid_argument("config: unknown preset '" + p + "'");
    }
    for (const auto& [key, value] : j.items()) {
        if (key == "input_size")
            cfg.input_size = value.get<int>();
        else if (key == "num_keypoints")
            cfg.num_keypoints = value.get<int>();
        else if (key == "base_channels")
            cfg.base_channels = value.get<int>();
        else if (key == "heatmap_size")
            cfg.heatmap_size = value.get<int>();
        else if (key == "heatmap_sigma")
            cfg.heatmap_sigma = value.get<float>();
        else if (key == "heatmap_weight")
            cfg.heatmap_weight = value.get<float>();
        else if (key == "offset_weight")
            cfg.offset_weight = value.get<float>();
        else if (key == "regression_weight")
            cfg.regression_weight = value.get<float>();
        else if (key == "visibility_weight")
            cfg.visibility_weight = value.get<float>();
        else if (key == "preset")
            ;  // handled above
        else
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

HeatmapTargets heatmap_targets(const std::vector<Point2>& coords,
                               const std::vector<float>& visibility, int grid, double sigma) {
    if (coords.size() != visibility.size())
        throw std::invalid_argument("heatmap_targets: coords/visibility size mismatch");
    const int K = static_cast<int>(coords.size());
    const int H = grid;
    HeatmapTargets t{Tensor<float>({K, H, H}), Tensor<float>({2 * K, H, H}),
                     Tensor<float>({K, H, H}), Tensor<float>({2 * K, H, H})};
    for (int k = 0; k < K; ++k) {
        const Point2 p = coords[static_cast<size_t>(k)];
        const bool in_crop = p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0;
        if (visibility[static_cast<size_t>(k)] < 0.5f || !in_crop) continue;  // fully masked

        const double px = p.x * H, py = p.y * H;  // cell units
        const int ix = std::clamp(static_cast<int>(std::floor(px)), 0, H - 1);
        const int iy = std::clamp(static_cast<int>(std::floor(py)), 0, H - 1);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < H; ++x) {
                const double d2 = static_cast<double>((x - ix) * (x - ix) + (y - iy) * (y - iy));
                t.heatmap[(static_cast<int64_t>(k) * H + y) * H + x] =
                    static_cast<float>(std::exp(-d2 / (2.0 * sigma * sigma)));
                t.heatmap_mask[(static_cast<int64_t>(k) * H + y) * H + x] = 1.0f;
            }
        // offsets: displacement from each cell center, within one cell of the peak
        for (int y = std::max(0, iy - 1); y <= std::min(H - 1, iy + 1); ++y)
            for (int x = std::max(0, ix - 1); x <= std::min(H - 1, ix + 1); ++x) {
                const int64_t ox = (static_cast<int64_t>(2 * k) * H + y) * H + x;
                const int64_t oy = (static_cast<int64_t>(2 * k + 1) * H + y) * H + x;
                t.offsets[ox] = static_cast<float>(px - (x + 0.5));
                t.offsets[oy] = static_cast<float>(py - (y + 0.5));
                t.offset_mask[ox] = 1.0f;
                t.offset_mask[oy] = 1.0f;
            }
    }
    return t;
}

std::vector<Point2> decode_heatmap(const Tensor<float>& heatmaps, const Tensor<float>& offsets) {
    if (heatmaps.rank() != 3 || offsets.rank() != 3 ||
        offsets.dim(0) != 2 * heatmaps.dim(0) || offsets.dim(1) != heatmaps.dim(1))
        throw std::invalid_argument("decode_heatmap: expected [K,H,H] and [2K,H,H]");
    const int K = heatmaps.dim(0), H = heatmaps.dim(1);
    std::vector<Point2> out(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) {
        int best_x = 0, best_y = 0;
        float best = -std::numeric_limits<float>::infinity();
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < H; ++x) {
                const float v = heatmaps[(static_cast<int64_t>(k) * H + y) * H + x];
                if (v > best) {
                    best = v;
                    best_x = x;
                    best_y = y;
                }
            }
        const float dx = offsets[(static_cast<int64_t>(2 * k) * H + best_y) * H + best_x];
        const float dy = offsets[(static_cast<int64_t>(2 * k + 1) * H + best_y) * H + best_x];
        out[static_cast<size_t>(k)] = {(best_x + 0.5 + dx) / H, (best_y + 0.5 + dy) / H};
    }
    return out;
}

namespace {

Tensor<float> batched_input(const Tensor<float>& crop) {
    if (crop.rank() != 3) throw std::invalid_argument("infer: expected a [3,S,S] crop");
    Tensor<float> b({1, crop.dim(0), crop.dim(1), crop.dim(2)});
    std::copy(crop.data(), crop.data() + crop.size(), b.data());
    return b;
}

}  // namespace

InferResult infer(const PoseModel& model, const Tensor<float>& crop) {
    model.config.validate();
    if (crop.rank() != 3 || crop.dim(0) != 3 || crop.dim(1) != model.config.input_size ||
        crop.dim(2) != model.config.input_size)
        throw std::invalid_argument("infer: crop shape " + shape_str(crop.shape()) +
                                    " does not match configured input size");
    Graph<float> g;
    const int in = g.input(batched_input(crop));
    const auto heads = build_network(g, model.config, model.params, in, !model.stripped);
    const int K = model.config.num_keypoints;
    InferResult r;
    r.coords.resize(static_cast<size_t>(K));
    r.visibility.resize(static_cast<size_t>(K));
    const Tensor<float>& c = g.value(heads.coords);
    const Tensor<float>& v = g.value(g.sigmoid(heads.vis_logits));
    for (int k = 0; k < K; ++k) {
        r.coords[static_cast<size_t>(k)] = {c[2 * k], c[2 * k + 1]};
        r.visibility[static_cast<size_t>(k)] = v[k];
    }
    return r;
}

TrainingForward forward_training(const PoseModel& model, const Tensor<float>& crop) {
    if (model.stripped)
        throw std::invalid_argument("forward_training: model has no training heads");
    Graph<float> g;
    const int in = g.input(batched_input(crop));
    const auto heads = build_network(g, model.config, model.params, in, true);
    const int K = model.config.num_keypoints, H = model.config.heatmap_size;
    TrainingForward out;
    out.heatmaps = Tensor<float>({K, H, H});
    out.offsets = Tensor<float>({2 * K, H, H});
    const Tensor<float>& hm = g.value(heads.heatmaps);
    const Tensor<float>& of = g.value(heads.offsets);
    std::copy(hm.data(), hm.data() + hm.size(), out.heatmaps.data());
    std::copy(of.data(), of.data() + of.size(), out.offsets.data());
    const Tensor<float>& c = g.value(heads.coords);
    const Tensor<float>& v = g.value(g.sigmoid(heads.vis_logits));
    out.regression.coords.resize(static_cast<size_t>(K));
    out.regression.visibility.resize(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) {
        out.regression.coords[static_cast<size_t>(k)] = {c[2 * k], c[2 * k + 1]};
        out.regression.visibility[static_cast<size_t>(k)] = v[k];
    }
    return out;
}

Pose predict_pose(const PoseModel& model, const Image& image, const Roi& roi) {
    const int S = model.config.input_size;
    const Tensor<float> crop = image_to_tensor(crop_image(image, roi, S));
    const InferResult r = infer(model, crop);
    const SimilarityTransform to_image = roi_to_transform(roi, S);
    Pose pose;
    for (int k = 0; k < topo::kNumKeypoints; ++k) {
        const Point2 crop_px = r.coords[static_cast<size_t>(k)] * static_cast<double>(S);
        pose.points[static_cast<size_t>(k)] = to_image.apply(crop_px);
        pose.visibility[static_cast<size_t>(k)] = r.visibility[static_cast<size_t>(k)];
    }
    return pose;
}

PoseModel strip_heatmap_head(const PoseModel& model) {
    PoseModel out = model;
    out.params.erase("hm_head.w");
    out.params.erase("hm_head.b");
    out.params.erase("off_head.w");
    out.params.erase("off_head.b");
    out.stripped = true;
    return out;
}

TrainResult train(PoseModel& model, const std::vector<synth::LoadedSample>& dataset,
                  const TrainOptions& opts) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    model.config.validate();
    if (model.config.num_keypoints != topo::kNumKeypoints)
        throw std::invalid_argument("train: requires the 33-keypoint topology");
    const NetworkConfig& cfg = model.config;
    const int S = cfg.input_size, K = cfg.num_keypoints, H = cfg.heatmap_size;

    AdamOptimizer opt(AdamConfig{.lr = opts.lr});
    std::mt19937_64 rng(opts.seed ^ 0x7261696e5f726e67ull);
    std::vector<size_t> perm(dataset.size());
    std::iota(perm.begin(), perm.end(), size_t{0});

    TrainResult result;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        if (opts.epochs > 1) {
            const double progress = static_cast<double>(epoch) / (opts.epochs - 1);
            const double lo = opts.lr * opts.final_lr_frac;
            opt.set_lr(static_cast<float>(lo + (opts.lr - lo) * 0.5 *
                                                   (1.0 + std::cos(M_PI * progress))));
        }
        std::shuffle(perm.begin(), perm.end(), rng);
        double loss_sum = 0.0;
        int batch_count = 0;
        for (size_t start = 0; start < perm.size(); start += static_cast<size_t>(opts.batch_size)) {
            const int B = static_cast<int>(
                std::min(perm.size() - start, static_cast<size_t>(opts.batch_size)));
            Tensor<float> input({B, 3, S, S});
            Tensor<float> hm_t({B, K, H, H}), hm_m({B, K, H, H});
            Tensor<float> off_t({B, 2 * K, H, H}), off_m({B, 2 * K, H, H});
            Tensor<float> coord_t({B, 2 * K}), coord_m({B, 2 * K});
            Tensor<float> vis_t({B, K});

            for (int b = 0; b < B; ++b) {
                const auto& s = dataset[perm[start + static_cast<size_t>(b)]];
                Roi roi = pose_to_roi(s.pose, opts.roi_padding);
                roi = jitter_roi(roi, rng, opts.jitter_scale, opts.jitter_shift);
                Image crop = crop_image(s.image, roi, S);
                const SimilarityTransform to_crop = invert(roi_to_transform(roi, S));
                Pose crop_pose = transform_pose(s.pose, to_crop);  // crop pixel coords
                const auto occ = occlude(crop, crop_pose, rng, opts.aug_occlusion);

                std::vector<Point2> coords(static_cast<size_t>(K));
                std::vector<float> vis(static_cast<size_t>(K));
                for (int k = 0; k < K; ++k) {
                    const Point2 cn = crop_pose.points[static_cast<size_t>(k)] * (1.0 / S);
                    coords[static_cast<size_t>(k)] = cn;
                    const bool in_crop = cn.x >= 0 && cn.x <= 1 && cn.y >= 0 && cn.y <= 1;
                    vis[static_cast<size_t>(k)] =
                        (s.pose.visibility[static_cast<size_t>(k)] > 0.5 &&
                         occ[static_cast<size_t>(k)] > 0.5f && in_crop)
                            ? 1.0f
                            : 0.0f;
                }
                const HeatmapTargets tg = heatmap_targets(coords, vis, H, cfg.heatmap_sigma);

                const Tensor<float> ct = image_to_tensor(crop);
                std::copy(ct.data(), ct.data() + ct.size(),
                          input.data() + static_cast<int64_t>(b) * ct.size());
                std::copy(tg.heatmap.data(), tg.heatmap.data() + tg.heatmap.size(),
                          hm_t.data() + static_cast<int64_t>(b) * tg.heatmap.size());
                std::copy(tg.heatmap_mask.data(), tg.heatmap_mask.data() + tg.heatmap_mask.size(),
                          hm_m.data() + static_cast<int64_t>(b) * tg.heatmap_mask.size());
                std::copy(tg.offsets.data(), tg.offsets.data() + tg.offsets.size(),
                          off_t.data() + static_cast<int64_t>(b) * tg.offsets.size());
                std::copy(tg.offset_mask.data(), tg.offset_mask.data() + tg.offset_mask.size(),
                          off_m.data() + static_cast<int64_t>(b) * tg.offset_mask.size());
                for (int k = 0; k < K; ++k) {
                    coord_t[static_cast<int64_t>(b) * 2 * K + 2 * k] =
                        static_cast<float>(coords[static_cast<size_t>(k)].x);
                    coord_t[static_cast<int64_t>(b) * 2 * K + 2 * k + 1] =
                        static_cast<float>(coords[static_cast<size_t>(k)].y);
                    coord_m[static_cast<int64_t>(b) * 2 * K + 2 * k] = vis[static_cast<size_t>(k)];
                    coord_m[static_cast<int64_t>(b) * 2 * K + 2 * k + 1] =
                        vis[static_cast<size_t>(k)];
                    vis_t[static_cast<int64_t>(b) * K + k] = vis[static_cast<size_t>(k)];
                }
            }

            Graph<float> g;
            const int in = g.input(std::move(input));
            const auto heads = build_network(g, cfg, model.params, in, !model.stripped);
            const int loss = total_loss(g, cfg, heads, g.input(std::move(hm_t)),
                                        g.input(std::move(hm_m)), g.input(std::move(off_t)),
                                        g.input(std::move(off_m)), g.input(std::move(coord_t)),
                                        g.input(std::move(coord_m)), g.input(std::move(vis_t)));
            g.backward(loss);
            std::map<std::string, Tensor<float>> grads;
            for (int id = 0; id < g.num_nodes(); ++id) {
                const auto& n = g.node(id);
                if (n.op == Graph<float>::Op::Parameter) grads.emplace(n.name, n.grad);
            }
            opt.step(model.params, grads);
            loss_sum += g.value(loss)[0];
            ++batch_count;
        }
        EpochStats stats{epoch + 1, loss_sum / std::max(1, batch_count), -1.0};
        if (opts.heldout_metric) stats.heldout_pck = opts.heldout_metric(model);
        result.curve.push_back(stats);
    }
    return result;
}

}  // namespace posekit
