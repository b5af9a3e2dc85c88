#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "posekit/graph.hpp"
#include "posekit/synthdata.hpp"

namespace posekit {

struct NetworkConfig {
    int input_size = 64;
    int num_keypoints = 33;
    int base_channels = 16;
    int heatmap_size = 16;       // input_size / 4
    float heatmap_sigma = 2.0f;  // cells, at heatmap resolution
    float heatmap_weight = 1.0f;
    float offset_weight = 1.0f;
    float regression_weight = 1.0f;
    float visibility_weight = 1.0f;
    std::string preset = "full-toy";

    static NetworkConfig full_toy();
    static NetworkConfig lite_toy();  // half the channels, same layout
    void validate() const;
};

struct PoseModel {
    NetworkConfig config;
    std::map<std::string, Tensor<float>> params;
    bool stripped = false;

    int64_t parameter_count() const;
};

/// Fresh parameters, He-normal conv weights, zero-initialized output heads so
/// an untrained network predicts the crop center.
PoseModel init_model(const NetworkConfig& cfg, uint64_t seed);

/// Writes the PKT1 checkpoint at `path` plus a `<path>.json` config sidecar.
void save_model(const std::string& path, const PoseModel& model);
PoseModel load_model(const std::string& path);

nlohmann::json config_to_json(const NetworkConfig& cfg);
/// Strict: unknown keys are an error. A "preset" key selects the baseline the
/// remaining keys override.
NetworkConfig config_from_json(const nlohmann::json& j);

template <typename T>
struct NetworkHeads {
    int heatmaps = -1;    // [N, K, H, H] logits (training heads only)
    int offsets = -1;     // [N, 2K, H, H]
    int coords = -1;      // [N, 2K], crop-normalized, 0.5-centered
    int vis_logits = -1;  // [N, K]
    int decoder = -1;     // decoder output feeding stop_gradient
};

/// Records the full forward pass into `g`. Encoder -> decoder with encoder
/// skip connections -> heatmap/offset heads; a regression encoder consumes
/// the decoder output strictly through stop_gradient plus direct encoder
/// skips, so regression-loss gradients never reach decoder or head weights.
///
/// `frozen_stop`, when given, replaces the stop_gradient node with that
/// constant (the decoder output captured from a nominal pass). The nominal
/// forward is identical, but the loss genuinely loses its dependence on the
/// stopped branch. Finite-difference checks of the gradient-stop invariant
/// need this variant, because perturbing a decoder weight under the real
/// stop node still moves the loss forward (stop_gradient is identity there
/// by design).
template <typename T>
NetworkHeads<T> build_network(Graph<T>& g, const NetworkConfig& cfg,
                              const std::map<std::string, Tensor<T>>& params, int input_node,
                              bool with_train_heads, const Tensor<T>* frozen_stop = nullptr);

/// Parameter shapes for a config, independent of any initialization.
std::map<std::string, std::vector<int>> parameter_shapes(const NetworkConfig& cfg,
                                                         bool with_train_heads = true);

struct HeatmapTargets {
    Tensor<float> heatmap;       // [K, H, H], peak 1 at the nearest cell
    Tensor<float> offsets;       // [2K, H, H], sub-cell displacement in cells
    Tensor<float> heatmap_mask;  // [K, H, H]
    Tensor<float> offset_mask;   // [2K, H, H], 1 within one cell of the peak
};

/// Supervision targets for one sample; keypoints outside [0,1]^2 or with a
/// zero visibility label are fully masked.
HeatmapTargets heatmap_targets(const std::vector<Point2>& coords,
                               const std::vector<float>& visibility, int grid, double sigma);

/// Argmax cell plus its offset, back to crop-normalized coordinates. Works on
/// logits or probabilities (argmax is monotone-invariant).
std::vector<Point2> decode_heatmap(const Tensor<float>& heatmaps, const Tensor<float>& offsets);

struct InferResult {
    std::vector<Point2> coords;      // crop-normalized, may exceed [0,1] off-crop
    std::vector<double> visibility;  // sigmoid, in [0,1]
};

InferResult infer(const PoseModel& model, const Tensor<float>& crop);

struct TrainingForward {
    Tensor<float> heatmaps;  // [K, H, H] logits
    Tensor<float> offsets;   // [2K, H, H]
    InferResult regression;
};

/// Single-crop forward pass with the training heads attached; for diagnostics
/// and tests. Throws on a stripped model.
TrainingForward forward_training(const PoseModel& model, const Tensor<float>& crop);

/// Crop via `roi`, run the network, and map the prediction back to image
/// coordinates through the exact inverse of the crop transform.
Pose predict_pose(const PoseModel& model, const Image& image, const Roi& roi);

struct TrainOptions {
    int epochs = 12;
    int batch_size = 16;
    float lr = 1e-3f;
    float final_lr_frac = 0.05f;  // cosine decay from lr down to lr * this
    uint64_t seed = 0;
    double roi_padding = kDefaultRoiPadding;
    double jitter_scale = 0.10;
    double jitter_shift = 0.10;
    synth::OcclusionConfig aug_occlusion{2, 0.10, 0.35};
    // optional per-epoch metric on held-out data (e.g. PCK@0.2)
    std::function<double(const PoseModel&)> heldout_metric;
};

struct EpochStats {
    int epoch;
    double train_loss;
    double heldout_pck;  // -1 when no metric is attached
};

struct TrainResult {
    std::vector<EpochStats> curve;
};

/// Deterministic under a fixed seed. Applies ROI jitter and occlusion
/// augmentation per sample per epoch.
TrainResult train(PoseModel& model, const std::vector<synth::LoadedSample>& dataset,
                  const TrainOptions& opts);

/// Removes the heatmap and offset heads. Regression outputs are unaffected;
/// parameter count strictly decreases.
PoseModel strip_heatmap_head(const PoseModel& model);

/// Crop-space training sample -> loss node (shared by train() and tests).
template <typename T>
int total_loss(Graph<T>& g, const NetworkConfig& cfg, const NetworkHeads<T>& heads,
               int heatmap_t, int heatmap_mask, int offset_t, int offset_mask, int coord_t,
               int coord_mask, int vis_t);

// --- template definitions -------------------------------------------------

template <typename T>
NetworkHeads<T> build_network(Graph<T>& g, const NetworkConfig& cfg,
                              const std::map<std::string, Tensor<T>>& params, int input_node,
                              bool with_train_heads, const Tensor<T>* frozen_stop) {
    cfg.validate();
    auto P = [&](const std::string& name) {
        auto it = params.find(name);
        if (it == params.end())
            throw std::invalid_argument("build_network: missing parameter " + name);
        return g.parameter(name, it->second);
    };
    auto conv_block = [&](int x, const std::string& name, int stride) {
        return g.relu(g.bias_add(g.conv2d(x, P(name + ".w"), stride), P(name + ".b")));
    };

    // encoder, stride-2 stages: S/2, S/4, S/8, S/16
    const int e1 = conv_block(input_node, "enc1", 2);
    const int e2 = conv_block(e1, "enc2", 2);  // heatmap resolution
    const int e3 = conv_block(e2, "enc3", 2);
    const int e4 = conv_block(e3, "enc4", 2);

    // decoder back to heatmap resolution, with encoder skips
    const int d3 = conv_block(g.concat_channels({g.upsample2x(e4), e3}), "dec3", 1);
    const int d2 = conv_block(g.concat_channels({g.upsample2x(d3), e2}), "dec2", 1);

    NetworkHeads<T> heads;
    if (with_train_heads) {
        heads.heatmaps = g.bias_add(g.conv2d(d2, P("hm_head.w"), 1), P("hm_head.b"));
        heads.offsets = g.bias_add(g.conv2d(d2, P("off_head.w"), 1), P("off_head.b"));
    }

    // regression encoder: decoder features pass through stop_gradient, the
    // encoder skips (e2, e3) connect directly
    const int stopped = frozen_stop ? g.input(*frozen_stop) : g.stop_gradient(d2);
    const int r1 = conv_block(g.concat_channels({stopped, e2}), "reg1", 2);
    const int r2 = conv_block(g.concat_channels({r1, e3}), "reg2", 2);
    const int r3 = conv_block(r2, "reg3", 2);

    const auto& rs = g.value(r3).shape();
    const int flat_dim = rs[1] * rs[2] * rs[3];
    const int flat = g.reshape(r3, {rs[0], flat_dim});
    heads.coords = g.affine(g.linear(flat, P("coord_head.w"), P("coord_head.b")), T(1), T(0.5));
    heads.vis_logits = g.linear(flat, P("vis_head.w"), P("vis_head.b"));
    heads.decoder = d2;
    return heads;
}

template <typename T>
int total_loss(Graph<T>& g, const NetworkConfig& cfg, const NetworkHeads<T>& heads,
               int heatmap_t, int heatmap_mask, int offset_t, int offset_mask, int coord_t,
               int coord_mask, int vis_t) {
    int loss = -1;
    auto accumulate = [&](int term, float w) {
        if (w == 0.0f) return;  // skipped entirely: no gradient, no cost
        const int scaled = g.scale(term, T(w));
        loss = loss < 0 ? scaled : g.add(loss, scaled);
    };
    if (heads.heatmaps >= 0)
        accumulate(g.masked_bce_loss(heads.heatmaps, heatmap_t, heatmap_mask), cfg.heatmap_weight);
    if (heads.offsets >= 0)
        accumulate(g.masked_mse_loss(heads.offsets, offset_t, offset_mask), cfg.offset_weight);
    accumulate(g.masked_mse_loss(heads.coords, coord_t, coord_mask), cfg.regression_weight);
    accumulate(g.bce_loss(heads.vis_logits, vis_t), cfg.visibility_weight);
    if (loss < 0) throw std::invalid_argument("total_loss: all loss weights are zero");
    return loss;
}

}  // namespace posekit
