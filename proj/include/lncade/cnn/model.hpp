#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lncade/cnn/architecture.hpp"
#include "lncade/rng.hpp"

namespace lncade::cnn {

// Weights and biases of one layer; empty for parameterless layers.
// Conv weights: [out_c][in_c][ky][kx]; FC weights: [units][inputs].
struct LayerParams {
    std::vector<double> w;
    std::vector<double> b;
};

using ParamSet = std::vector<LayerParams>;

struct Model {
    Architecture arch;
    ParamSet params;  // parallel to arch.layers

    std::size_t parameter_count() const;
};

// Zero-mean Gaussian weights with the given stddev, zero biases.
Model init_model(const Architecture& arch, double weight_init_stddev, Rng& rng);

// Matching zero-filled parameter set (gradient / momentum buffers).
ParamSet zero_params_like(const Model& m);

// DropConnect masks for one forward/backward pass: one entry per layer,
// empty for layers without DropConnect. keep[i] tells whether weight i
// survives; kept weights are scaled by 1/(1-rate).
struct DropMask {
    std::vector<std::uint8_t> keep;
    double scale = 1.0;
};
using MaskSet = std::vector<DropMask>;

// Fresh Bernoulli(1-rate) masks for every DropConnect layer.
MaskSet draw_masks(const Architecture& arch, Rng& rng);

// Per-sample activations captured by forward() and consumed by backward().
// Reused across samples to avoid reallocation.
struct ForwardContext {
    std::vector<std::vector<double>> inputs;  // inputs[l] = input tensor of layer l
    std::vector<std::vector<double>> im2col;  // conv layers: unrolled input rows
    std::vector<std::vector<int>> pool_argmax;
    std::vector<std::vector<double>> effective_w;  // dropconnect layers: masked weights
    const MaskSet* masks = nullptr;                // masks used (null = inference)
    std::array<double, 2> probs{};
    std::array<double, 2> logits{};
};

// Runs the stack on one patch (float [0,1] values, channel-major planes).
// masks == nullptr is inference mode: deterministic, no dropping. With
// masks, DropConnect layers use masked scaled weights (training mode).
std::array<double, 2> forward(const Model& m, std::span<const float> input,
                              const MaskSet* masks, ForwardContext& ctx);

// Convenience single-shot inference.
std::array<double, 2> forward_inference(const Model& m, std::span<const float> input);

// Probability that the patch is a true node (class 1), inference mode.
double predict(const Model& m, std::span<const float> input);

// Cross-entropy loss -log p(label) for a fixed mask set; used by the
// finite-difference gradient checks.
double loss_with_masks(const Model& m, std::span<const float> input, int label,
                       const MaskSet* masks);

struct BackwardScratch {
    std::vector<std::vector<double>> grad_tensor;  // per-layer activation grads
    std::vector<double> dcol;                      // conv col gradient buffer
};

// Backpropagates the softmax cross-entropy loss through the context
// captured by the immediately preceding forward() call. Parameter
// gradients are accumulated (+=) into `grads`. Returns the sample loss.
double backward(const Model& m, const ForwardContext& ctx, int label, ParamSet& grads,
                BackwardScratch& scratch);

// Versioned little-endian binary with a trailing whole-file checksum.
void save_model(const Model& m, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace lncade::cnn
