#pragma once

#include <string>
#include <variant>
#include <vector>

namespace lncade::cnn {

struct TensorShape {
    int channels = 0, height = 0, width = 0;
    int count() const { return channels * height * width; }
};

// Layers: convolutions are stride-1 with valid padding; max-pooling is
// non-overlapping and requires the spatial dims to divide evenly.
struct ConvSpec {
    int out_channels = 0;
    int kernel = 0;
};
struct ReluSpec {};
struct MaxPoolSpec {
    int size = 2;
};
struct FcSpec {
    int units = 0;
};
// Fully-connected layer whose weights are individually dropped during
// training (DropConnect). Kept weights are scaled by 1/(1-rate) at train
// time so inference uses the raw weights unchanged.
struct DropConnectFcSpec {
    int units = 0;
    double rate = 0.5;
};
struct SoftmaxSpec {};

using LayerSpec =
    std::variant<ConvSpec, ReluSpec, MaxPoolSpec, FcSpec, DropConnectFcSpec, SoftmaxSpec>;

struct Architecture {
    TensorShape input{3, 32, 32};
    std::vector<LayerSpec> layers;

    // Output shape after every layer; throws DataError if any layer is
    // infeasible (kernel larger than input, pool not dividing, zero dims).
    std::vector<TensorShape> layer_output_shapes() const;

    // Full structural check: shapes feasible, softmax exactly once and
    // last, and the stack ends in exactly 2 class logits.
    void validate() const;

    std::string describe() const;

    // Default stack: conv(16,5x5) relu pool2 conv(32,5x5) relu pool2
    // fc(64) relu dropconnect-fc(2, rate) softmax.
    static Architecture standard(int patch_pixels = 32, double dropconnect_rate = 0.5);
};

}  // namespace lncade::cnn
