#include "lncade/cnn/architecture.hpp"

#include <sstream>

#include "lncade/errors.hpp"

namespace lncade::cnn {

std::vector<TensorShape> Architecture::layer_output_shapes() const {
    if (input.channels <= 0 || input.height <= 0 || input.width <= 0)
        throw DataError("architecture input shape must be positive");
    std::vector<TensorShape> shapes;
    shapes.reserve(layers.size());
    TensorShape cur = input;
    bool flattened = false;

    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerSpec& spec = layers[l];
        if (std::holds_alternative<ConvSpec>(spec)) {
            const auto& c = std::get<ConvSpec>(spec);
            if (flattened) throw DataError("conv layer after flattening");
            if (c.out_channels <= 0 || c.kernel <= 0)
                throw DataError("conv layer needs positive filters and kernel");
            if (cur.height < c.kernel || cur.width < c.kernel)
                throw DataError("conv kernel larger than its input");
            cur = {c.out_channels, cur.height - c.kernel + 1, cur.width - c.kernel + 1};
        } else if (std::holds_alternative<MaxPoolSpec>(spec)) {
            const auto& p = std::get<MaxPoolSpec>(spec);
            if (flattened) throw DataError("pool layer after flattening");
            if (p.size <= 1) throw DataError("pool size must be >= 2");
            if (cur.height % p.size != 0 || cur.width % p.size != 0)
                throw DataError("pool size must divide the spatial dims");
            cur = {cur.channels, cur.height / p.size, cur.width / p.size};
        } else if (std::holds_alternative<FcSpec>(spec)) {
            const int units = std::get<FcSpec>(spec).units;
            if (units <= 0) throw DataError("fc layer needs positive units");
            cur = {units, 1, 1};
            flattened = true;
        } else if (std::holds_alternative<DropConnectFcSpec>(spec)) {
            const auto& d = std::get<DropConnectFcSpec>(spec);
            if (d.units <= 0) throw DataError("dropconnect fc layer needs positive units");
            if (!(d.rate >= 0.0) || !(d.rate < 1.0))
                throw DataError("dropconnect rate must be in [0, 1)");
            cur = {d.units, 1, 1};
            flattened = true;
        }
        // relu / softmax keep the shape
        if (cur.count() <= 0) throw DataError("layer produces an empty tensor");
        shapes.push_back(cur);
    }
    return shapes;
}

void Architecture::validate() const {
    if (layers.empty()) throw DataError("architecture has no layers");
    const auto shapes = layer_output_shapes();
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        if (std::holds_alternative<SoftmaxSpec>(layers[l]))
            throw DataError("softmax must be the final layer");
    }
    if (!std::holds_alternative<SoftmaxSpec>(layers.back()))
        throw DataError("architecture must end in a softmax layer");
    if (shapes.back().count() != 2)
        throw DataError("classifier must produce exactly 2 logits");
}

std::string Architecture::describe() const {
    std::ostringstream os;
    os << "input " << input.channels << "x" << input.height << "x" << input.width;
    for (const auto& spec : layers) {
        os << " -> ";
        if (const auto* c = std::get_if<ConvSpec>(&spec))
            os << "conv(" << c->out_channels << "," << c->kernel << "x" << c->kernel << ")";
        else if (std::holds_alternative<ReluSpec>(spec))
            os << "relu";
        else if (const auto* p = std::get_if<MaxPoolSpec>(&spec))
            os << "maxpool(" << p->size << ")";
        else if (const auto* f = std::get_if<FcSpec>(&spec))
            os << "fc(" << f->units << ")";
        else if (const auto* d = std::get_if<DropConnectFcSpec>(&spec))
            os << "dropconnect_fc(" << d->units << ",rate=" << d->rate << ")";
        else
            os << "softmax";
    }
    return os.str();
}

Architecture Architecture::standard(int patch_pixels, double dropconnect_rate) {
    Architecture a;
    a.input = {3, patch_pixels, patch_pixels};
    a.layers = {
        ConvSpec{16, 5}, ReluSpec{}, MaxPoolSpec{2},
        ConvSpec{32, 5}, ReluSpec{}, MaxPoolSpec{2},
        FcSpec{64},      ReluSpec{},
        DropConnectFcSpec{2, dropconnect_rate},
        SoftmaxSpec{},
    };
    return a;
}

}  // namespace lncade::cnn
