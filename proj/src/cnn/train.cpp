#include "lncade/cnn/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "lncade/errors.hpp"

namespace lncade::cnn {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw DataError("learning_rate must be positive");
    if (!(momentum >= 0.0) || momentum >= 1.0) throw DataError("momentum must be in [0, 1)");
    if (batch_size < 1) throw DataError("batch_size must be >= 1");
    if (epochs < 1) throw DataError("epochs must be >= 1");
    if (!(dropconnect_rate >= 0.0) || dropconnect_rate >= 1.0)
        throw DataError("dropconnect_rate must be in [0, 1)");
    if (!(weight_init_stddev >= 0.0)) throw DataError("weight_init_stddev must be >= 0");
}

namespace {

void draw_masks_into(const Architecture& arch, const std::vector<TensorShape>& shapes, Rng& rng,
                     MaskSet& masks) {
    masks.resize(arch.layers.size());
    TensorShape in = arch.input;
    for (std::size_t l = 0; l < arch.layers.size(); ++l) {
        if (const auto* d = std::get_if<DropConnectFcSpec>(&arch.layers[l])) {
            const double keep_p = 1.0 - d->rate;
            DropMask& mask = masks[l];
            mask.scale = 1.0 / keep_p;
            mask.keep.resize(static_cast<std::size_t>(d->units) * in.count());
            for (auto& keep : mask.keep) keep = rng.next_double() < keep_p ? 1 : 0;
        } else {
            masks[l].keep.clear();
        }
        in = shapes[l];
    }
}

}  // namespace

TrainResult train(const PatchDataset& data, std::span<const std::size_t> sample_indices,
                  const Architecture& arch, const TrainConfig& config) {
    config.validate();

    Architecture a = arch;
    for (auto& spec : a.layers) {
        if (auto* d = std::get_if<DropConnectFcSpec>(&spec)) d->rate = config.dropconnect_rate;
    }
    a.validate();
    if (a.input.channels != 3 || a.input.height != data.patch_pixels ||
        a.input.width != data.patch_pixels)
        throw DataError("architecture input does not match patch size " +
                        std::to_string(data.patch_pixels));

    std::vector<std::size_t> order;
    if (sample_indices.empty()) {
        order.resize(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
    } else {
        order.assign(sample_indices.begin(), sample_indices.end());
        for (std::size_t i : order)
            if (i >= data.size()) throw DataError("training sample index out of range");
    }
    if (order.empty()) throw DataError("training set is empty");

    std::size_t positives = 0;
    for (std::size_t i : order) positives += data.labels[i] ? 1 : 0;
    if (positives == 0 || positives == order.size())
        throw DataError("training requires at least one example of each class");

    Rng rng(config.seed);
    Model model = init_model(a, config.weight_init_stddev, rng);
    ParamSet velocity = zero_params_like(model);
    ParamSet grads = zero_params_like(model);
    const auto shapes = a.layer_output_shapes();

    ForwardContext ctx;
    BackwardScratch scratch;
    MaskSet masks;
    const std::size_t n = order.size();
    const std::size_t rec_floats = data.record_floats();

    TrainResult result;
    result.log.reserve(static_cast<std::size_t>(config.epochs));

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        // seeded Fisher-Yates shuffle
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = rng.below(i + 1);
            std::swap(order[i], order[j]);
        }

        double loss_sum = 0.0;
        std::size_t correct = 0;

        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t batch_n =
                std::min(static_cast<std::size_t>(config.batch_size), n - start);
            for (auto& g : grads) {
                std::fill(g.w.begin(), g.w.end(), 0.0);
                std::fill(g.b.begin(), g.b.end(), 0.0);
            }

            for (std::size_t i = 0; i < batch_n; ++i) {
                const std::size_t rec = order[start + i];
                const std::span<const float> patch{data.pixels.data() + rec * rec_floats,
                                                   rec_floats};
                const int label = data.labels[rec] ? 1 : 0;
                draw_masks_into(a, shapes, rng, masks);
                const auto probs = forward(model, patch, &masks, ctx);
                const double loss = backward(model, ctx, label, grads, scratch);
                if (!std::isfinite(loss))
                    throw NumericError("training loss is non-finite at epoch " +
                                       std::to_string(epoch) +
                                       "; lower the learning rate");
                loss_sum += loss;
                correct += (probs[1] > probs[0] ? 1 : 0) == label ? 1 : 0;
            }

            const double inv_batch = 1.0 / static_cast<double>(batch_n);
            for (std::size_t l = 0; l < model.params.size(); ++l) {
                auto& p = model.params[l];
                auto& v = velocity[l];
                const auto& g = grads[l];
                for (std::size_t i = 0; i < p.w.size(); ++i) {
                    v.w[i] = config.momentum * v.w[i] - config.learning_rate * g.w[i] * inv_batch;
                    p.w[i] += v.w[i];
                }
                for (std::size_t i = 0; i < p.b.size(); ++i) {
                    v.b[i] = config.momentum * v.b[i] - config.learning_rate * g.b[i] * inv_batch;
                    p.b[i] += v.b[i];
                }
            }
        }

        result.log.push_back({epoch, loss_sum / static_cast<double>(n),
                              static_cast<double>(correct) / static_cast<double>(n)});
    }

    result.model = std::move(model);
    return result;
}

TrainResult train(const PatchDataset& data, const Architecture& arch,
                  const TrainConfig& config) {
    return train(data, {}, arch, config);
}

void save_train_log(const std::vector<EpochStats>& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write training log: " + path.string());
    out << "epoch,mean_loss,train_accuracy\n";
    char buf[128];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", e.epoch, e.mean_loss,
                      e.train_accuracy);
        out << buf;
    }
    if (!out) throw DataError("failed writing training log: " + path.string());
}

}  // namespace lncade::cnn
