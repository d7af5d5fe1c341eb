#include "lncade/cnn/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "lncade/errors.hpp"
#include "lncade/kernels/kernels.hpp"

namespace lncade::cnn {

namespace {

std::size_t conv_weight_count(const ConvSpec& c, const TensorShape& in) {
    return static_cast<std::size_t>(c.out_channels) * in.channels * c.kernel * c.kernel;
}

// Unrolls conv input windows into rows of length in_c*k*k, one per output
// pixel, so the convolution becomes plain dot products.
void im2col(const std::vector<double>& in, const TensorShape& s, int kernel, int oh, int ow,
            std::vector<double>& col) {
    const int cols = s.channels * kernel * kernel;
    col.resize(static_cast<std::size_t>(oh) * ow * cols);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double* row = col.data() + (static_cast<std::size_t>(y) * ow + x) * cols;
            for (int ic = 0; ic < s.channels; ++ic) {
                for (int ky = 0; ky < kernel; ++ky) {
                    const double* src =
                        in.data() +
                        (static_cast<std::size_t>(ic) * s.height + y + ky) * s.width + x;
                    std::memcpy(row + (static_cast<std::size_t>(ic) * kernel + ky) * kernel, src,
                                sizeof(double) * kernel);
                }
            }
        }
    }
}

// Scatter-adds col-space gradients back onto the input tensor.
void col2im_add(const std::vector<double>& dcol, const TensorShape& s, int kernel, int oh,
                int ow, std::vector<double>& din) {
    const int cols = s.channels * kernel * kernel;
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double* row = dcol.data() + (static_cast<std::size_t>(y) * ow + x) * cols;
            for (int ic = 0; ic < s.channels; ++ic) {
                for (int ky = 0; ky < kernel; ++ky) {
                    double* dst =
                        din.data() +
                        (static_cast<std::size_t>(ic) * s.height + y + ky) * s.width + x;
                    const double* r = row + (static_cast<std::size_t>(ic) * kernel + ky) * kernel;
                    for (int kx = 0; kx < kernel; ++kx) dst[kx] += r[kx];
                }
            }
        }
    }
}

void softmax2(const std::array<double, 2>& logits, std::array<double, 2>& probs) {
    const double m = logits[0] > logits[1] ? logits[0] : logits[1];
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    const double inv = 1.0 / (e0 + e1);
    probs[0] = e0 * inv;
    probs[1] = e1 * inv;
}

}  // namespace

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.w.size() + p.b.size();
    return n;
}

Model init_model(const Architecture& arch, double weight_init_stddev, Rng& rng) {
    arch.validate();
    const auto shapes = arch.layer_output_shapes();

    Model m;
    m.arch = arch;
    m.params.resize(arch.layers.size());
    TensorShape in = arch.input;
    for (std::size_t l = 0; l < arch.layers.size(); ++l) {
        LayerParams& p = m.params[l];
        if (const auto* c = std::get_if<ConvSpec>(&arch.layers[l])) {
            p.w.resize(conv_weight_count(*c, in));
            p.b.assign(static_cast<std::size_t>(c->out_channels), 0.0);
        } else if (const auto* f = std::get_if<FcSpec>(&arch.layers[l])) {
            p.w.resize(static_cast<std::size_t>(f->units) * in.count());
            p.b.assign(static_cast<std::size_t>(f->units), 0.0);
        } else if (const auto* d = std::get_if<DropConnectFcSpec>(&arch.layers[l])) {
            p.w.resize(static_cast<std::size_t>(d->units) * in.count());
            p.b.assign(static_cast<std::size_t>(d->units), 0.0);
        }
        for (double& w : p.w) w = weight_init_stddev * rng.normal();
        in = shapes[l];
    }
    return m;
}

ParamSet zero_params_like(const Model& m) {
    ParamSet z(m.params.size());
    for (std::size_t l = 0; l < m.params.size(); ++l) {
        z[l].w.assign(m.params[l].w.size(), 0.0);
        z[l].b.assign(m.params[l].b.size(), 0.0);
    }
    return z;
}

MaskSet draw_masks(const Architecture& arch, Rng& rng) {
    const auto shapes = arch.layer_output_shapes();
    MaskSet masks(arch.layers.size());
    TensorShape in = arch.input;
    for (std::size_t l = 0; l < arch.layers.size(); ++l) {
        if (const auto* d = std::get_if<DropConnectFcSpec>(&arch.layers[l])) {
            const double keep_p = 1.0 - d->rate;
            DropMask& mask = masks[l];
            mask.scale = 1.0 / keep_p;
            mask.keep.resize(static_cast<std::size_t>(d->units) * in.count());
            for (auto& keep : mask.keep) keep = rng.next_double() < keep_p ? 1 : 0;
        }
        in = shapes[l];
    }
    return masks;
}

std::array<double, 2> forward(const Model& m, std::span<const float> input,
                              const MaskSet* masks, ForwardContext& ctx) {
    const Architecture& arch = m.arch;
    const auto shapes = arch.layer_output_shapes();
    const std::size_t L = arch.layers.size();
    if (static_cast<int>(input.size()) != arch.input.count())
        throw DataError("input shape mismatch: expected " + std::to_string(arch.input.count()) +
                        " values, got " + std::to_string(input.size()));
    if (masks && masks->size() != L) throw DataError("mask set shape mismatch");

    const auto& k = kernels::active();
    ctx.inputs.resize(L + 1);
    ctx.im2col.resize(L);
    ctx.pool_argmax.resize(L);
    ctx.effective_w.resize(L);
    ctx.masks = masks;

    ctx.inputs[0].resize(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) ctx.inputs[0][i] = input[i];

    TensorShape in_shape = arch.input;
    for (std::size_t l = 0; l < L; ++l) {
        const std::vector<double>& x = ctx.inputs[l];
        std::vector<double>& y = ctx.inputs[l + 1];
        const TensorShape out_shape = shapes[l];
        const LayerSpec& spec = arch.layers[l];

        if (const auto* c = std::get_if<ConvSpec>(&spec)) {
            const int oh = out_shape.height, ow = out_shape.width;
            const int cols = in_shape.channels * c->kernel * c->kernel;
            im2col(x, in_shape, c->kernel, oh, ow, ctx.im2col[l]);
            y.resize(static_cast<std::size_t>(out_shape.count()));
            const std::size_t pixels = static_cast<std::size_t>(oh) * ow;
            for (int f = 0; f < c->out_channels; ++f) {
                const double* wf = m.params[l].w.data() + static_cast<std::size_t>(f) * cols;
                const double bias = m.params[l].b[f];
                double* out = y.data() + static_cast<std::size_t>(f) * pixels;
                for (std::size_t pix = 0; pix < pixels; ++pix) {
                    out[pix] = k.dot(wf, ctx.im2col[l].data() + pix * cols,
                                     static_cast<std::size_t>(cols)) +
                               bias;
                }
            }
        } else if (std::holds_alternative<ReluSpec>(spec)) {
            y.resize(x.size());
            k.relu(x.data(), y.data(), x.size());
        } else if (const auto* p = std::get_if<MaxPoolSpec>(&spec)) {
            const int ph = p->size;
            const int oh = out_shape.height, ow = out_shape.width;
            y.resize(static_cast<std::size_t>(out_shape.count()));
            ctx.pool_argmax[l].resize(y.size());
            for (int ch = 0; ch < in_shape.channels; ++ch) {
                const std::size_t plane_off =
                    static_cast<std::size_t>(ch) * in_shape.height * in_shape.width;
                const double* plane = x.data() + plane_off;
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        int best = (oy * ph) * in_shape.width + ox * ph;
                        double best_v = plane[best];
                        for (int dy = 0; dy < ph; ++dy) {
                            for (int dx = 0; dx < ph; ++dx) {
                                const int idx = (oy * ph + dy) * in_shape.width + ox * ph + dx;
                                if (plane[idx] > best_v) {
                                    best_v = plane[idx];
                                    best = idx;
                                }
                            }
                        }
                        const std::size_t o = (static_cast<std::size_t>(ch) * oh + oy) * ow + ox;
                        y[o] = best_v;
                        ctx.pool_argmax[l][o] = static_cast<int>(plane_off) + best;
                    }
                }
            }
        } else if (const auto* f = std::get_if<FcSpec>(&spec)) {
            const std::size_t n_in = x.size();
            y.resize(static_cast<std::size_t>(f->units));
            for (int j = 0; j < f->units; ++j) {
                y[j] = k.dot(m.params[l].w.data() + static_cast<std::size_t>(j) * n_in, x.data(),
                             n_in) +
                       m.params[l].b[j];
            }
        } else if (const auto* d = std::get_if<DropConnectFcSpec>(&spec)) {
            const std::size_t n_in = x.size();
            y.resize(static_cast<std::size_t>(d->units));
            const double* weights = m.params[l].w.data();
            if (masks && !(*masks)[l].keep.empty()) {
                const DropMask& mask = (*masks)[l];
                if (mask.keep.size() != m.params[l].w.size())
                    throw DataError("dropconnect mask shape mismatch");
                std::vector<double>& eff = ctx.effective_w[l];
                eff.resize(m.params[l].w.size());
                for (std::size_t i = 0; i < eff.size(); ++i)
                    eff[i] = mask.keep[i] ? weights[i] * mask.scale : 0.0;
                weights = eff.data();
            } else {
                ctx.effective_w[l].clear();
            }
            for (int j = 0; j < d->units; ++j) {
                y[j] = k.dot(weights + static_cast<std::size_t>(j) * n_in, x.data(), n_in) +
                       m.params[l].b[j];
            }
        } else {  // softmax
            ctx.logits = {x[0], x[1]};
            softmax2(ctx.logits, ctx.probs);
            y.assign(ctx.probs.begin(), ctx.probs.end());
        }
        in_shape = out_shape;
    }
    return ctx.probs;
}

std::array<double, 2> forward_inference(const Model& m, std::span<const float> input) {
    ForwardContext ctx;
    return forward(m, input, nullptr, ctx);
}

double predict(const Model& m, std::span<const float> input) {
    return forward_inference(m, input)[1];
}

double loss_with_masks(const Model& m, std::span<const float> input, int label,
                       const MaskSet* masks) {
    ForwardContext ctx;
    const auto probs = forward(m, input, masks, ctx);
    return -std::log(probs[label]);
}

double backward(const Model& m, const ForwardContext& ctx, int label, ParamSet& grads,
                BackwardScratch& scratch) {
    if (label != 0 && label != 1) throw DataError("label must be 0 or 1");
    const Architecture& arch = m.arch;
    const auto shapes = arch.layer_output_shapes();
    const std::size_t L = arch.layers.size();
    if (grads.size() != L) throw DataError("gradient set shape mismatch");
    const auto& k = kernels::active();

    const double loss = -std::log(ctx.probs[label]);

    // grad_tensor[l] is dLoss/d(input of layer l). The softmax layer and the
    // cross-entropy loss collapse to dLoss/dlogits = probs - onehot.
    scratch.grad_tensor.resize(L);
    {
        std::vector<double>& g = scratch.grad_tensor[L - 1];
        g.resize(2);
        g[0] = ctx.probs[0] - (label == 0 ? 1.0 : 0.0);
        g[1] = ctx.probs[1] - (label == 1 ? 1.0 : 0.0);
    }

    for (std::size_t l = L - 1; l-- > 0;) {
        // layer l: output grad is grad_tensor[l+1], produce grad_tensor[l]
        const std::vector<double>& g_out = scratch.grad_tensor[l + 1];
        std::vector<double>& g_in = scratch.grad_tensor[l];
        const std::vector<double>& x = ctx.inputs[l];
        const TensorShape in_shape = l == 0 ? arch.input : shapes[l - 1];
        const LayerSpec& spec = arch.layers[l];
        const bool need_input_grad = l > 0;

        if (const auto* c = std::get_if<ConvSpec>(&spec)) {
            const TensorShape out_shape = shapes[l];
            const int oh = out_shape.height, ow = out_shape.width;
            const int cols = in_shape.channels * c->kernel * c->kernel;
            const std::size_t pixels = static_cast<std::size_t>(oh) * ow;
            const std::vector<double>& col = ctx.im2col[l];
            LayerParams& g = grads[l];

            for (int f = 0; f < c->out_channels; ++f) {
                const double* gy = g_out.data() + static_cast<std::size_t>(f) * pixels;
                double* gw = g.w.data() + static_cast<std::size_t>(f) * cols;
                double bias_sum = 0.0;
                for (std::size_t pix = 0; pix < pixels; ++pix) {
                    bias_sum += gy[pix];
                    if (gy[pix] != 0.0)
                        k.axpy(gy[pix], col.data() + pix * cols, gw,
                               static_cast<std::size_t>(cols));
                }
                g.b[f] += bias_sum;
            }

            if (need_input_grad) {
                scratch.dcol.assign(pixels * static_cast<std::size_t>(cols), 0.0);
                for (int f = 0; f < c->out_channels; ++f) {
                    const double* gy = g_out.data() + static_cast<std::size_t>(f) * pixels;
                    const double* wf = m.params[l].w.data() + static_cast<std::size_t>(f) * cols;
                    for (std::size_t pix = 0; pix < pixels; ++pix) {
                        if (gy[pix] != 0.0)
                            k.axpy(gy[pix], wf, scratch.dcol.data() + pix * cols,
                                   static_cast<std::size_t>(cols));
                    }
                }
                g_in.assign(x.size(), 0.0);
                col2im_add(scratch.dcol, in_shape, c->kernel, oh, ow, g_in);
            }
        } else if (std::holds_alternative<ReluSpec>(spec)) {
            if (need_input_grad) {
                g_in.resize(x.size());
                k.relu_backward(x.data(), g_out.data(), g_in.data(), x.size());
            }
        } else if (std::holds_alternative<MaxPoolSpec>(spec)) {
            if (need_input_grad) {
                g_in.assign(x.size(), 0.0);
                const auto& argmax = ctx.pool_argmax[l];
                for (std::size_t o = 0; o < g_out.size(); ++o) g_in[argmax[o]] += g_out[o];
            }
        } else if (const auto* f = std::get_if<FcSpec>(&spec)) {
            const std::size_t n_in = x.size();
            LayerParams& g = grads[l];
            if (need_input_grad) g_in.assign(n_in, 0.0);
            for (int j = 0; j < f->units; ++j) {
                const double gj = g_out[j];
                g.b[j] += gj;
                k.axpy(gj, x.data(), g.w.data() + static_cast<std::size_t>(j) * n_in, n_in);
                if (need_input_grad)
                    k.axpy(gj, m.params[l].w.data() + static_cast<std::size_t>(j) * n_in,
                           g_in.data(), n_in);
            }
        } else if (const auto* d = std::get_if<DropConnectFcSpec>(&spec)) {
            const std::size_t n_in = x.size();
            LayerParams& g = grads[l];
            const bool masked = ctx.masks && !(*ctx.masks)[l].keep.empty();
            const DropMask* mask = masked ? &(*ctx.masks)[l] : nullptr;
            if (need_input_grad) g_in.assign(n_in, 0.0);
            for (int j = 0; j < d->units; ++j) {
                const double gj = g_out[j];
                g.b[j] += gj;
                if (mask) {
                    const std::uint8_t* keep =
                        mask->keep.data() + static_cast<std::size_t>(j) * n_in;
                    double* gw = g.w.data() + static_cast<std::size_t>(j) * n_in;
                    const double scaled = gj * mask->scale;
                    for (std::size_t i = 0; i < n_in; ++i)
                        if (keep[i]) gw[i] += scaled * x[i];
                    if (need_input_grad)
                        k.axpy(gj,
                               ctx.effective_w[l].data() + static_cast<std::size_t>(j) * n_in,
                               g_in.data(), n_in);
                } else {
                    k.axpy(gj, x.data(), g.w.data() + static_cast<std::size_t>(j) * n_in, n_in);
                    if (need_input_grad)
                        k.axpy(gj, m.params[l].w.data() + static_cast<std::size_t>(j) * n_in,
                               g_in.data(), n_in);
                }
            }
        }
        // softmax cannot appear here (validate() pins it to the last layer)
    }
    return loss;
}

void save_model(const Model& m, const std::filesystem::path& path) {
    m.arch.validate();
    std::string buf;
    buf.reserve(1024 + m.parameter_count() * sizeof(double));
    const auto put = [&buf](const void* p, std::size_t n) {
        buf.append(static_cast<const char*>(p), n);
    };
    const auto put_u32 = [&](std::uint32_t v) { put(&v, sizeof(v)); };
    const auto put_u64 = [&](std::uint64_t v) { put(&v, sizeof(v)); };
    const auto put_f64 = [&](double v) { put(&v, sizeof(v)); };

    buf.append("LNCNN\0\0\0", 8);
    put_u32(1);  // version
    put_u32(static_cast<std::uint32_t>(m.arch.input.channels));
    put_u32(static_cast<std::uint32_t>(m.arch.input.height));
    put_u32(static_cast<std::uint32_t>(m.arch.input.width));
    put_u32(static_cast<std::uint32_t>(m.arch.layers.size()));
    for (const auto& spec : m.arch.layers) {
        if (const auto* c = std::get_if<ConvSpec>(&spec)) {
            put_u32(0);
            put_u32(static_cast<std::uint32_t>(c->out_channels));
            put_u32(static_cast<std::uint32_t>(c->kernel));
        } else if (std::holds_alternative<ReluSpec>(spec)) {
            put_u32(1);
        } else if (const auto* p = std::get_if<MaxPoolSpec>(&spec)) {
            put_u32(2);
            put_u32(static_cast<std::uint32_t>(p->size));
        } else if (const auto* f = std::get_if<FcSpec>(&spec)) {
            put_u32(3);
            put_u32(static_cast<std::uint32_t>(f->units));
        } else if (const auto* d = std::get_if<DropConnectFcSpec>(&spec)) {
            put_u32(4);
            put_u32(static_cast<std::uint32_t>(d->units));
            put_f64(d->rate);
        } else {
            put_u32(5);
        }
    }
    for (const auto& p : m.params) {
        put_u64(p.w.size());
        put(p.w.data(), p.w.size() * sizeof(double));
        put_u64(p.b.size());
        put(p.b.data(), p.b.size() * sizeof(double));
    }

    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : buf) h = (h ^ ch) * 1099511628211ULL;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write model file: " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.write(reinterpret_cast<const char*>(&h), sizeof(h));
    if (!out) throw DataError("failed writing model file: " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("cannot open model file: " + path.string());
    const std::streamsize total = in.tellg();
    if (total < static_cast<std::streamsize>(8 + sizeof(std::uint64_t)))
        throw DataError("truncated model file: " + path.string());
    in.seekg(0);
    std::string buf(static_cast<std::size_t>(total) - sizeof(std::uint64_t), '\0');
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    std::uint64_t stored = 0;
    in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    if (!in) throw DataError("truncated model file: " + path.string());

    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : buf) h = (h ^ ch) * 1099511628211ULL;
    if (h != stored) throw DataError("model file checksum mismatch: " + path.string());

    std::size_t pos = 0;
    const auto get = [&](void* p, std::size_t n) {
        if (pos + n > buf.size()) throw DataError("corrupt model file: " + path.string());
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    };
    const auto get_u32 = [&]() {
        std::uint32_t v = 0;
        get(&v, sizeof(v));
        return v;
    };
    const auto get_u64 = [&]() {
        std::uint64_t v = 0;
        get(&v, sizeof(v));
        return v;
    };
    const auto get_f64 = [&]() {
        double v = 0;
        get(&v, sizeof(v));
        return v;
    };

    char magic[8];
    get(magic, sizeof(magic));
    if (std::memcmp(magic, "LNCNN\0\0\0", 8) != 0)
        throw DataError("not a model file: " + path.string());
    if (get_u32() != 1) throw DataError("unsupported model version: " + path.string());

    Model m;
    m.arch.input.channels = static_cast<int>(get_u32());
    m.arch.input.height = static_cast<int>(get_u32());
    m.arch.input.width = static_cast<int>(get_u32());
    const std::uint32_t n_layers = get_u32();
    if (n_layers > 256) throw DataError("corrupt model file: " + path.string());
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        switch (get_u32()) {
            case 0: {
                ConvSpec c;
                c.out_channels = static_cast<int>(get_u32());
                c.kernel = static_cast<int>(get_u32());
                m.arch.layers.emplace_back(c);
                break;
            }
            case 1:
                m.arch.layers.emplace_back(ReluSpec{});
                break;
            case 2:
                m.arch.layers.emplace_back(MaxPoolSpec{static_cast<int>(get_u32())});
                break;
            case 3:
                m.arch.layers.emplace_back(FcSpec{static_cast<int>(get_u32())});
                break;
            case 4: {
                DropConnectFcSpec d;
                d.units = static_cast<int>(get_u32());
                d.rate = get_f64();
                m.arch.layers.emplace_back(d);
                break;
            }
            case 5:
                m.arch.layers.emplace_back(SoftmaxSpec{});
                break;
            default:
                throw DataError("unknown layer tag in model file: " + path.string());
        }
    }
    m.arch.validate();

    m.params.resize(n_layers);
    for (auto& p : m.params) {
        p.w.resize(get_u64());
        get(p.w.data(), p.w.size() * sizeof(double));
        p.b.resize(get_u64());
        get(p.b.data(), p.b.size() * sizeof(double));
    }
    if (pos != buf.size()) throw DataError("trailing bytes in model file: " + path.string());

    // parameter shapes must agree with the declared architecture
    Rng probe(0);
    const Model reference = init_model(m.arch, 0.0, probe);
    for (std::uint32_t l = 0; l < n_layers; ++l) {
        if (m.params[l].w.size() != reference.params[l].w.size() ||
            m.params[l].b.size() != reference.params[l].b.size())
            throw DataError("model parameter shapes disagree with architecture: " +
                            path.string());
    }
    for (const auto& p : m.params) {
        for (double v : p.w)
            if (!std::isfinite(v)) throw DataError("non-finite model weight: " + path.string());
        for (double v : p.b)
            if (!std::isfinite(v)) throw DataError("non-finite model bias: " + path.string());
    }
    return m;
}

}  // namespace lncade::cnn
