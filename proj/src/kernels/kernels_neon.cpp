// NEON variants for aarch64. The trilinear row sampler stays scalar here;
// the gather-heavy inner loop does not map well onto NEON.

#include "lncade/kernels/kernels.hpp"

#if defined(LNCADE_HAVE_NEON)

#include <arm_neon.h>

namespace lncade::kernels {

namespace {

void sample_line_neon(const GridView& g, const double org[3], const double step[3],
                      std::size_t n, float* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        out[i] = static_cast<float>(trilinear_point(g, org[0] + t * step[0],
                                                    org[1] + t * step[1],
                                                    org[2] + t * step[2]));
    }
}

void window01_neon(const float* hu, std::size_t n, float lo, float hi, float* out) {
    const float inv_s = 1.0f / (hi - lo);
    const float32x4_t vlo = vdupq_n_f32(lo);
    const float32x4_t vinv = vdupq_n_f32(inv_s);
    const float32x4_t zero = vdupq_n_f32(0.0f);
    const float32x4_t one = vdupq_n_f32(1.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        float32x4_t v = vmulq_f32(vsubq_f32(vld1q_f32(hu + i), vlo), vinv);
        v = vminq_f32(vmaxq_f32(v, zero), one);
        vst1q_f32(out + i, v);
    }
    for (; i < n; ++i) {
        const float v = (hu[i] - lo) * inv_s;
        out[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    }
}

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double tail = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; i < n; ++i) tail += a[i] * b[i];
    return tail;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void relu_neon(const double* x, double* y, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vmaxq_f64(vld1q_f64(x + i), zero));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_neon(const double* pre, const double* grad_out, double* grad_in,
                        std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const uint64x2_t keep = vcgtq_f64(vld1q_f64(pre + i), zero);
        const float64x2_t g = vld1q_f64(grad_out + i);
        vst1q_f64(grad_in + i,
                  vreinterpretq_f64_u64(vandq_u64(keep, vreinterpretq_u64_f64(g))));
    }
    for (; i < n; ++i) grad_in[i] = pre[i] > 0.0 ? grad_out[i] : 0.0;
}

constexpr Kernels kNeon{
    "neon",    sample_line_neon, window01_neon, dot_neon,
    axpy_neon, relu_neon,        relu_backward_neon,
};

}  // namespace

const Kernels& neon_kernels() { return kNeon; }

}  // namespace lncade::kernels

#endif  // LNCADE_HAVE_NEON
