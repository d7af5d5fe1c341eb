#include "lncade/kernels/kernels.hpp"

#include <algorithm>
#include <atomic>

namespace lncade::kernels {

#if defined(LNCADE_HAVE_AVX2)
const Kernels& avx2_kernels();
#endif
#if defined(LNCADE_HAVE_NEON)
const Kernels& neon_kernels();
#endif

namespace {

void sample_line_scalar(const GridView& g, const double org[3], const double step[3],
                        std::size_t n, float* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i);
        out[i] = static_cast<float>(trilinear_point(g, org[0] + t * step[0],
                                                    org[1] + t * step[1],
                                                    org[2] + t * step[2]));
    }
}

void window01_scalar(const float* hu, std::size_t n, float lo, float hi, float* out) {
    const float inv = 1.0f / (hi - lo);
    for (std::size_t i = 0; i < n; ++i) {
        const float v = (hu[i] - lo) * inv;
        out[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void relu_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(const double* pre, const double* grad_out, double* grad_in,
                          std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) grad_in[i] = pre[i] > 0.0 ? grad_out[i] : 0.0;
}

constexpr Kernels kScalar{
    "scalar",        sample_line_scalar, window01_scalar,
    dot_scalar,      axpy_scalar,        relu_scalar,
    relu_backward_scalar,
};

const Kernels* detect_best() {
#if defined(LNCADE_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &avx2_kernels();
#endif
#if defined(LNCADE_HAVE_NEON)
    return &neon_kernels();
#endif
    return &kScalar;
}

std::atomic<const Kernels*>& active_slot() {
    static std::atomic<const Kernels*> slot{detect_best()};
    return slot;
}

}  // namespace

const Kernels& scalar_kernels() { return kScalar; }

const Kernels& active() { return *active_slot().load(std::memory_order_relaxed); }

bool select_isa(const std::string& name) {
    if (name == "scalar") {
        active_slot().store(&kScalar, std::memory_order_relaxed);
        return true;
    }
#if defined(LNCADE_HAVE_AVX2)
    if (name == "avx2" && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        active_slot().store(&avx2_kernels(), std::memory_order_relaxed);
        return true;
    }
#endif
#if defined(LNCADE_HAVE_NEON)
    if (name == "neon") {
        active_slot().store(&neon_kernels(), std::memory_order_relaxed);
        return true;
    }
#endif
    return false;
}

std::vector<std::string> available_isas() {
    std::vector<std::string> isas{"scalar"};
#if defined(LNCADE_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) isas.push_back("avx2");
#endif
#if defined(LNCADE_HAVE_NEON)
    isas.push_back("neon");
#endif
    return isas;
}

}  // namespace lncade::kernels
