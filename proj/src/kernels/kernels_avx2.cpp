// AVX2+FMA variants. This translation unit is compiled with -mavx2 -mfma and
// is only reached after a runtime CPU capability check.

#include "lncade/kernels/kernels.hpp"

#if defined(LNCADE_HAVE_AVX2)

#include <immintrin.h>

namespace lncade::kernels {

namespace {

void sample_line_avx2(const GridView& g, const double org[3], const double step[3],
                      std::size_t n, float* out) {
    const __m256d grid_ox = _mm256_set1_pd(g.ox);
    const __m256d grid_oy = _mm256_set1_pd(g.oy);
    const __m256d grid_oz = _mm256_set1_pd(g.oz);
    const __m256d inv_sx = _mm256_set1_pd(1.0 / g.sx);
    const __m256d inv_sy = _mm256_set1_pd(1.0 / g.sy);
    const __m256d inv_sz = _mm256_set1_pd(1.0 / g.sz);
    const __m256d max_u = _mm256_set1_pd(static_cast<double>(g.nx - 1));
    const __m256d max_v = _mm256_set1_pd(static_cast<double>(g.ny - 1));
    const __m256d max_w = _mm256_set1_pd(static_cast<double>(g.nz - 1));
    const __m256d cell_u = _mm256_set1_pd(static_cast<double>(g.nx - 2));
    const __m256d cell_v = _mm256_set1_pd(static_cast<double>(g.ny - 2));
    const __m256d cell_w = _mm256_set1_pd(static_cast<double>(g.nz - 2));
    const __m256d zero = _mm256_setzero_pd();
    const __m256d fill = _mm256_set1_pd(kAirFillHu);
    const __m256d sx = _mm256_set1_pd(step[0]);
    const __m256d sy = _mm256_set1_pd(step[1]);
    const __m256d sz = _mm256_set1_pd(step[2]);
    const __m256d ox = _mm256_set1_pd(org[0]);
    const __m256d oy = _mm256_set1_pd(org[1]);
    const __m256d oz = _mm256_set1_pd(org[2]);

    const __m128i inx = _mm_set1_epi32(g.nx);
    const __m128i inxy = _mm_set1_epi32(g.nx * g.ny);
    const std::size_t snx = static_cast<std::size_t>(g.nx);
    const std::size_t snxy = snx * static_cast<std::size_t>(g.ny);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_setr_pd(static_cast<double>(i), static_cast<double>(i + 1),
                                         static_cast<double>(i + 2), static_cast<double>(i + 3));
        const __m256d px = _mm256_fmadd_pd(t, sx, ox);
        const __m256d py = _mm256_fmadd_pd(t, sy, oy);
        const __m256d pz = _mm256_fmadd_pd(t, sz, oz);

        const __m256d u = _mm256_mul_pd(_mm256_sub_pd(px, grid_ox), inv_sx);
        const __m256d v = _mm256_mul_pd(_mm256_sub_pd(py, grid_oy), inv_sy);
        const __m256d w = _mm256_mul_pd(_mm256_sub_pd(pz, grid_oz), inv_sz);

        __m256d inside = _mm256_and_pd(_mm256_cmp_pd(u, zero, _CMP_GE_OQ),
                                       _mm256_cmp_pd(u, max_u, _CMP_LE_OQ));
        inside = _mm256_and_pd(inside, _mm256_cmp_pd(v, zero, _CMP_GE_OQ));
        inside = _mm256_and_pd(inside, _mm256_cmp_pd(v, max_v, _CMP_LE_OQ));
        inside = _mm256_and_pd(inside, _mm256_cmp_pd(w, zero, _CMP_GE_OQ));
        inside = _mm256_and_pd(inside, _mm256_cmp_pd(w, max_w, _CMP_LE_OQ));

        // Clamp cell indices into range so gathers stay in-bounds even for
        // lanes that will be overwritten by the fill value.
        const __m256d fi = _mm256_max_pd(zero, _mm256_min_pd(_mm256_floor_pd(u), cell_u));
        const __m256d fj = _mm256_max_pd(zero, _mm256_min_pd(_mm256_floor_pd(v), cell_v));
        const __m256d fk = _mm256_max_pd(zero, _mm256_min_pd(_mm256_floor_pd(w), cell_w));

        const __m256d fu = _mm256_sub_pd(u, fi);
        const __m256d fv = _mm256_sub_pd(v, fj);
        const __m256d fw = _mm256_sub_pd(w, fk);

        const __m128i i0 = _mm256_cvttpd_epi32(fi);
        const __m128i j0 = _mm256_cvttpd_epi32(fj);
        const __m128i k0 = _mm256_cvttpd_epi32(fk);
        const __m128i idx = _mm_add_epi32(
            i0, _mm_add_epi32(_mm_mullo_epi32(j0, inx), _mm_mullo_epi32(k0, inxy)));

        const auto gather = [&](std::size_t offset) {
            const __m128i off = _mm_set1_epi32(static_cast<int>(offset));
            const __m128 f = _mm_i32gather_ps(g.voxels, _mm_add_epi32(idx, off), 4);
            return _mm256_cvtps_pd(f);
        };

        const __m256d c000 = gather(0);
        const __m256d c100 = gather(1);
        const __m256d c010 = gather(snx);
        const __m256d c110 = gather(snx + 1);
        const __m256d c001 = gather(snxy);
        const __m256d c101 = gather(snxy + 1);
        const __m256d c011 = gather(snxy + snx);
        const __m256d c111 = gather(snxy + snx + 1);

        const __m256d x00 = _mm256_fmadd_pd(_mm256_sub_pd(c100, c000), fu, c000);
        const __m256d x10 = _mm256_fmadd_pd(_mm256_sub_pd(c110, c010), fu, c010);
        const __m256d x01 = _mm256_fmadd_pd(_mm256_sub_pd(c101, c001), fu, c001);
        const __m256d x11 = _mm256_fmadd_pd(_mm256_sub_pd(c111, c011), fu, c011);
        const __m256d y0 = _mm256_fmadd_pd(_mm256_sub_pd(x10, x00), fv, x00);
        const __m256d y1 = _mm256_fmadd_pd(_mm256_sub_pd(x11, x01), fv, x01);
        const __m256d r = _mm256_fmadd_pd(_mm256_sub_pd(y1, y0), fw, y0);

        const __m256d result = _mm256_blendv_pd(fill, r, inside);
        _mm_storeu_ps(out + i, _mm256_cvtpd_ps(result));
    }
    for (; i < n; ++i) {
        const double t = static_cast<double>(i);
        out[i] = static_cast<float>(trilinear_point(g, org[0] + t * step[0],
                                                    org[1] + t * step[1],
                                                    org[2] + t * step[2]));
    }
}

void window01_avx2(const float* hu, std::size_t n, float lo, float hi, float* out) {
    const float inv_s = 1.0f / (hi - lo);
    const __m256 vlo = _mm256_set1_ps(lo);
    const __m256 vinv = _mm256_set1_ps(inv_s);
    const __m256 zero = _mm256_setzero_ps();
    const __m256 one = _mm256_set1_ps(1.0f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(hu + i), vlo), vinv);
        v = _mm256_min_ps(_mm256_max_ps(v, zero), one);
        _mm256_storeu_ps(out + i, v);
    }
    for (; i < n; ++i) {
        const float v = (hu[i] - lo) * inv_s;
        out[i] = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    const __m256d acc = _mm256_add_pd(acc0, acc1);
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d sum2 = _mm_add_pd(lo, hi);
    double tail = _mm_cvtsd_f64(_mm_add_sd(sum2, _mm_unpackhi_pd(sum2, sum2)));
    for (; i < n; ++i) tail += a[i] * b[i];
    return tail;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void relu_avx2(const double* x, double* y, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_avx2(const double* pre, const double* grad_out, double* grad_in,
                        std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d keep = _mm256_cmp_pd(_mm256_loadu_pd(pre + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(grad_in + i, _mm256_and_pd(keep, _mm256_loadu_pd(grad_out + i)));
    }
    for (; i < n; ++i) grad_in[i] = pre[i] > 0.0 ? grad_out[i] : 0.0;
}

constexpr Kernels kAvx2{
    "avx2",    sample_line_avx2, window01_avx2, dot_avx2,
    axpy_avx2, relu_avx2,        relu_backward_avx2,
};

}  // namespace

const Kernels& avx2_kernels() { return kAvx2; }

}  // namespace lncade::kernels

#endif  // LNCADE_HAVE_AVX2
