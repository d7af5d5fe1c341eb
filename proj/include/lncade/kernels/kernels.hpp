#pragma once

// Data-parallel inner kernels behind the pipeline's hot loops: trilinear
// sampling rows, Hounsfield windowing, and the dot/axpy pairs that carry
// the CNN's convolution and fully-connected arithmetic.
//
// Every kernel has a scalar reference implementation. SIMD variants (AVX2
// on x86-64, NEON on aarch64) are selected once at startup from CPU
// capabilities and must agree with the scalar reference within the
// tolerances checked by tests/test_kernels.cpp.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace lncade::kernels {

// Raw view of a volume grid for samplers. Voxels are float32, x-fastest
// layout, value index = i + nx*(j + ny*k). Voxel (i,j,k) center sits at
// origin + (i*sx, j*sy, k*sz) in world mm.
struct GridView {
    const float* voxels = nullptr;
    int nx = 0, ny = 0, nz = 0;
    double ox = 0, oy = 0, oz = 0;
    double sx = 1, sy = 1, sz = 1;
};

// Value returned for sample points outside the grid support (air).
inline constexpr double kAirFillHu = -1000.0;

// Canonical scalar trilinear sample at a world point; the single source of
// truth every vector variant must reproduce. All arithmetic in double.
inline double trilinear_point(const GridView& g, double x, double y, double z) {
    const double u = (x - g.ox) / g.sx;
    const double v = (y - g.oy) / g.sy;
    const double w = (z - g.oz) / g.sz;
    if (u < 0.0 || v < 0.0 || w < 0.0 || u > static_cast<double>(g.nx - 1) ||
        v > static_cast<double>(g.ny - 1) || w > static_cast<double>(g.nz - 1)) {
        return kAirFillHu;
    }
    int i0 = static_cast<int>(u);
    int j0 = static_cast<int>(v);
    int k0 = static_cast<int>(w);
    if (i0 > g.nx - 2) i0 = g.nx - 2;
    if (j0 > g.ny - 2) j0 = g.ny - 2;
    if (k0 > g.nz - 2) k0 = g.nz - 2;
    const double fu = u - i0;
    const double fv = v - j0;
    const double fw = w - k0;

    const std::size_t nx = static_cast<std::size_t>(g.nx);
    const std::size_t nxy = nx * static_cast<std::size_t>(g.ny);
    const float* base = g.voxels + i0 + nx * j0 + nxy * k0;

    const double c000 = base[0], c100 = base[1];
    const double c010 = base[nx], c110 = base[nx + 1];
    const double c001 = base[nxy], c101 = base[nxy + 1];
    const double c011 = base[nxy + nx], c111 = base[nxy + nx + 1];

    const double x00 = c000 + (c100 - c000) * fu;
    const double x10 = c010 + (c110 - c010) * fu;
    const double x01 = c001 + (c101 - c001) * fu;
    const double x11 = c011 + (c111 - c011) * fu;
    const double y0 = x00 + (x10 - x00) * fv;
    const double y1 = x01 + (x11 - x01) * fv;
    return y0 + (y1 - y0) * fw;
}

struct Kernels {
    const char* isa;

    // out[i] = trilinear sample at world point org + i*step, in HU.
    void (*sample_line)(const GridView& grid, const double org[3], const double step[3],
                        std::size_t n, float* out);

    // out[i] = clamp((hu[i]-lo)/(hi-lo), 0, 1)
    void (*window01)(const float* hu, std::size_t n, float lo, float hi, float* out);

    double (*dot)(const double* a, const double* b, std::size_t n);

    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);

    // y[i] = max(x[i], 0)
    void (*relu)(const double* x, double* y, std::size_t n);

    // grad_in[i] = pre[i] > 0 ? grad_out[i] : 0
    void (*relu_backward)(const double* pre, const double* grad_out, double* grad_in,
                          std::size_t n);
};

const Kernels& scalar_kernels();

// Table selected from CPU capabilities (scalar if nothing better).
const Kernels& active();

// Force a specific table ("scalar", "avx2", "neon"). Returns false if the
// requested ISA is not available in this build/CPU. Intended for startup
// and tests, not for concurrent use mid-run.
bool select_isa(const std::string& name);

std::vector<std::string> available_isas();

}  // namespace lncade::kernels
