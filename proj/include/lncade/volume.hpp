#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lncade/geometry.hpp"
#include "lncade/kernels/kernels.hpp"

namespace lncade {

// Affine intensity window: HU values map to [0,1], clamped.
struct WindowLevel {
    double lo_hu = -100.0;
    double hi_hu = 200.0;

    void validate() const;
};

struct Dims3 {
    int nx = 0, ny = 0, nz = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
               static_cast<std::size_t>(nz);
    }
    bool operator==(const Dims3&) const = default;
};

// 3D scalar grid in Hounsfield Units. Voxels are float32, x-fastest layout;
// voxel (i,j,k) center sits at origin_mm + (i*sx, j*sy, k*sz). Immutable
// after construction in all pipeline uses, so safe to share across workers.
class Volume {
public:
    Volume(Dims3 dims, Vec3 spacing_mm, Vec3 origin_mm, std::vector<float> voxels);

    const Dims3& dims() const { return dims_; }
    const Vec3& spacing_mm() const { return spacing_; }
    const Vec3& origin_mm() const { return origin_; }
    const std::vector<float>& voxels() const { return voxels_; }

    float& at(int i, int j, int k) {
        return voxels_[static_cast<std::size_t>(i) +
                       static_cast<std::size_t>(dims_.nx) *
                           (static_cast<std::size_t>(j) +
                            static_cast<std::size_t>(dims_.ny) * static_cast<std::size_t>(k))];
    }
    float at(int i, int j, int k) const { return const_cast<Volume*>(this)->at(i, j, k); }

    // World coordinate of a voxel center.
    Vec3 voxel_center_mm(int i, int j, int k) const {
        return {origin_.x + i * spacing_.x, origin_.y + j * spacing_.y,
                origin_.z + k * spacing_.z};
    }

    kernels::GridView grid_view() const {
        return {voxels_.data(), dims_.nx, dims_.ny, dims_.nz,
                origin_.x,      origin_.y, origin_.z,
                spacing_.x,     spacing_.y, spacing_.z};
    }

private:
    Dims3 dims_;
    Vec3 spacing_;
    Vec3 origin_;
    std::vector<float> voxels_;
};

// clamp((value-lo)/(hi-lo), 0, 1); total and monotone in value_hu.
inline double apply_window(double value_hu, const WindowLevel& w) {
    const double t = (value_hu - w.lo_hu) / (w.hi_hu - w.lo_hu);
    return t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
}

// Trilinear interpolation at a world point; -1000 HU outside the grid.
inline double sample_trilinear(const Volume& v, const Vec3& point_mm) {
    return kernels::trilinear_point(v.grid_view(), point_mm.x, point_mm.y, point_mm.z);
}

// Resample onto an isotropic grid of the given spacing. Output dims are
// ceil(extent/t) per axis with extent = dims*spacing; origin is preserved
// and every output voxel is sampled trilinearly at its world center.
Volume resample_isotropic(const Volume& v, double target_spacing_mm);

// Text metadata sidecar + little-endian float32 raw file. `path` names the
// sidecar; the raw file it references is resolved relative to it.
Volume load_volume(const std::filesystem::path& path);
void save_volume(const Volume& v, const std::filesystem::path& path);

}  // namespace lncade
