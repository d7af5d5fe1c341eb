#include "lncade/view_sampler.hpp"

#include <cstring>
#include <fstream>

#include "lncade/errors.hpp"
#include "lncade/parallel.hpp"

namespace lncade {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void SamplerConfig::validate() const {
    if (scales_mm.empty()) throw DataError("sampler needs at least one scale");
    for (double s : scales_mm)
        if (!(s > 0.0)) throw DataError("sampler scales must be positive");
    if (n_translations < 1 || n_rotations < 1)
        throw DataError("sampler counts must be >= 1");
    if (max_translation_mm < 0.0) throw DataError("max translation must be >= 0");
    if (patch_pixels < 8) throw DataError("patch_pixels must be >= 8");
    window.validate();
}

std::vector<Observation> generate_observations(const Candidate& candidate,
                                               const SamplerConfig& config) {
    config.validate();
    Rng rng = Rng::substream(config.seed, candidate.index);

    std::vector<Observation> out;
    out.reserve(static_cast<std::size_t>(config.views_per_candidate()));
    for (double scale : config.scales_mm) {
        for (int t = 0; t < config.n_translations; ++t) {
            const Vec3 translation = random_in_ball(rng, config.max_translation_mm);
            for (int r = 0; r < config.n_rotations; ++r) {
                const Vec3 axis = random_unit_vector(rng);
                const double angle = kTwoPi * rng.next_double();
                out.push_back({scale, translation, rotation_from_axis_angle(axis, angle)});
            }
        }
    }
    return out;
}

Patch extract_patch(const Volume& volume, const Candidate& candidate, const Observation& obs,
                    const SamplerConfig& config) {
    const int n = config.patch_pixels;
    const double s = obs.scale_mm;
    const double pixel_mm = s / n;
    const Vec3 center = candidate.center_mm + obs.translation_mm;
    const Vec3 e1 = obs.rotation.col(0);
    const Vec3 e2 = obs.rotation.col(1);
    const Vec3 e3 = obs.rotation.col(2);

    // channel plane axes in the rotated frame: axial, coronal, sagittal
    const Vec3 axes[3][2] = {{e1, e2}, {e1, e3}, {e2, e3}};

    Patch patch;
    patch.pixels_per_side = n;
    patch.data.resize(3u * n * n);

    const kernels::GridView grid = volume.grid_view();
    const auto& k = kernels::active();
    const float lo = static_cast<float>(config.window.lo_hu);
    const float hi = static_cast<float>(config.window.hi_hu);
    std::vector<float> row_hu(static_cast<std::size_t>(n));

    const double first = -0.5 * s + 0.5 * pixel_mm;  // pixel-center alignment
    for (int ch = 0; ch < 3; ++ch) {
        const Vec3& a = axes[ch][0];
        const Vec3& b = axes[ch][1];
        const double step[3] = {pixel_mm * a.x, pixel_mm * a.y, pixel_mm * a.z};
        for (int row = 0; row < n; ++row) {
            const double v = first + row * pixel_mm;
            const Vec3 row_org = center + a * first + b * v;
            const double org[3] = {row_org.x, row_org.y, row_org.z};
            k.sample_line(grid, org, step, static_cast<std::size_t>(n), row_hu.data());
            float* dst = patch.data.data() +
                         (static_cast<std::size_t>(ch) * n + row) * static_cast<std::size_t>(n);
            k.window01(row_hu.data(), static_cast<std::size_t>(n), lo, hi, dst);
        }
    }
    return patch;
}

std::vector<IndexedPatch> extract_all_patches(const Volume& volume,
                                              const std::vector<Candidate>& candidates,
                                              const SamplerConfig& config) {
    config.validate();
    const std::size_t views = static_cast<std::size_t>(config.views_per_candidate());
    std::vector<IndexedPatch> out(candidates.size() * views);
    parallel_for(candidates.size(), 1, [&](std::size_t c) {
        const Candidate& cand = candidates[c];
        const auto observations = generate_observations(cand, config);
        for (std::size_t v = 0; v < views; ++v) {
            IndexedPatch& slot = out[c * views + v];
            slot.candidate_index = cand.index;
            slot.label = static_cast<std::uint8_t>(cand.label);
            slot.patch = extract_patch(volume, cand, observations[v], config);
        }
    });
    return out;
}

void PatchDataset::append(const IndexedPatch& p) {
    if (patch_pixels == 0) patch_pixels = p.patch.pixels_per_side;
    if (patch_pixels != p.patch.pixels_per_side)
        throw DataError("patch dataset mixes patch sizes");
    candidate_index.push_back(p.candidate_index);
    labels.push_back(p.label);
    pixels.insert(pixels.end(), p.patch.data.begin(), p.patch.data.end());
}

namespace {
constexpr char kPatchMagic[8] = {'L', 'N', 'P', 'A', 'T', 'C', 'H', '\0'};
constexpr std::uint32_t kPatchVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_patches(const PatchDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write patch dataset: " + path.string());
    out.write(kPatchMagic, sizeof(kPatchMagic));
    write_pod(out, kPatchVersion);
    write_pod(out, static_cast<std::uint32_t>(ds.patch_pixels));
    write_pod(out, static_cast<std::uint32_t>(3));
    write_pod(out, static_cast<std::uint64_t>(ds.size()));
    const std::size_t rec = ds.record_floats();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        write_pod(out, ds.candidate_index[i]);
        write_pod(out, ds.labels[i]);
        out.write(reinterpret_cast<const char*>(ds.record(i)),
                  static_cast<std::streamsize>(rec * sizeof(float)));
    }
    if (!out) throw DataError("failed writing patch dataset: " + path.string());
}

PatchDataset load_patches(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open patch dataset: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kPatchMagic, sizeof(magic)) != 0)
        throw DataError("not a patch dataset: " + path.string());
    std::uint32_t version = 0, pixels = 0, channels = 0;
    std::uint64_t count = 0;
    read_pod(in, version);
    read_pod(in, pixels);
    read_pod(in, channels);
    read_pod(in, count);
    if (!in || version != kPatchVersion)
        throw DataError("unsupported patch dataset version: " + path.string());
    if (channels != 3) throw DataError("patch dataset must have 3 channels: " + path.string());
    if (pixels < 8) throw DataError("corrupt patch dataset header: " + path.string());

    PatchDataset ds;
    ds.patch_pixels = static_cast<int>(pixels);
    const std::size_t rec = ds.record_floats();
    ds.candidate_index.resize(count);
    ds.labels.resize(count);
    ds.pixels.resize(count * rec);
    for (std::uint64_t i = 0; i < count; ++i) {
        read_pod(in, ds.candidate_index[i]);
        read_pod(in, ds.labels[i]);
        in.read(reinterpret_cast<char*>(ds.pixels.data() + i * rec),
                static_cast<std::streamsize>(rec * sizeof(float)));
    }
    if (!in) throw DataError("truncated patch dataset: " + path.string());
    return ds;
}

}  // namespace lncade
