#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lncade/candidates.hpp"
#include "lncade/geometry.hpp"
#include "lncade/rng.hpp"
#include "lncade/volume.hpp"

namespace lncade {

// Random-view generation parameters. The defaults reproduce the standard
// configuration: 4 VOI scales, 5 translations, 5 rotations = 100 views per
// candidate, 32x32 patches windowed to [-100, 200] HU.
struct SamplerConfig {
    std::vector<double> scales_mm{30.0, 35.0, 40.0, 45.0};
    int n_translations = 5;
    int n_rotations = 5;
    double max_translation_mm = 3.0;
    int patch_pixels = 32;
    WindowLevel window{};
    std::uint64_t seed = 0;

    int views_per_candidate() const {
        return static_cast<int>(scales_mm.size()) * n_translations * n_rotations;
    }
    void validate() const;
};

// One random view of a candidate's VOI: cube edge length, center jitter,
// and the orientation of the sampling frame.
struct Observation {
    double scale_mm = 0.0;
    Vec3 translation_mm{};
    Mat3 rotation{};
};

// Three-channel square patch; channel planes are the axial/coronal/sagittal
// cuts through the VOI center in the observation's rotated frame. Stored
// channel-major: pixel (ch, row, col) at data[(ch*n + row)*n + col], values
// already windowed to [0,1].
struct Patch {
    int pixels_per_side = 0;
    std::vector<float> data;  // 3 * n * n floats

    float at(int channel, int row, int col) const {
        return data[(static_cast<std::size_t>(channel) * pixels_per_side + row) *
                        pixels_per_side + col];
    }
};

// Exactly N_s x N_t x N_r observations, scale-major: for every scale,
// N_t translations from the closed ball, each with N_r uniform rotations.
// The stream is the candidate's substream, so output depends only on
// (config.seed, candidate.index).
std::vector<Observation> generate_observations(const Candidate& candidate,
                                               const SamplerConfig& config);

Patch extract_patch(const Volume& volume, const Candidate& candidate, const Observation& obs,
                    const SamplerConfig& config);

struct IndexedPatch {
    std::uint32_t candidate_index = 0;
    std::uint8_t label = 0;
    Patch patch;
};

// All patches of all candidates, observation order preserved per candidate.
std::vector<IndexedPatch> extract_all_patches(const Volume& volume,
                                              const std::vector<Candidate>& candidates,
                                              const SamplerConfig& config);

// Flat patch dataset as stored on disk: header + fixed-size records.
struct PatchDataset {
    int patch_pixels = 0;
    std::vector<std::uint32_t> candidate_index;
    std::vector<std::uint8_t> labels;
    std::vector<float> pixels;  // record i at pixels[i * 3*n*n]

    std::size_t size() const { return labels.size(); }
    std::size_t record_floats() const {
        return 3u * static_cast<std::size_t>(patch_pixels) * static_cast<std::size_t>(patch_pixels);
    }
    const float* record(std::size_t i) const { return pixels.data() + i * record_floats(); }
    void append(const IndexedPatch& p);
};

PatchDataset load_patches(const std::filesystem::path& path);
void save_patches(const PatchDataset& ds, const std::filesystem::path& path);

}  // namespace lncade
