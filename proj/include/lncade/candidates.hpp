#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lncade/geometry.hpp"

namespace lncade {

// One detection candidate: a world-space point with its ground-truth label.
// `index` is the candidate's row number in the dataset and keys its RNG
// substream, so results never depend on how a candidate list is chunked.
struct Candidate {
    std::string patient_id;
    Vec3 center_mm;
    int label = 0;  // 1 = true node, 0 = false-positive candidate
    std::uint32_t index = 0;
};

// CSV with header: patient_id,x_mm,y_mm,z_mm,label
std::vector<Candidate> load_candidates(const std::filesystem::path& path);
void save_candidates(const std::vector<Candidate>& candidates,
                     const std::filesystem::path& path);

}  // namespace lncade
