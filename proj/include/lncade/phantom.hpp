#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lncade/candidates.hpp"
#include "lncade/volume.hpp"

namespace lncade {

// Synthetic soft-tissue volume: smooth ellipsoidal nodes over noisy
// background, plus vessel-like tube distractors that look like nodes in a
// single slice but are elongated in 3D. Stands in for clinical CT at desk
// scale.
struct PhantomConfig {
    Dims3 dims{96, 96, 48};
    Vec3 spacing_mm{1.0, 1.0, 2.0};
    Vec3 origin_mm{0.0, 0.0, 0.0};
    int n_nodes = 5;
    double node_radius_min_mm = 4.0;
    double node_radius_max_mm = 10.0;
    int n_distractors = 12;          // tubes; each contributes one negative
    int n_background_negatives = 3;  // plain background points
    double background_hu = 20.0;
    double noise_stddev_hu = 15.0;
    double node_hu = 70.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Minimum distance between a negative candidate and any node center.
inline constexpr double kNegativeClearanceMm = 15.0;

// Volume plus its candidate list: every node center injected as a positive,
// tube/background points as negatives (all > 15 mm from any node center).
// Deterministic per seed; throws DataError if the geometry cannot be placed.
std::pair<Volume, std::vector<Candidate>> generate_phantom(
    const PhantomConfig& config, const std::string& patient_id = "phantom");

struct PatientPhantom {
    std::string patient_id;
    Volume volume;
    std::vector<Candidate> candidates;
};

// Independent phantoms with per-patient substreams; candidate counts are
// jittered around the configured values. Candidate indices are global
// across the cohort, in patient order.
std::vector<PatientPhantom> generate_cohort(int n_patients, const PhantomConfig& config,
                                            std::uint64_t seed);

}  // namespace lncade
