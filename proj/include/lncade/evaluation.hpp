#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lncade/geometry.hpp"
#include "lncade/rng.hpp"
#include "lncade/scoring.hpp"

namespace lncade {

struct FrocPoint {
    double threshold = 0.0;
    double sensitivity = 0.0;
    double fp_per_volume = 0.0;
};

// One point per distinct score, descending threshold. A candidate counts as
// detected at its own threshold (ties included), which makes the curve a
// right-continuous step function.
std::vector<FrocPoint> froc_curve(std::span<const CandidateScore> scores, int n_volumes);

// Max sensitivity over points with fp_per_volume <= fp_per_vol; 0 if none.
double sensitivity_at_fp(std::span<const FrocPoint> curve, double fp_per_vol);

// Mann-Whitney statistic: (#(pos > neg) + 0.5 * ties) / (pos * neg).
double roc_auc(std::span<const CandidateScore> scores);

struct RocPoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

// One point per distinct score, descending threshold (ties grouped). The
// implicit (0,0) anchor above the top threshold is not emitted; trapezoidal
// integration from (0,0) through these points to (1,1) equals roc_auc.
std::vector<RocPoint> roc_points(std::span<const CandidateScore> scores);

// Two-sided Fisher's exact test on [[a, b], [c, d]] via the
// minimum-likelihood rule; log-factorial arithmetic. Degenerate margins
// give p = 1.
double fisher_exact(const std::array<std::array<std::int64_t, 2>, 2>& table);

struct FoldAssignment {
    int k = 0;
    std::map<std::string, int> fold_of;

    int fold(const std::string& patient_id) const;
};

// Seeded shuffle of the distinct patients then round-robin assignment;
// fold sizes differ by at most one.
FoldAssignment make_folds(std::span<const std::string> patient_ids, int k,
                          std::uint64_t seed);

// Index multiset with equal class counts: the majority class is kept as is,
// the minority class keeps its originals plus draws with replacement.
// Training folds only; evaluation data is never balanced.
std::vector<std::size_t> balance_training_set(std::span<const std::uint8_t> labels,
                                              std::span<const std::size_t> indices, Rng& rng);

// Ground-truth matching: positive iff within radius_mm (Euclidean, world mm)
// of some true node center.
int label_by_distance(const Vec3& candidate_mm, std::span<const Vec3> truth_centers_mm,
                      double radius_mm = 15.0);

// CSV: threshold,sensitivity,fp_per_volume
void save_froc_csv(std::span<const FrocPoint> curve, const std::filesystem::path& path);

// CSV: threshold,tpr,fpr
void save_roc_csv(std::span<const RocPoint> curve, const std::filesystem::path& path);

// Fig.4-style plot: one step curve per labeled series, shared axes.
struct FrocSeries {
    std::string label;
    std::vector<FrocPoint> points;
};
void save_froc_svg(std::span<const FrocSeries> series, const std::filesystem::path& path,
                   double max_fp_per_volume = 0.0);

}  // namespace lncade
