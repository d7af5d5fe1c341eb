#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lncade/candidates.hpp"
#include "lncade/cnn/model.hpp"
#include "lncade/view_sampler.hpp"
#include "lncade/volume.hpp"

namespace lncade {

struct CandidateScore {
    std::string patient_id;
    std::uint32_t candidate_index = 0;
    int label = 0;
    int n_views = 0;
    double probability = 0.0;
};

// Arithmetic mean of the per-view probabilities (the set-averaging rule).
double aggregate(std::span<const double> view_probs);

// CNN probability for each observation of the candidate, in observation
// order. Scores at a smaller view budget are running means of a prefix of
// this list.
std::vector<double> view_probabilities(const cnn::Model& model, const Volume& volume,
                                       const Candidate& candidate,
                                       const SamplerConfig& config);

CandidateScore score_candidate(const cnn::Model& model, const Volume& volume,
                               const Candidate& candidate, const SamplerConfig& config);

// One score per candidate, input order preserved; candidates are processed
// in parallel (per-candidate substreams keep results thread-count
// independent). Throws DataError when a candidate's patient has no volume.
std::vector<CandidateScore> score_all(const cnn::Model& model,
                                      const std::map<std::string, Volume>& volumes,
                                      const std::vector<Candidate>& candidates,
                                      const SamplerConfig& config, int n_threads = 1);

// CSV with header: patient_id,candidate_index,label,n_views,probability
void save_scores(const std::vector<CandidateScore>& scores,
                 const std::filesystem::path& path);
std::vector<CandidateScore> load_scores(const std::filesystem::path& path);

}  // namespace lncade
