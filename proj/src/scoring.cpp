#include "lncade/scoring.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lncade/errors.hpp"
#include "lncade/parallel.hpp"

namespace lncade {

double aggregate(std::span<const double> view_probs) {
    if (view_probs.empty()) throw DataError("cannot aggregate an empty probability list");
    double sum = 0.0;
    for (double p : view_probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw DataError("view probability outside [0, 1]");
        sum += p;
    }
    return sum / static_cast<double>(view_probs.size());
}

std::vector<double> view_probabilities(const cnn::Model& model, const Volume& volume,
                                       const Candidate& candidate,
                                       const SamplerConfig& config) {
    const auto observations = generate_observations(candidate, config);
    std::vector<double> probs;
    probs.reserve(observations.size());
    cnn::ForwardContext ctx;
    for (const auto& obs : observations) {
        const Patch patch = extract_patch(volume, candidate, obs, config);
        probs.push_back(cnn::forward(model, patch.data, nullptr, ctx)[1]);
    }
    return probs;
}

CandidateScore score_candidate(const cnn::Model& model, const Volume& volume,
                               const Candidate& candidate, const SamplerConfig& config) {
    const auto probs = view_probabilities(model, volume, candidate, config);
    return {candidate.patient_id, candidate.index, candidate.label,
            static_cast<int>(probs.size()), aggregate(probs)};
}

std::vector<CandidateScore> score_all(const cnn::Model& model,
                                      const std::map<std::string, Volume>& volumes,
                                      const std::vector<Candidate>& candidates,
                                      const SamplerConfig& config, int n_threads) {
    for (const auto& c : candidates) {
        if (!volumes.contains(c.patient_id))
            throw DataError("no volume for patient '" + c.patient_id + "'");
    }
    std::vector<CandidateScore> scores(candidates.size());
    parallel_for(candidates.size(), n_threads, [&](std::size_t i) {
        const Candidate& c = candidates[i];
        scores[i] = score_candidate(model, volumes.at(c.patient_id), c, config);
    });
    return scores;
}

void save_scores(const std::vector<CandidateScore>& scores,
                 const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write score file: " + path.string());
    out << "patient_id,candidate_index,label,n_views,probability\n";
    char buf[192];
    for (const auto& s : scores) {
        std::snprintf(buf, sizeof(buf), "%s,%u,%d,%d,%.17g\n", s.patient_id.c_str(),
                      s.candidate_index, s.label, s.n_views, s.probability);
        out << buf;
    }
    if (!out) throw DataError("failed writing score file: " + path.string());
}

std::vector<CandidateScore> load_scores(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open score file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.find("patient_id") == std::string::npos)
        throw DataError("score file missing header: " + path.string());
    std::vector<CandidateScore> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        CandidateScore s;
        std::string field;
        if (!std::getline(is, s.patient_id, ',') || !std::getline(is, field, ','))
            throw DataError("malformed score row at line " + std::to_string(line_no));
        s.candidate_index = static_cast<std::uint32_t>(std::stoul(field));
        if (!std::getline(is, field, ','))
            throw DataError("malformed score row at line " + std::to_string(line_no));
        s.label = std::stoi(field);
        if (!std::getline(is, field, ','))
            throw DataError("malformed score row at line " + std::to_string(line_no));
        s.n_views = std::stoi(field);
        if (!std::getline(is, field))
            throw DataError("malformed score row at line " + std::to_string(line_no));
        s.probability = std::strtod(field.c_str(), nullptr);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace lncade
