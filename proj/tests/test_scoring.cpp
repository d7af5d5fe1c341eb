#include <doctest.h>

#include <cmath>

#include "lncade/errors.hpp"
#include "lncade/scoring.hpp"

using namespace lncade;

namespace {

Volume constant_volume(float hu) {
    return Volume({40, 40, 40}, {1, 1, 1}, {0, 0, 0},
                  std::vector<float>(40u * 40 * 40, hu));
}

cnn::Model zero_model(int patch_pixels = 32) {
    Rng rng(0);
    return cnn::init_model(cnn::Architecture::standard(patch_pixels), 0.0, rng);
}

}  // namespace

TEST_CASE("aggregate: exact means and error cases") {
    CHECK(aggregate(std::vector<double>{0.8, 0.8, 0.8}) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(aggregate(std::vector<double>{0.0, 1.0}) == 0.5);
    CHECK_THROWS_AS(aggregate(std::vector<double>{}), DataError);
    CHECK_THROWS_AS(aggregate(std::vector<double>{0.5, 1.5}), DataError);
}

TEST_CASE("aggregate: matches a long-double summation oracle") {
    Rng rng(1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> probs(100);
        for (auto& p : probs) p = rng.next_double();
        long double sum = 0.0L;
        for (double p : probs) sum += p;
        const double expect = static_cast<double>(sum / probs.size());
        CHECK(std::abs(aggregate(probs) - expect) <= 1e-12);
    }
}

TEST_CASE("aggregate: permutation invariant and bounded by extremes") {
    Rng rng(2);
    std::vector<double> probs(37);
    for (auto& p : probs) p = rng.next_double();
    const double base = aggregate(probs);

    double lo = 1.0, hi = 0.0;
    for (double p : probs) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    CHECK(base >= lo);
    CHECK(base <= hi);

    // reversal changes the summation order but not the mean beyond 1e-12
    std::vector<double> rev(probs.rbegin(), probs.rend());
    CHECK(aggregate(rev) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("aggregate: raising any view never lowers the score") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> probs(11);
        for (auto& p : probs) p = rng.next_double();
        const double before = aggregate(probs);
        const std::size_t i = rng.below(probs.size());
        probs[i] = std::min(1.0, probs[i] + rng.next_double() * (1.0 - probs[i]));
        CHECK(aggregate(probs) >= before - 1e-15);
    }
}

TEST_CASE("prefix consistency: running means equal prefix aggregates exactly") {
    Rng rng(4);
    std::vector<double> probs(64);
    for (auto& p : probs) p = rng.next_double();

    double running_sum = 0.0;
    for (std::size_t n = 1; n <= probs.size(); ++n) {
        running_sum += probs[n - 1];
        const double running_mean = running_sum / static_cast<double>(n);
        CHECK(aggregate(std::span<const double>(probs.data(), n)) == running_mean);
    }
}

TEST_CASE("score_candidate: default config yields 100 views; constant model scores 0.5") {
    const Volume vol = constant_volume(35.0f);
    const cnn::Model model = zero_model();
    const Candidate cand{"p0", {20, 20, 20}, 1, 0};
    SamplerConfig config;
    config.seed = 11;

    const CandidateScore score = score_candidate(model, vol, cand, config);
    CHECK(score.n_views == 100);
    CHECK(score.probability == 0.5);
    CHECK(score.label == 1);
    CHECK(score.patient_id == "p0");
}

TEST_CASE("score_candidate: equals the manual pipeline composition") {
    Rng rng(5);
    std::vector<float> vox(40u * 40 * 40);
    for (auto& v : vox) v = static_cast<float>(rng.uniform(-200, 300));
    const Volume vol({40, 40, 40}, {1, 1, 1}, {0, 0, 0}, std::move(vox));

    Rng wrng(6);
    const cnn::Model model = cnn::init_model(cnn::Architecture::standard(32), 0.05, wrng);
    const Candidate cand{"p0", {20, 20, 20}, 0, 4};
    SamplerConfig config;
    config.seed = 19;

    std::vector<double> manual;
    for (const auto& obs : generate_observations(cand, config)) {
        const Patch patch = extract_patch(vol, cand, obs, config);
        manual.push_back(cnn::predict(model, patch.data));
    }
    const CandidateScore score = score_candidate(model, vol, cand, config);
    CHECK(score.probability == doctest::Approx(aggregate(manual)).epsilon(1e-12));
    CHECK(score.n_views == static_cast<int>(manual.size()));

    // single-view scoring equals predict directly
    SamplerConfig one = config;
    one.scales_mm = {30.0};
    one.n_translations = 1;
    one.n_rotations = 1;
    const auto obs1 = generate_observations(cand, one);
    const Patch patch1 = extract_patch(vol, cand, obs1[0], one);
    const CandidateScore s1 = score_candidate(model, vol, cand, one);
    CHECK(s1.n_views == 1);
    CHECK(s1.probability == cnn::predict(model, patch1.data));
}

TEST_CASE("score_all: order preserved, parallel equals serial, errors propagate") {
    std::map<std::string, Volume> volumes;
    volumes.emplace("p0", constant_volume(10.0f));
    volumes.emplace("p1", constant_volume(90.0f));

    Rng wrng(7);
    const cnn::Model model = cnn::init_model(cnn::Architecture::standard(32), 0.05, wrng);
    SamplerConfig config;
    config.scales_mm = {30.0, 40.0};
    config.n_translations = 2;
    config.n_rotations = 2;
    config.seed = 23;

    std::vector<Candidate> candidates{
        {"p0", {20, 20, 20}, 1, 0}, {"p1", {20, 20, 20}, 0, 1}, {"p0", {15, 20, 20}, 0, 2}};

    CHECK(score_all(model, volumes, {}, config).empty());

    const auto serial = score_all(model, volumes, candidates, config, 1);
    const auto parallel = score_all(model, volumes, candidates, config, 4);
    REQUIRE(serial.size() == 3);
    REQUIRE(parallel.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(serial[i].candidate_index == candidates[i].index);
        CHECK(serial[i].probability == parallel[i].probability);
        CHECK(serial[i].patient_id == parallel[i].patient_id);
    }

    std::vector<Candidate> missing{{"p9", {20, 20, 20}, 0, 0}};
    CHECK_THROWS_AS(score_all(model, volumes, missing, config), DataError);
}

TEST_CASE("score csv: round trip") {
    namespace fs = std::filesystem;
    const std::vector<CandidateScore> scores{{"p0", 0, 1, 100, 0.875},
                                             {"p1", 1, 0, 100, 0.125}};
    const fs::path path = fs::temp_directory_path() / "lncade_scores_test.csv";
    save_scores(scores, path);
    const auto r = load_scores(path);
    REQUIRE(r.size() == 2);
    CHECK(r[0].patient_id == "p0");
    CHECK(r[0].probability == 0.875);
    CHECK(r[1].label == 0);
    CHECK(r[1].n_views == 100);
}
