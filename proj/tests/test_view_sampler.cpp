#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lncade/errors.hpp"
#include "lncade/view_sampler.hpp"

using namespace lncade;

namespace {

Volume constant_volume(float hu, Dims3 dims = {40, 40, 40}) {
    return Volume(dims, {1, 1, 1}, {0, 0, 0}, std::vector<float>(dims.count(), hu));
}

double max_abs_off_identity(const Mat3& m) {
    double worst = 0.0;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            worst = std::max(worst, std::abs(m.m[r][c] - (r == c ? 1.0 : 0.0)));
    return worst;
}

bool observations_equal(const Observation& a, const Observation& b) {
    if (a.scale_mm != b.scale_mm) return false;
    if (a.translation_mm.x != b.translation_mm.x || a.translation_mm.y != b.translation_mm.y ||
        a.translation_mm.z != b.translation_mm.z)
        return false;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if (a.rotation.m[r][c] != b.rotation.m[r][c]) return false;
    return true;
}

}  // namespace

TEST_CASE("sampler defaults reproduce the standard configuration") {
    const SamplerConfig config;
    REQUIRE(config.scales_mm.size() == 4);
    CHECK(config.scales_mm == std::vector<double>{30.0, 35.0, 40.0, 45.0});
    CHECK(config.n_translations == 5);
    CHECK(config.n_rotations == 5);
    CHECK(config.views_per_candidate() == 100);
    CHECK(config.max_translation_mm == 3.0);
    CHECK(config.patch_pixels == 32);
    CHECK(config.window.lo_hu == -100.0);
    CHECK(config.window.hi_hu == 200.0);
}

TEST_CASE("generate_observations: exactly N_s * N_t * N_r views") {
    const Candidate cand{"p0", {20, 20, 20}, 1, 0};
    const auto obs = generate_observations(cand, SamplerConfig{});
    CHECK(obs.size() == 100);

    // scale-major ordering: 25 views per scale
    for (std::size_t i = 0; i < obs.size(); ++i)
        CHECK(obs[i].scale_mm == SamplerConfig{}.scales_mm[i / 25]);
}

TEST_CASE("generate_observations: degenerate single view") {
    SamplerConfig config;
    config.scales_mm = {30.0};
    config.n_translations = 1;
    config.n_rotations = 1;
    config.max_translation_mm = 0.0;
    const Candidate cand{"p0", {0, 0, 0}, 0, 3};
    const auto obs = generate_observations(cand, config);
    REQUIRE(obs.size() == 1);
    CHECK(norm(obs[0].translation_mm) == 0.0);
    CHECK(obs[0].scale_mm == 30.0);
}

TEST_CASE("generate_observations: deterministic per (seed, candidate index)") {
    const Candidate cand{"p0", {10, 10, 10}, 1, 7};
    const auto a = generate_observations(cand, SamplerConfig{});
    const auto b = generate_observations(cand, SamplerConfig{});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(observations_equal(a[i], b[i]));

    // a different candidate index gives a different stream
    Candidate other = cand;
    other.index = 8;
    const auto c = generate_observations(other, SamplerConfig{});
    CHECK_FALSE(observations_equal(a[0], c[0]));
}

TEST_CASE("generate_observations: rotations orthonormal, translations bounded") {
    const Candidate cand{"p0", {0, 0, 0}, 0, 11};
    SamplerConfig config;
    config.seed = 5;
    const auto obs = generate_observations(cand, config);
    for (const auto& o : obs) {
        CHECK(max_abs_off_identity(o.rotation * o.rotation.transposed()) < 1e-9);
        CHECK(std::abs(o.rotation.determinant() - 1.0) < 1e-9);
        CHECK(norm(o.translation_mm) <= config.max_translation_mm);
    }
}

TEST_CASE("extract_patch: constant volume maps to the windowed constant") {
    const Volume vol = constant_volume(50.0f);
    const Candidate cand{"p0", {20, 20, 20}, 1, 0};
    Observation obs{30.0, {0, 0, 0}, Mat3::identity()};
    SamplerConfig config;
    const Patch patch = extract_patch(vol, cand, obs, config);
    REQUIRE(patch.data.size() == 3u * 32 * 32);
    for (float v : patch.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("extract_patch: axis-aligned extraction matches a direct resample") {
    // no rotation, no translation: pixel (ch 0, row, col) must equal the
    // windowed trilinear sample on the axial grid computed independently
    Dims3 dims{40, 40, 40};
    std::vector<float> vox(dims.count());
    Rng rng(21);
    for (auto& v : vox) v = static_cast<float>(rng.uniform(-200.0, 400.0));
    const Volume vol(dims, {1, 1, 1}, {0, 0, 0}, std::move(vox));

    const Candidate cand{"p0", {20, 20, 20}, 1, 0};
    const Observation obs{30.0, {0, 0, 0}, Mat3::identity()};
    SamplerConfig config;
    const Patch patch = extract_patch(vol, cand, obs, config);

    const double step = 30.0 / 32.0;
    const double first = -15.0 + 0.5 * step;
    for (int row = 0; row < 32; ++row) {
        for (int col = 0; col < 32; ++col) {
            const Vec3 axial{20.0 + first + col * step, 20.0 + first + row * step, 20.0};
            const double expect = apply_window(sample_trilinear(vol, axial), config.window);
            CHECK(patch.at(0, row, col) == doctest::Approx(expect).epsilon(1e-6));

            const Vec3 coronal{20.0 + first + col * step, 20.0, 20.0 + first + row * step};
            const double expect_c = apply_window(sample_trilinear(vol, coronal), config.window);
            CHECK(patch.at(1, row, col) == doctest::Approx(expect_c).epsilon(1e-6));

            const Vec3 sagittal{20.0, 20.0 + first + col * step, 20.0 + first + row * step};
            const double expect_s = apply_window(sample_trilinear(vol, sagittal), config.window);
            CHECK(patch.at(2, row, col) == doctest::Approx(expect_s).epsilon(1e-6));
        }
    }
}

TEST_CASE("extract_patch: bright axial slab lights channel 0, lines in 1 and 2") {
    // slab: z in [19, 21] at 300 HU, elsewhere -100 HU
    Dims3 dims{40, 40, 40};
    std::vector<float> vox(dims.count(), -100.0f);
    for (int k = 19; k <= 21; ++k)
        for (int j = 0; j < 40; ++j)
            for (int i = 0; i < 40; ++i)
                vox[i + 40 * (j + 40 * static_cast<std::size_t>(k))] = 300.0f;
    const Volume vol(dims, {1, 1, 1}, {0, 0, 0}, std::move(vox));

    const Candidate cand{"p0", {20, 20, 20}, 1, 0};
    const Observation obs{30.0, {0, 0, 0}, Mat3::identity()};
    SamplerConfig config;
    const Patch patch = extract_patch(vol, cand, obs, config);

    double ch0_min = 1.0, ch1_mean = 0.0, ch2_mean = 0.0, ch1_max = 0.0, ch2_max = 0.0;
    for (int r = 0; r < 32; ++r)
        for (int c = 0; c < 32; ++c) {
            ch0_min = std::min(ch0_min, static_cast<double>(patch.at(0, r, c)));
            ch1_mean += patch.at(1, r, c);
            ch2_mean += patch.at(2, r, c);
            ch1_max = std::max(ch1_max, static_cast<double>(patch.at(1, r, c)));
            ch2_max = std::max(ch2_max, static_cast<double>(patch.at(2, r, c)));
        }
    ch1_mean /= 32 * 32;
    ch2_mean /= 32 * 32;

    CHECK(ch0_min > 0.99);        // whole axial plane inside the slab
    CHECK(ch1_max > 0.99);        // the slab appears as a bright line
    CHECK(ch2_max > 0.99);
    CHECK(ch1_mean < 0.35);       // ... but only a line
    CHECK(ch2_mean < 0.35);
}

TEST_CASE("extract_patch: blob fills more pixels at the smaller scale") {
    // 6 mm radius blob at the candidate; scale 30 vs 45
    Dims3 dims{40, 40, 40};
    std::vector<float> vox(dims.count(), -100.0f);
    const Vec3 center{20, 20, 20};
    for (int k = 0; k < 40; ++k)
        for (int j = 0; j < 40; ++j)
            for (int i = 0; i < 40; ++i) {
                const Vec3 p{static_cast<double>(i), static_cast<double>(j),
                             static_cast<double>(k)};
                if (norm(p - center) <= 6.0)
                    vox[i + 40 * (j + 40 * static_cast<std::size_t>(k))] = 300.0f;
            }
    const Volume vol(dims, {1, 1, 1}, {0, 0, 0}, std::move(vox));
    const Candidate cand{"p0", center, 1, 0};
    SamplerConfig config;

    const auto bright_fraction = [&](double scale) {
        const Observation obs{scale, {0, 0, 0}, Mat3::identity()};
        const Patch patch = extract_patch(vol, cand, obs, config);
        int bright = 0;
        for (float v : patch.data) bright += v > 0.9f ? 1 : 0;
        return static_cast<double>(bright) / static_cast<double>(patch.data.size());
    };

    const double f30 = bright_fraction(30.0);
    const double f45 = bright_fraction(45.0);
    CHECK(f30 > f45);
    // area scales with (30/45)^-2 = 2.25
    CHECK(f30 / f45 == doctest::Approx(2.25).epsilon(0.15));
}

TEST_CASE("extract_patch: values always within [0,1]") {
    Dims3 dims{24, 24, 24};
    std::vector<float> vox(dims.count());
    Rng rng(31);
    for (auto& v : vox) v = static_cast<float>(rng.uniform(-2000.0, 3000.0));
    const Volume vol(dims, {0.9, 1.2, 1.7}, {-5, -5, -5}, std::move(vox));
    SamplerConfig config;
    config.seed = 77;
    const Candidate cand{"p0", {6, 8, 10}, 0, 2};
    for (const auto& obs : generate_observations(cand, config)) {
        const Patch p = extract_patch(vol, cand, obs, config);
        for (float v : p.data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("extract_all_patches: counts, empty input, chunking invariance") {
    const Volume vol = constant_volume(0.0f);
    SamplerConfig config;
    config.seed = 9;

    const Candidate c0{"p0", {18, 20, 20}, 1, 0};
    const Candidate c1{"p0", {22, 20, 20}, 0, 1};

    const auto all = extract_all_patches(vol, {c0, c1}, config);
    CHECK(all.size() == 200);
    CHECK(extract_all_patches(vol, {}, config).empty());

    // per-candidate substreams: results do not depend on list chunking
    const auto solo0 = extract_all_patches(vol, {c0}, config);
    const auto solo1 = extract_all_patches(vol, {c1}, config);
    REQUIRE(solo0.size() == 100);
    REQUIRE(solo1.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(all[i].candidate_index == solo0[i].candidate_index);
        CHECK(all[i].patch.data == solo0[i].patch.data);
        CHECK(all[100 + i].candidate_index == solo1[i].candidate_index);
        CHECK(all[100 + i].patch.data == solo1[i].patch.data);
    }
    CHECK(all[0].label == 1);
    CHECK(all[100].label == 0);
}

TEST_CASE("patch dataset: file round trip and corruption detection") {
    namespace fs = std::filesystem;
    const Volume vol = constant_volume(120.0f, {24, 24, 24});
    SamplerConfig config;
    config.scales_mm = {20.0};
    config.n_translations = 2;
    config.n_rotations = 2;
    config.patch_pixels = 16;
    config.seed = 3;
    const Candidate cand{"p0", {12, 12, 12}, 1, 0};

    PatchDataset ds;
    for (const auto& ip : extract_all_patches(vol, {cand}, config)) ds.append(ip);
    REQUIRE(ds.size() == 4);

    const fs::path path = fs::temp_directory_path() / "lncade_patches_test.bin";
    save_patches(ds, path);
    const PatchDataset r = load_patches(path);
    CHECK(r.patch_pixels == 16);
    CHECK(r.size() == 4);
    CHECK(r.candidate_index == ds.candidate_index);
    CHECK(r.labels == ds.labels);
    CHECK(r.pixels == ds.pixels);

    // truncated file must be rejected
    const auto bytes = fs::file_size(path);
    fs::resize_file(path, bytes - 5);
    CHECK_THROWS_AS(load_patches(path), DataError);
}

TEST_CASE("sampler config: invariants rejected") {
    SamplerConfig config;
    config.scales_mm = {};
    CHECK_THROWS_AS(config.validate(), DataError);
    config = {};
    config.n_translations = 0;
    CHECK_THROWS_AS(config.validate(), DataError);
    config = {};
    config.patch_pixels = 4;
    CHECK_THROWS_AS(config.validate(), DataError);
    config = {};
    config.max_translation_mm = -1.0;
    CHECK_THROWS_AS(config.validate(), DataError);
}
