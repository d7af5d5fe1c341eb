#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <queue>
#include <vector>

#include "lncade/errors.hpp"
#include "lncade/phantom.hpp"

using namespace lncade;

namespace {

// 6-connected components of voxels above a HU threshold
struct Component {
    std::vector<std::array<int, 3>> voxels;
};

std::vector<Component> connected_components(const Volume& v, float threshold,
                                            std::size_t min_voxels) {
    const Dims3 d = v.dims();
    std::vector<std::int32_t> label(d.count(), -1);
    const auto idx = [&](int i, int j, int k) {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(d.nx) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(d.ny) * k);
    };
    std::vector<Component> out;
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                if (label[idx(i, j, k)] != -1 || v.at(i, j, k) <= threshold) continue;
                Component comp;
                std::queue<std::array<int, 3>> frontier;
                frontier.push({i, j, k});
                label[idx(i, j, k)] = static_cast<std::int32_t>(out.size());
                while (!frontier.empty()) {
                    const auto [x, y, z] = frontier.front();
                    frontier.pop();
                    comp.voxels.push_back({x, y, z});
                    const int nbr[6][3] = {{x + 1, y, z}, {x - 1, y, z}, {x, y + 1, z},
                                           {x, y - 1, z}, {x, y, z + 1}, {x, y, z - 1}};
                    for (const auto& nb : nbr) {
                        if (nb[0] < 0 || nb[1] < 0 || nb[2] < 0 || nb[0] >= d.nx ||
                            nb[1] >= d.ny || nb[2] >= d.nz)
                            continue;
                        if (label[idx(nb[0], nb[1], nb[2])] != -1) continue;
                        if (v.at(nb[0], nb[1], nb[2]) <= threshold) continue;
                        label[idx(nb[0], nb[1], nb[2])] = static_cast<std::int32_t>(out.size());
                        frontier.push({nb[0], nb[1], nb[2]});
                    }
                }
                if (comp.voxels.size() >= min_voxels) out.push_back(std::move(comp));
            }
    return out;
}

// ratio of longest to shortest principal axis of the voxel cloud (mm),
// via Jacobi eigenvalues of the 3x3 covariance
double principal_axis_ratio(const Component& comp, const Volume& v) {
    const Vec3 sp = v.spacing_mm();
    Vec3 mean{};
    for (const auto& vx : comp.voxels)
        mean += Vec3{vx[0] * sp.x, vx[1] * sp.y, vx[2] * sp.z};
    mean = mean * (1.0 / static_cast<double>(comp.voxels.size()));

    double cov[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    for (const auto& vx : comp.voxels) {
        const double p[3] = {vx[0] * sp.x - mean.x, vx[1] * sp.y - mean.y,
                             vx[2] * sp.z - mean.z};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) cov[r][c] += p[r] * p[c];
    }
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cov[r][c] /= static_cast<double>(comp.voxels.size());

    // Jacobi rotations
    for (int sweep = 0; sweep < 50; ++sweep) {
        int p = 0, q = 1;
        double biggest = std::abs(cov[0][1]);
        if (std::abs(cov[0][2]) > biggest) {
            biggest = std::abs(cov[0][2]);
            p = 0;
            q = 2;
        }
        if (std::abs(cov[1][2]) > biggest) {
            biggest = std::abs(cov[1][2]);
            p = 1;
            q = 2;
        }
        if (biggest < 1e-12) break;
        const double theta = 0.5 * std::atan2(2.0 * cov[p][q], cov[q][q] - cov[p][p]);
        const double c = std::cos(theta), s = std::sin(theta);
        double rot[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        rot[p][p] = c;
        rot[q][q] = c;
        rot[p][q] = s;
        rot[q][p] = -s;
        double tmp[3][3] = {};
        for (int r = 0; r < 3; ++r)
            for (int cc = 0; cc < 3; ++cc)
                for (int k2 = 0; k2 < 3; ++k2) tmp[r][cc] += rot[k2][r] * cov[k2][cc];
        double next[3][3] = {};
        for (int r = 0; r < 3; ++r)
            for (int cc = 0; cc < 3; ++cc)
                for (int k2 = 0; k2 < 3; ++k2) next[r][cc] += tmp[r][k2] * rot[k2][cc];
        for (int r = 0; r < 3; ++r)
            for (int cc = 0; cc < 3; ++cc) cov[r][cc] = next[r][cc];
    }
    double lo = cov[0][0], hi = cov[0][0];
    for (int r = 1; r < 3; ++r) {
        lo = std::min(lo, cov[r][r]);
        hi = std::max(hi, cov[r][r]);
    }
    return std::sqrt(std::max(hi, 0.0) / std::max(lo, 1e-9));
}

bool contains_point(const Component& comp, const Volume& v, const Vec3& p_mm) {
    const Vec3 sp = v.spacing_mm();
    const Vec3 o = v.origin_mm();
    const int i = static_cast<int>(std::lround((p_mm.x - o.x) / sp.x));
    const int j = static_cast<int>(std::lround((p_mm.y - o.y) / sp.y));
    const int k = static_cast<int>(std::lround((p_mm.z - o.z) / sp.z));
    for (const auto& vx : comp.voxels)
        if (vx[0] == i && vx[1] == j && vx[2] == k) return true;
    return false;
}

}  // namespace

TEST_CASE("phantom: empty geometry gives pure noise and no candidates") {
    PhantomConfig config;
    config.n_nodes = 0;
    config.n_distractors = 0;
    config.n_background_negatives = 0;
    config.seed = 1;
    const auto [volume, candidates] = generate_phantom(config);
    CHECK(candidates.empty());

    double sum = 0.0, sq = 0.0;
    for (float v : volume.voxels()) {
        sum += v;
        sq += static_cast<double>(v) * v;
    }
    const double n = static_cast<double>(volume.voxels().size());
    const double mean = sum / n;
    const double stddev = std::sqrt(sq / n - mean * mean);
    CHECK(mean == doctest::Approx(20.0).epsilon(0.05));
    CHECK(stddev == doctest::Approx(15.0).epsilon(0.05));
}

TEST_CASE("phantom: node candidates sit on bright compact blobs") {
    PhantomConfig config;
    config.seed = 2;
    const auto [volume, candidates] = generate_phantom(config);

    std::size_t positives = 0, negatives = 0;
    for (const auto& c : candidates) (c.label ? positives : negatives) += 1;
    CHECK(positives == 5);
    CHECK(negatives == static_cast<std::size_t>(config.n_distractors +
                                                config.n_background_negatives));

    for (const auto& c : candidates) {
        if (!c.label) continue;
        // the node center is a bright soft-tissue region near node_hu
        const double v = sample_trilinear(volume, c.center_mm);
        CHECK(v > 45.0);
        CHECK(v < 120.0);
    }
}

TEST_CASE("phantom: negatives respect the 15 mm clearance") {
    PhantomConfig config;
    config.seed = 3;
    const auto [volume, candidates] = generate_phantom(config);

    std::vector<Vec3> node_centers;
    for (const auto& c : candidates)
        if (c.label) node_centers.push_back(c.center_mm);

    for (const auto& c : candidates) {
        if (c.label) continue;
        for (const auto& n : node_centers) CHECK(norm(c.center_mm - n) > 15.0);
    }
}

TEST_CASE("phantom: deterministic per seed") {
    PhantomConfig config;
    config.seed = 4;
    const auto [v1, c1] = generate_phantom(config);
    const auto [v2, c2] = generate_phantom(config);
    CHECK(v1.voxels() == v2.voxels());
    REQUIRE(c1.size() == c2.size());
    for (std::size_t i = 0; i < c1.size(); ++i) {
        CHECK(c1[i].center_mm.x == c2[i].center_mm.x);
        CHECK(c1[i].label == c2[i].label);
    }
}

TEST_CASE("phantom: save/load round trip is bit identical") {
    namespace fs = std::filesystem;
    PhantomConfig config;
    config.seed = 5;
    const auto [volume, candidates] = generate_phantom(config);
    const fs::path path = fs::temp_directory_path() / "lncade_phantom_test.vol";
    save_volume(volume, path);
    const Volume r = load_volume(path);
    CHECK(r.voxels() == volume.voxels());
}

TEST_CASE("phantom: shape statistic separates nodes from distractors") {
    PhantomConfig config;
    config.seed = 6;
    const auto [volume, candidates] = generate_phantom(config);

    // threshold halfway between background and node HU; small components
    // are noise speckle
    const auto components = connected_components(volume, 45.0f, 20);
    REQUIRE(components.size() >= candidates.size() - 3u);  // background points have none

    double max_node_ratio = 0.0, min_tube_ratio = 1e9;
    int matched_nodes = 0, matched_tubes = 0;
    for (const auto& c : candidates) {
        for (const auto& comp : components) {
            if (!contains_point(comp, volume, c.center_mm)) continue;
            const double ratio = principal_axis_ratio(comp, volume);
            if (c.label) {
                max_node_ratio = std::max(max_node_ratio, ratio);
                ++matched_nodes;
            } else {
                min_tube_ratio = std::min(min_tube_ratio, ratio);
                ++matched_tubes;
            }
            break;
        }
    }
    CHECK(matched_nodes == 5);
    CHECK(matched_tubes >= config.n_distractors);  // tubes found, background not required

    // 3D-compact vs 3D-elongated: a clean margin must exist
    CHECK(max_node_ratio < min_tube_ratio);
    CHECK(max_node_ratio < 2.5);
    CHECK(min_tube_ratio > 2.5);
}

TEST_CASE("cohort: determinism, distinct patients, totals add up") {
    PhantomConfig config;
    config.dims = {64, 64, 32};
    config.n_nodes = 3;
    config.n_distractors = 6;
    config.n_background_negatives = 2;

    const auto cohort = generate_cohort(5, config, 77);
    REQUIRE(cohort.size() == 5);

    const auto cohort2 = generate_cohort(5, config, 77);
    std::size_t total_candidates = 0, total_positives = 0;
    for (std::size_t p = 0; p < cohort.size(); ++p) {
        CHECK(cohort[p].patient_id == cohort2[p].patient_id);
        CHECK(cohort[p].volume.voxels() == cohort2[p].volume.voxels());
        CHECK(cohort[p].candidates.size() == cohort2[p].candidates.size());
        total_candidates += cohort[p].candidates.size();
        for (const auto& c : cohort[p].candidates) total_positives += c.label ? 1 : 0;
    }

    // volumes differ between patients (independent substreams)
    CHECK(cohort[0].volume.voxels() != cohort[1].volume.voxels());

    // candidate indices are global and sequential
    std::uint32_t expect = 0;
    for (const auto& patient : cohort)
        for (const auto& c : patient.candidates) CHECK(c.index == expect++);
    CHECK(static_cast<std::size_t>(expect) == total_candidates);
    CHECK(total_positives >= 5);

    CHECK_THROWS_AS(generate_cohort(0, config, 1), DataError);
}

TEST_CASE("phantom: impossible geometry fails with a placement error") {
    PhantomConfig config;
    config.dims = {24, 24, 12};
    config.spacing_mm = {1, 1, 1};  // 24x24x12 mm: far too small for 10 mm nodes
    config.n_nodes = 4;
    CHECK_THROWS_AS(generate_phantom(config), DataError);
}
