#include "lncade/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lncade/errors.hpp"
#include "lncade/rng.hpp"

namespace lncade {

namespace {

constexpr int kMaxPlacementTries = 4000;

struct Ellipsoid {
    Vec3 center;
    Vec3 semi_axes;
    double max_semi() const { return std::max({semi_axes.x, semi_axes.y, semi_axes.z}); }
    double min_semi() const { return std::min({semi_axes.x, semi_axes.y, semi_axes.z}); }
};

struct Tube {
    Vec3 a, b;  // segment endpoints
    double radius;
};

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec3 closest = a + ab * t;
    return norm(p - closest);
}

double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                const Vec3& q2) {
    // standard clamped closest-point computation
    const Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
    const double a = dot(d1, d1), e = dot(d2, d2), f = dot(d2, r);
    double s = 0.0, t = 0.0;
    if (a <= 1e-12 && e <= 1e-12) return norm(r);
    if (a <= 1e-12) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = dot(d1, r);
        if (e <= 1e-12) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = dot(d1, d2);
            const double denom = a * e - b * b;
            s = denom > 1e-12 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    const Vec3 c1 = p1 + d1 * s;
    const Vec3 c2 = p2 + d2 * t;
    return norm(c1 - c2);
}

Vec3 uniform_in_box(Rng& rng, const Vec3& lo, const Vec3& hi) {
    return {rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
}

}  // namespace

void PhantomConfig::validate() const {
    if (dims.nx < 2 || dims.ny < 2 || dims.nz < 2)
        throw DataError("phantom dims must be >= 2 per axis");
    if (!(spacing_mm.x > 0) || !(spacing_mm.y > 0) || !(spacing_mm.z > 0))
        throw DataError("phantom spacing must be positive");
    if (n_nodes < 0 || n_distractors < 0 || n_background_negatives < 0)
        throw DataError("phantom counts must be >= 0");
    if (!(node_radius_min_mm > 0) || !(node_radius_max_mm >= node_radius_min_mm))
        throw DataError("phantom node radius range invalid");
    if (!(noise_stddev_hu >= 0)) throw DataError("phantom noise stddev must be >= 0");
}

std::pair<Volume, std::vector<Candidate>> generate_phantom(const PhantomConfig& config,
                                                           const std::string& patient_id) {
    config.validate();
    Rng rng(config.seed);

    const Vec3 extent{config.dims.nx * config.spacing_mm.x, config.dims.ny * config.spacing_mm.y,
                      config.dims.nz * config.spacing_mm.z};
    const Vec3 lo = config.origin_mm;
    const Vec3 hi = lo + extent;

    // -- node placement -----------------------------------------------------
    std::vector<Ellipsoid> nodes;
    for (int i = 0; i < config.n_nodes; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxPlacementTries && !placed; ++attempt) {
            const double base = rng.uniform(config.node_radius_min_mm, config.node_radius_max_mm);
            Ellipsoid e;
            e.semi_axes = {base * rng.uniform(0.85, 1.15), base * rng.uniform(0.85, 1.15),
                           base * rng.uniform(0.85, 1.15)};
            const double margin = e.max_semi() + 5.0;
            if (2 * margin >= extent.x || 2 * margin >= extent.y || 2 * margin >= extent.z)
                throw DataError("phantom volume too small for the configured node radius");
            e.center = uniform_in_box(rng, lo + Vec3{margin, margin, margin},
                                      hi - Vec3{margin, margin, margin});
            bool clear = true;
            for (const auto& other : nodes) {
                const double min_sep = e.max_semi() + other.max_semi() + 4.0;
                if (norm(e.center - other.center) < min_sep) {
                    clear = false;
                    break;
                }
            }
            if (clear) {
                nodes.push_back(e);
                placed = true;
            }
        }
        if (!placed) throw DataError("phantom node placement failed; volume too crowded");
    }

    // -- tube placement -----------------------------------------------------
    // tube length scales with the volume so small phantoms stay placeable
    const double min_extent = std::min({extent.x, extent.y, extent.z});
    const double half_len_lo = std::clamp(0.15 * min_extent, 6.0, 18.0);
    const double half_len_hi = std::clamp(0.30 * min_extent, half_len_lo + 2.0, 30.0);
    std::vector<Tube> tubes;
    for (int i = 0; i < config.n_distractors; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxPlacementTries && !placed; ++attempt) {
            Tube t;
            t.radius = rng.uniform(2.5, 4.5);
            const double half_len = rng.uniform(half_len_lo, half_len_hi);
            const double margin = t.radius + 4.0;
            const Vec3 center = uniform_in_box(rng, lo + Vec3{margin, margin, margin},
                                               hi - Vec3{margin, margin, margin});
            const Vec3 dir = random_unit_vector(rng);
            t.a = center - dir * half_len;
            t.b = center + dir * half_len;
            // keep endpoints inside the volume
            const auto inside = [&](const Vec3& p) {
                return p.x > lo.x + 2 && p.x < hi.x - 2 && p.y > lo.y + 2 && p.y < hi.y - 2 &&
                       p.z > lo.z + 2 && p.z < hi.z - 2;
            };
            if (!inside(t.a) || !inside(t.b)) continue;

            bool clear = true;
            for (const auto& node : nodes) {
                // node centers stay detectably far from every tube, and the
                // tube candidate point (segment midpoint region) stays a
                // legal negative
                const double clearance =
                    std::max(node.max_semi() + t.radius + 3.0, kNegativeClearanceMm + 1.0);
                if (point_segment_distance(node.center, t.a, t.b) < clearance) {
                    clear = false;
                    break;
                }
            }
            for (const auto& other : tubes) {
                if (!clear) break;
                if (segment_segment_distance(t.a, t.b, other.a, other.b) <
                    t.radius + other.radius + 2.0)
                    clear = false;
            }
            if (clear) {
                tubes.push_back(t);
                placed = true;
            }
        }
        if (!placed) throw DataError("phantom distractor placement failed; volume too crowded");
    }

    // -- voxel synthesis ----------------------------------------------------
    std::vector<float> voxels(config.dims.count());
    for (auto& v : voxels)
        v = static_cast<float>(config.background_hu + config.noise_stddev_hu * rng.normal());

    const double falloff_mm =
        std::max({config.spacing_mm.x, config.spacing_mm.y, config.spacing_mm.z});

    Volume volume(config.dims, config.spacing_mm, config.origin_mm, std::move(voxels));

    const auto paint = [&](const Vec3& bb_lo, const Vec3& bb_hi, auto&& inside_depth_mm) {
        const auto to_index = [&](double w, double o, double s, int n, bool up) {
            const double idx = (w - o) / s;
            int i = up ? static_cast<int>(std::ceil(idx)) : static_cast<int>(std::floor(idx));
            return std::clamp(i, 0, n - 1);
        };
        const int i0 = to_index(bb_lo.x, config.origin_mm.x, config.spacing_mm.x, config.dims.nx, false);
        const int i1 = to_index(bb_hi.x, config.origin_mm.x, config.spacing_mm.x, config.dims.nx, true);
        const int j0 = to_index(bb_lo.y, config.origin_mm.y, config.spacing_mm.y, config.dims.ny, false);
        const int j1 = to_index(bb_hi.y, config.origin_mm.y, config.spacing_mm.y, config.dims.ny, true);
        const int k0 = to_index(bb_lo.z, config.origin_mm.z, config.spacing_mm.z, config.dims.nz, false);
        const int k1 = to_index(bb_hi.z, config.origin_mm.z, config.spacing_mm.z, config.dims.nz, true);
        for (int k = k0; k <= k1; ++k) {
            for (int j = j0; j <= j1; ++j) {
                for (int i = i0; i <= i1; ++i) {
                    const Vec3 p = volume.voxel_center_mm(i, j, k);
                    const double depth = inside_depth_mm(p);  // > 0 inside the object
                    if (depth <= 0.0) continue;
                    const double alpha = std::min(1.0, depth / falloff_mm);
                    float& v = volume.at(i, j, k);
                    // keep a reduced noise texture inside the object
                    const double tissue =
                        config.node_hu + 0.3 * (v - config.background_hu);
                    v = static_cast<float>((1.0 - alpha) * v + alpha * tissue);
                }
            }
        }
    };

    for (const auto& e : nodes) {
        const double pad = e.max_semi() + falloff_mm + 1.0;
        paint(e.center - Vec3{pad, pad, pad}, e.center + Vec3{pad, pad, pad},
              [&](const Vec3& p) {
                  const Vec3 d = p - e.center;
                  const double f = std::sqrt((d.x / e.semi_axes.x) * (d.x / e.semi_axes.x) +
                                             (d.y / e.semi_axes.y) * (d.y / e.semi_axes.y) +
                                             (d.z / e.semi_axes.z) * (d.z / e.semi_axes.z));
                  return (1.0 - f) * e.min_semi();
              });
    }
    for (const auto& t : tubes) {
        const double pad = t.radius + falloff_mm + 1.0;
        const Vec3 bb_lo{std::min(t.a.x, t.b.x) - pad, std::min(t.a.y, t.b.y) - pad,
                         std::min(t.a.z, t.b.z) - pad};
        const Vec3 bb_hi{std::max(t.a.x, t.b.x) + pad, std::max(t.a.y, t.b.y) + pad,
                         std::max(t.a.z, t.b.z) + pad};
        paint(bb_lo, bb_hi, [&](const Vec3& p) {
            return t.radius - point_segment_distance(p, t.a, t.b);
        });
    }

    // -- candidate list -----------------------------------------------------
    std::vector<Candidate> candidates;
    std::uint32_t index = 0;
    for (const auto& e : nodes)
        candidates.push_back({patient_id, e.center, 1, index++});

    const auto far_from_nodes = [&](const Vec3& p) {
        for (const auto& e : nodes)
            if (norm(p - e.center) <= kNegativeClearanceMm) return false;
        return true;
    };

    for (const auto& t : tubes) {
        const Vec3 mid = (t.a + t.b) * 0.5;
        if (!far_from_nodes(mid))
            throw DataError("phantom internal error: tube candidate too close to a node");
        candidates.push_back({patient_id, mid, 0, index++});
    }

    for (int i = 0; i < config.n_background_negatives; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxPlacementTries && !placed; ++attempt) {
            const Vec3 p = uniform_in_box(rng, lo + Vec3{8, 8, 8}, hi - Vec3{8, 8, 8});
            if (!far_from_nodes(p)) continue;
            bool in_tube = false;
            for (const auto& t : tubes) {
                if (point_segment_distance(p, t.a, t.b) < t.radius + 3.0) {
                    in_tube = true;
                    break;
                }
            }
            if (in_tube) continue;
            candidates.push_back({patient_id, p, 0, index++});
            placed = true;
        }
        if (!placed)
            throw DataError("phantom background negative placement failed; volume too crowded");
    }

    return {std::move(volume), std::move(candidates)};
}

std::vector<PatientPhantom> generate_cohort(int n_patients, const PhantomConfig& config,
                                            std::uint64_t seed) {
    if (n_patients < 1) throw DataError("cohort needs n_patients >= 1");
    config.validate();

    std::vector<PatientPhantom> cohort;
    cohort.reserve(static_cast<std::size_t>(n_patients));
    std::uint32_t next_index = 0;
    for (int p = 0; p < n_patients; ++p) {
        Rng sub = Rng::substream(seed, static_cast<std::uint64_t>(p));
        PhantomConfig pc = config;
        pc.seed = sub.next_u64();
        if (config.n_nodes > 0)
            pc.n_nodes = std::max(1, config.n_nodes - 1 + static_cast<int>(sub.below(3)));
        if (config.n_distractors > 0)
            pc.n_distractors =
                std::max(1, config.n_distractors - 2 + static_cast<int>(sub.below(5)));

        char id[32];
        std::snprintf(id, sizeof(id), "p%04d", p);
        auto [volume, candidates] = generate_phantom(pc, id);
        for (auto& c : candidates) c.index = next_index++;
        cohort.push_back({id, std::move(volume), std::move(candidates)});
    }
    return cohort;
}

}  // namespace lncade
