#include "lncade/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "lncade/errors.hpp"

namespace lncade {

std::vector<FrocPoint> froc_curve(std::span<const CandidateScore> scores, int n_volumes) {
    if (scores.empty()) throw DataError("froc_curve needs a non-empty score list");
    if (n_volumes <= 0) throw DataError("froc_curve needs n_volumes >= 1");

    std::size_t total_pos = 0;
    for (const auto& s : scores) total_pos += s.label ? 1 : 0;
    if (total_pos == 0) throw DataError("froc_curve needs at least one positive candidate");

    std::vector<const CandidateScore*> sorted;
    sorted.reserve(scores.size());
    for (const auto& s : scores) sorted.push_back(&s);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        return a->probability > b->probability;
    });

    std::vector<FrocPoint> curve;
    std::size_t cum_pos = 0, cum_neg = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        const double t = sorted[i]->probability;
        while (i < sorted.size() && sorted[i]->probability == t) {
            (sorted[i]->label ? cum_pos : cum_neg) += 1;
            ++i;
        }
        curve.push_back({t, static_cast<double>(cum_pos) / static_cast<double>(total_pos),
                         static_cast<double>(cum_neg) / static_cast<double>(n_volumes)});
    }
    return curve;
}

double sensitivity_at_fp(std::span<const FrocPoint> curve, double fp_per_vol) {
    double best = 0.0;
    for (const auto& p : curve) {
        if (p.fp_per_volume <= fp_per_vol && p.sensitivity > best) best = p.sensitivity;
    }
    return best;
}

double roc_auc(std::span<const CandidateScore> scores) {
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& s : scores) (s.label ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw DataError("roc_auc needs at least one candidate of each class");

    // rank-sum with average ranks for ties
    std::vector<const CandidateScore*> sorted;
    sorted.reserve(scores.size());
    for (const auto& s : scores) sorted.push_back(&s);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        return a->probability < b->probability;
    });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j]->probability == sorted[i]->probability) ++j;
        // ranks i+1 .. j (1-based); average rank for the tie group
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t) {
            if (sorted[t]->label) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                                        static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_points(std::span<const CandidateScore> scores) {
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& s : scores) (s.label ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw DataError("roc_points needs at least one candidate of each class");

    std::vector<const CandidateScore*> sorted;
    sorted.reserve(scores.size());
    for (const auto& s : scores) sorted.push_back(&s);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        return a->probability > b->probability;
    });

    std::vector<RocPoint> curve;
    std::size_t cum_pos = 0, cum_neg = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        const double t = sorted[i]->probability;
        while (i < sorted.size() && sorted[i]->probability == t) {
            (sorted[i]->label ? cum_pos : cum_neg) += 1;
            ++i;
        }
        curve.push_back({t, static_cast<double>(cum_pos) / static_cast<double>(n_pos),
                         static_cast<double>(cum_neg) / static_cast<double>(n_neg)});
    }
    return curve;
}

double fisher_exact(const std::array<std::array<std::int64_t, 2>, 2>& table) {
    const std::int64_t a = table[0][0], b = table[0][1];
    const std::int64_t c = table[1][0], d = table[1][1];
    if (a < 0 || b < 0 || c < 0 || d < 0)
        throw DataError("fisher_exact requires non-negative counts");

    const std::int64_t r1 = a + b, r2 = c + d;
    const std::int64_t c1 = a + c, c2 = b + d;
    const std::int64_t n = r1 + r2;
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) return 1.0;

    const auto log_fact = [](std::int64_t v) {
        return std::lgamma(static_cast<double>(v) + 1.0);
    };
    // log P(x) for cell (0,0) = x with fixed margins (hypergeometric)
    const double log_denom = log_fact(n) - log_fact(r1) - log_fact(r2);
    const auto log_prob = [&](std::int64_t x) {
        return log_fact(c1) - log_fact(x) - log_fact(c1 - x) + log_fact(c2) -
               log_fact(r1 - x) - log_fact(c2 - (r1 - x)) - log_denom;
    };

    const std::int64_t x_lo = std::max<std::int64_t>(0, r1 - c2);
    const std::int64_t x_hi = std::min(r1, c1);
    const double log_obs = log_prob(a);
    const double cutoff = log_obs + std::log1p(1e-12);

    double p = 0.0;
    for (std::int64_t x = x_lo; x <= x_hi; ++x) {
        const double lp = log_prob(x);
        if (lp <= cutoff) p += std::exp(lp);
    }
    return p < 1.0 ? p : 1.0;
}

int FoldAssignment::fold(const std::string& patient_id) const {
    const auto it = fold_of.find(patient_id);
    if (it == fold_of.end()) throw DataError("patient '" + patient_id + "' has no fold");
    return it->second;
}

FoldAssignment make_folds(std::span<const std::string> patient_ids, int k,
                          std::uint64_t seed) {
    if (k < 2) throw DataError("cross-validation needs k >= 2");
    std::vector<std::string> unique;
    for (const auto& id : patient_ids) {
        if (std::find(unique.begin(), unique.end(), id) == unique.end()) unique.push_back(id);
    }
    if (unique.size() < static_cast<std::size_t>(k))
        throw DataError("need at least k patients for k folds");

    Rng rng(seed);
    for (std::size_t i = unique.size() - 1; i > 0; --i) {
        const std::size_t j = rng.below(i + 1);
        std::swap(unique[i], unique[j]);
    }

    FoldAssignment fa;
    fa.k = k;
    for (std::size_t i = 0; i < unique.size(); ++i)
        fa.fold_of[unique[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    return fa;
}

std::vector<std::size_t> balance_training_set(std::span<const std::uint8_t> labels,
                                              std::span<const std::size_t> indices, Rng& rng) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i : indices) {
        if (i >= labels.size()) throw DataError("balance index out of range");
        (labels[i] ? pos : neg).push_back(i);
    }
    if (pos.empty() || neg.empty())
        throw DataError("balancing requires both classes present");

    std::vector<std::size_t> out(indices.begin(), indices.end());
    const auto& minority = pos.size() < neg.size() ? pos : neg;
    const std::size_t deficit =
        (pos.size() < neg.size() ? neg.size() : pos.size()) - minority.size();
    for (std::size_t i = 0; i < deficit; ++i)
        out.push_back(minority[rng.below(minority.size())]);
    return out;
}

int label_by_distance(const Vec3& candidate_mm, std::span<const Vec3> truth_centers_mm,
                      double radius_mm) {
    for (const auto& t : truth_centers_mm) {
        const Vec3 d = candidate_mm - t;
        if (dot(d, d) <= radius_mm * radius_mm) return 1;
    }
    return 0;
}

void save_froc_csv(std::span<const FrocPoint> curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write FROC csv: " + path.string());
    out << "threshold,sensitivity,fp_per_volume\n";
    char buf[128];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.threshold, p.sensitivity,
                      p.fp_per_volume);
        out << buf;
    }
    if (!out) throw DataError("failed writing FROC csv: " + path.string());
}

void save_roc_csv(std::span<const RocPoint> curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write ROC csv: " + path.string());
    out << "threshold,tpr,fpr\n";
    char buf[128];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.threshold, p.tpr, p.fpr);
        out << buf;
    }
    if (!out) throw DataError("failed writing ROC csv: " + path.string());
}

void save_froc_svg(std::span<const FrocSeries> series, const std::filesystem::path& path,
                   double max_fp_per_volume) {
    static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    constexpr int kWidth = 640, kHeight = 480;
    constexpr double kLeft = 70, kRight = 20, kTop = 20, kBottom = 50;
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;

    double max_fp = max_fp_per_volume;
    if (max_fp <= 0.0) {
        for (const auto& s : series)
            for (const auto& p : s.points) max_fp = std::max(max_fp, p.fp_per_volume);
        if (max_fp <= 0.0) max_fp = 1.0;
    }

    const auto sx = [&](double fp) { return kLeft + plot_w * (fp / max_fp); };
    const auto sy = [&](double sens) { return kTop + plot_h * (1.0 - sens); };

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write SVG: " + path.string());
    char buf[512];
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // axes + grid
    for (int i = 0; i <= 10; ++i) {
        const double sens = i / 10.0;
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                      "stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
                      sx(0.0), sy(sens), sx(max_fp), sy(sens));
        out << buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\" "
                      "fill=\"#333333\">%.1f</text>\n",
                      kLeft - 6.0, sy(sens) + 4.0, sens);
        out << buf;
    }
    const int x_ticks = 6;
    for (int i = 0; i <= x_ticks; ++i) {
        const double fp = max_fp * i / x_ticks;
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                      "stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
                      sx(fp), sy(0.0), sx(fp), sy(1.0));
        out << buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\" "
                      "fill=\"#333333\">%.2g</text>\n",
                      sx(fp), sy(0.0) + 18.0, fp);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"13\" text-anchor=\"middle\" "
                  "fill=\"#000000\">false positives per volume</text>\n",
                  kLeft + plot_w / 2.0, static_cast<double>(kHeight) - 12.0);
    out << buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"16\" y=\"%.1f\" font-size=\"13\" text-anchor=\"middle\" "
                  "fill=\"#000000\" transform=\"rotate(-90 16 %.1f)\">sensitivity</text>\n",
                  kTop + plot_h / 2.0, kTop + plot_h / 2.0);
    out << buf;

    // step curves, clipped to the FP range
    for (std::size_t s = 0; s < series.size(); ++s) {
        std::vector<FrocPoint> pts(series[s].points.begin(), series[s].points.end());
        std::sort(pts.begin(), pts.end(), [](const FrocPoint& a, const FrocPoint& b) {
            return a.fp_per_volume < b.fp_per_volume;
        });
        std::string d;
        char seg[96];
        bool started = false;
        double last_sens = 0.0;
        for (const auto& p : pts) {
            const double fp = std::min(p.fp_per_volume, max_fp);
            if (!started) {
                std::snprintf(seg, sizeof(seg), "M %.2f %.2f", sx(fp), sy(p.sensitivity));
                started = true;
            } else {
                std::snprintf(seg, sizeof(seg), " L %.2f %.2f L %.2f %.2f", sx(fp),
                              sy(last_sens), sx(fp), sy(p.sensitivity));
            }
            d += seg;
            last_sens = p.sensitivity;
            if (p.fp_per_volume >= max_fp) break;
        }
        if (started) {
            std::snprintf(seg, sizeof(seg), " L %.2f %.2f", sx(max_fp), sy(last_sens));
            d += seg;
        }
        const char* color = kColors[s % (sizeof(kColors) / sizeof(kColors[0]))];
        out << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" fill=\"%s\">%s</text>\n",
                      kLeft + plot_w - 150.0, kTop + 18.0 + 16.0 * static_cast<double>(s),
                      color, series[s].label.c_str());
        out << buf;
    }

    // frame
    std::snprintf(buf, sizeof(buf),
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                  "stroke=\"#000000\" stroke-width=\"1\"/>\n",
                  kLeft, kTop, plot_w, plot_h);
    out << buf;
    out << "</svg>\n";
    if (!out) throw DataError("failed writing SVG: " + path.string());
}

}  // namespace lncade
