#include "lncade/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "lncade/errors.hpp"
#include "lncade/evaluation.hpp"
#include "lncade/parallel.hpp"
#include "lncade/scoring.hpp"

namespace lncade {

namespace {

// substream domains so per-candidate, per-patient, and per-fold streams
// never collide (candidate indices stay below 2^32)
constexpr std::uint64_t kPatientDomain = 0x100000000ULL;
constexpr std::uint64_t kTrainDomain = 0x200000000ULL;
constexpr std::uint64_t kBalanceDomain = 0x300000000ULL;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "' has a malformed number: " + v);
    }
}

long long parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "' has a malformed integer: " + v);
    }
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::filesystem::path PipelineConfig::model_file(int fold) const {
    char name[32];
    std::snprintf(name, sizeof(name), "fold%d.cnn", fold);
    return models_dir() / name;
}

std::filesystem::path PipelineConfig::train_log_file(int fold) const {
    char name[32];
    std::snprintf(name, sizeof(name), "trainlog_fold%d.csv", fold);
    return models_dir() / name;
}

SamplerConfig PipelineConfig::extraction_sampler() const {
    SamplerConfig s = sampler;
    if (extract_n_translations > 0) s.n_translations = extract_n_translations;
    if (extract_n_rotations > 0) s.n_rotations = extract_n_rotations;
    return s;
}

cnn::Architecture PipelineConfig::architecture() const {
    return parse_architecture(cnn_arch, sampler.patch_pixels);
}

void PipelineConfig::validate() const {
    sampler.validate();
    extraction_sampler().validate();
    phantom.validate();
    train.validate();
    architecture().validate();
    if (n_patients < 1) throw DataError("n_patients must be >= 1");
    if (threads < 0) throw DataError("threads must be >= 0");
    if (!(resample_mm > 0.0)) throw DataError("resample_mm must be positive");
    if (k_folds < 2) throw DataError("eval.k_folds must be >= 2");
    if (fp_per_vol_points.empty()) throw DataError("eval.fp_per_vol must be non-empty");
    for (double f : fp_per_vol_points)
        if (!(f >= 0.0)) throw DataError("eval.fp_per_vol entries must be >= 0");
    if (n_views_list.empty()) throw DataError("eval.n_views_list must be non-empty");
    for (int n : n_views_list)
        if (n < 1) throw DataError("eval.n_views_list entries must be >= 1");
}

cnn::Architecture parse_architecture(const std::string& text, int patch_pixels) {
    cnn::Architecture arch;
    arch.input = {3, patch_pixels, patch_pixels};
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        std::vector<std::string> parts;
        std::istringstream ts(tok);
        std::string p;
        while (std::getline(ts, p, ':')) parts.push_back(trim(p));
        const auto arg = [&](std::size_t i) -> int {
            if (i >= parts.size())
                throw DataError("cnn.arch layer '" + tok + "' is missing an argument");
            return static_cast<int>(parse_int(parts[i], "cnn.arch"));
        };
        if (parts[0] == "conv") {
            arch.layers.emplace_back(cnn::ConvSpec{arg(1), arg(2)});
        } else if (parts[0] == "relu") {
            arch.layers.emplace_back(cnn::ReluSpec{});
        } else if (parts[0] == "pool") {
            arch.layers.emplace_back(cnn::MaxPoolSpec{arg(1)});
        } else if (parts[0] == "fc") {
            arch.layers.emplace_back(cnn::FcSpec{arg(1)});
        } else if (parts[0] == "dropfc") {
            arch.layers.emplace_back(cnn::DropConnectFcSpec{arg(1), 0.5});
        } else if (parts[0] == "softmax") {
            arch.layers.emplace_back(cnn::SoftmaxSpec{});
        } else {
            throw DataError("cnn.arch has an unknown layer '" + parts[0] + "'");
        }
    }
    arch.validate();
    return arch;
}

PipelineConfig parse_config_text(const std::string& text) {
    PipelineConfig c;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("config line " + std::to_string(line_no) + " is not key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "out_dir") {
            c.out_dir = value;
        } else if (key == "seed") {
            c.seed = static_cast<std::uint64_t>(std::stoull(value));
        } else if (key == "threads") {
            c.threads = static_cast<int>(parse_int(value, key));
        } else if (key == "n_patients") {
            c.n_patients = static_cast<int>(parse_int(value, key));
        } else if (key == "resample_mm") {
            c.resample_mm = parse_double(value, key);
        } else if (key == "sampler.scales_mm") {
            c.sampler.scales_mm.clear();
            for (const auto& t : split_ws(value))
                c.sampler.scales_mm.push_back(parse_double(t, key));
        } else if (key == "sampler.n_translations") {
            c.sampler.n_translations = static_cast<int>(parse_int(value, key));
        } else if (key == "sampler.n_rotations") {
            c.sampler.n_rotations = static_cast<int>(parse_int(value, key));
        } else if (key == "sampler.max_translation_mm") {
            c.sampler.max_translation_mm = parse_double(value, key);
        } else if (key == "sampler.patch_pixels") {
            c.sampler.patch_pixels = static_cast<int>(parse_int(value, key));
        } else if (key == "sampler.window_lo_hu") {
            c.sampler.window.lo_hu = parse_double(value, key);
        } else if (key == "sampler.window_hi_hu") {
            c.sampler.window.hi_hu = parse_double(value, key);
        } else if (key == "extract.n_translations") {
            c.extract_n_translations = static_cast<int>(parse_int(value, key));
        } else if (key == "extract.n_rotations") {
            c.extract_n_rotations = static_cast<int>(parse_int(value, key));
        } else if (key == "phantom.dims") {
            const auto t = split_ws(value);
            if (t.size() != 3) throw DataError("phantom.dims needs three values");
            c.phantom.dims = {static_cast<int>(parse_int(t[0], key)),
                              static_cast<int>(parse_int(t[1], key)),
                              static_cast<int>(parse_int(t[2], key))};
        } else if (key == "phantom.spacing_mm") {
            const auto t = split_ws(value);
            if (t.size() != 3) throw DataError("phantom.spacing_mm needs three values");
            c.phantom.spacing_mm = {parse_double(t[0], key), parse_double(t[1], key),
                                    parse_double(t[2], key)};
        } else if (key == "phantom.n_nodes") {
            c.phantom.n_nodes = static_cast<int>(parse_int(value, key));
        } else if (key == "phantom.node_radius_min_mm") {
            c.phantom.node_radius_min_mm = parse_double(value, key);
        } else if (key == "phantom.node_radius_max_mm") {
            c.phantom.node_radius_max_mm = parse_double(value, key);
        } else if (key == "phantom.n_distractors") {
            c.phantom.n_distractors = static_cast<int>(parse_int(value, key));
        } else if (key == "phantom.n_background_negatives") {
            c.phantom.n_background_negatives = static_cast<int>(parse_int(value, key));
        } else if (key == "phantom.background_hu") {
            c.phantom.background_hu = parse_double(value, key);
        } else if (key == "phantom.noise_stddev_hu") {
            c.phantom.noise_stddev_hu = parse_double(value, key);
        } else if (key == "phantom.node_hu") {
            c.phantom.node_hu = parse_double(value, key);
        } else if (key == "cnn.arch") {
            c.cnn_arch = value;
        } else if (key == "train.learning_rate") {
            c.train.learning_rate = parse_double(value, key);
        } else if (key == "train.momentum") {
            c.train.momentum = parse_double(value, key);
        } else if (key == "train.batch_size") {
            c.train.batch_size = static_cast<int>(parse_int(value, key));
        } else if (key == "train.epochs") {
            c.train.epochs = static_cast<int>(parse_int(value, key));
        } else if (key == "train.dropconnect_rate") {
            c.train.dropconnect_rate = parse_double(value, key);
        } else if (key == "train.weight_init_stddev") {
            c.train.weight_init_stddev = parse_double(value, key);
        } else if (key == "eval.k_folds") {
            c.k_folds = static_cast<int>(parse_int(value, key));
        } else if (key == "eval.fp_per_vol") {
            c.fp_per_vol_points.clear();
            for (const auto& t : split_ws(value))
                c.fp_per_vol_points.push_back(parse_double(t, key));
        } else if (key == "eval.n_views_list") {
            c.n_views_list.clear();
            for (const auto& t : split_ws(value))
                c.n_views_list.push_back(static_cast<int>(parse_int(t, key)));
        } else {
            throw DataError("unknown config key '" + key + "'");
        }
    }
    return c;
}

PipelineConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

std::string serialize_config(const PipelineConfig& c) {
    std::ostringstream os;
    os << "out_dir = " << c.out_dir.string() << "\n";
    os << "seed = " << c.seed << "\n";
    os << "threads = " << c.threads << "\n";
    os << "n_patients = " << c.n_patients << "\n";
    os << "resample_mm = " << fmt_double(c.resample_mm) << "\n";
    os << "sampler.scales_mm =";
    for (double s : c.sampler.scales_mm) os << " " << fmt_double(s);
    os << "\n";
    os << "sampler.n_translations = " << c.sampler.n_translations << "\n";
    os << "sampler.n_rotations = " << c.sampler.n_rotations << "\n";
    os << "sampler.max_translation_mm = " << fmt_double(c.sampler.max_translation_mm) << "\n";
    os << "sampler.patch_pixels = " << c.sampler.patch_pixels << "\n";
    os << "sampler.window_lo_hu = " << fmt_double(c.sampler.window.lo_hu) << "\n";
    os << "sampler.window_hi_hu = " << fmt_double(c.sampler.window.hi_hu) << "\n";
    os << "extract.n_translations = " << c.extract_n_translations << "\n";
    os << "extract.n_rotations = " << c.extract_n_rotations << "\n";
    os << "phantom.dims = " << c.phantom.dims.nx << " " << c.phantom.dims.ny << " "
       << c.phantom.dims.nz << "\n";
    os << "phantom.spacing_mm = " << fmt_double(c.phantom.spacing_mm.x) << " "
       << fmt_double(c.phantom.spacing_mm.y) << " " << fmt_double(c.phantom.spacing_mm.z)
       << "\n";
    os << "phantom.n_nodes = " << c.phantom.n_nodes << "\n";
    os << "phantom.node_radius_min_mm = " << fmt_double(c.phantom.node_radius_min_mm) << "\n";
    os << "phantom.node_radius_max_mm = " << fmt_double(c.phantom.node_radius_max_mm) << "\n";
    os << "phantom.n_distractors = " << c.phantom.n_distractors << "\n";
    os << "phantom.n_background_negatives = " << c.phantom.n_background_negatives << "\n";
    os << "phantom.background_hu = " << fmt_double(c.phantom.background_hu) << "\n";
    os << "phantom.noise_stddev_hu = " << fmt_double(c.phantom.noise_stddev_hu) << "\n";
    os << "phantom.node_hu = " << fmt_double(c.phantom.node_hu) << "\n";
    os << "cnn.arch = " << c.cnn_arch << "\n";
    os << "train.learning_rate = " << fmt_double(c.train.learning_rate) << "\n";
    os << "train.momentum = " << fmt_double(c.train.momentum) << "\n";
    os << "train.batch_size = " << c.train.batch_size << "\n";
    os << "train.epochs = " << c.train.epochs << "\n";
    os << "train.dropconnect_rate = " << fmt_double(c.train.dropconnect_rate) << "\n";
    os << "train.weight_init_stddev = " << fmt_double(c.train.weight_init_stddev) << "\n";
    os << "eval.k_folds = " << c.k_folds << "\n";
    os << "eval.fp_per_vol =";
    for (double f : c.fp_per_vol_points) os << " " << fmt_double(f);
    os << "\n";
    os << "eval.n_views_list =";
    for (int n : c.n_views_list) os << " " << n;
    os << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

namespace {

std::filesystem::path volume_path(const PipelineConfig& c, const std::string& patient_id) {
    return c.volumes_dir() / (patient_id + ".vol");
}

std::vector<std::string> distinct_patients(const std::vector<Candidate>& candidates) {
    std::vector<std::string> out;
    for (const auto& c : candidates) {
        if (std::find(out.begin(), out.end(), c.patient_id) == out.end())
            out.push_back(c.patient_id);
    }
    return out;
}

// Load and isotropically resample every patient volume referenced by the
// candidate list.
std::map<std::string, Volume> load_resampled_volumes(const PipelineConfig& config,
                                                     const std::vector<std::string>& patients) {
    std::vector<std::optional<Volume>> slots(patients.size());
    parallel_for(patients.size(), config.threads, [&](std::size_t i) {
        Volume raw = load_volume(volume_path(config, patients[i]));
        slots[i] = resample_isotropic(raw, config.resample_mm);
    });
    std::map<std::string, Volume> out;
    for (std::size_t i = 0; i < patients.size(); ++i)
        out.emplace(patients[i], std::move(*slots[i]));
    return out;
}

void save_folds_csv(const FoldAssignment& folds, const std::vector<std::string>& patients,
                    const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write folds file: " + path.string());
    out << "patient_id,fold\n";
    for (const auto& p : patients) out << p << "," << folds.fold(p) << "\n";
    if (!out) throw DataError("failed writing folds file: " + path.string());
}

struct ViewProbTable {
    // per candidate (score-file order): all view probabilities
    std::vector<std::vector<double>> probs;
};

void save_view_probs(const std::vector<CandidateScore>& scores, const ViewProbTable& table,
                     const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write view probability file: " + path.string());
    out << "patient_id,candidate_index,view_index,probability\n";
    char buf[160];
    for (std::size_t i = 0; i < scores.size(); ++i) {
        for (std::size_t v = 0; v < table.probs[i].size(); ++v) {
            std::snprintf(buf, sizeof(buf), "%s,%u,%zu,%.17g\n", scores[i].patient_id.c_str(),
                          scores[i].candidate_index, v, table.probs[i][v]);
            out << buf;
        }
    }
    if (!out) throw DataError("failed writing view probability file: " + path.string());
}

ViewProbTable load_view_probs(const std::vector<CandidateScore>& scores,
                              const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open view probability file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.find("candidate_index") == std::string::npos)
        throw DataError("view probability file missing header: " + path.string());

    std::map<std::uint32_t, std::size_t> row_of;
    for (std::size_t i = 0; i < scores.size(); ++i) row_of[scores[i].candidate_index] = i;

    ViewProbTable table;
    table.probs.resize(scores.size());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string patient, idx, view, prob;
        if (!std::getline(is, patient, ',') || !std::getline(is, idx, ',') ||
            !std::getline(is, view, ',') || !std::getline(is, prob))
            throw DataError("malformed view probability row: " + line);
        const auto it = row_of.find(static_cast<std::uint32_t>(std::stoul(idx)));
        if (it == row_of.end())
            throw DataError("view probability row for unknown candidate: " + line);
        table.probs[it->second].push_back(std::strtod(prob.c_str(), nullptr));
    }
    return table;
}

}  // namespace

void cmd_phantom(const PipelineConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.volumes_dir());

    const auto cohort = generate_cohort(config.n_patients, config.phantom, config.seed);

    std::vector<Candidate> all;
    std::size_t positives = 0;
    for (const auto& patient : cohort) {
        save_volume(patient.volume, volume_path(config, patient.patient_id));
        for (const auto& c : patient.candidates) {
            positives += c.label ? 1 : 0;
            all.push_back(c);
        }
    }
    save_candidates(all, config.candidates_csv());
    std::cout << "phantom: " << cohort.size() << " volumes, " << all.size() << " candidates ("
              << positives << " positive) -> " << config.out_dir.string() << "\n";
}

void cmd_extract(const PipelineConfig& config) {
    config.validate();
    const auto candidates = load_candidates(config.candidates_csv());
    if (candidates.empty()) throw DataError("candidate list is empty");
    const auto patients = distinct_patients(candidates);
    const auto volumes = load_resampled_volumes(config, patients);

    SamplerConfig sampler = config.extraction_sampler();
    sampler.seed = config.seed;
    const std::size_t views = static_cast<std::size_t>(sampler.views_per_candidate());
    const std::size_t rec_floats =
        3u * static_cast<std::size_t>(sampler.patch_pixels) * sampler.patch_pixels;

    PatchDataset ds;
    ds.patch_pixels = sampler.patch_pixels;
    ds.candidate_index.resize(candidates.size() * views);
    ds.labels.resize(candidates.size() * views);
    ds.pixels.resize(candidates.size() * views * rec_floats);

    parallel_for(candidates.size(), config.threads, [&](std::size_t i) {
        const Candidate& cand = candidates[i];
        const Volume& vol = volumes.at(cand.patient_id);
        const auto observations = generate_observations(cand, sampler);
        for (std::size_t v = 0; v < views; ++v) {
            const Patch patch = extract_patch(vol, cand, observations[v], sampler);
            const std::size_t rec = i * views + v;
            ds.candidate_index[rec] = cand.index;
            ds.labels[rec] = static_cast<std::uint8_t>(cand.label);
            std::copy(patch.data.begin(), patch.data.end(),
                      ds.pixels.begin() + static_cast<std::ptrdiff_t>(rec * rec_floats));
        }
    });

    save_patches(ds, config.patches_bin());
    std::cout << "extract: " << ds.size() << " patches (" << views << " views x "
              << candidates.size() << " candidates) -> " << config.patches_bin().string()
              << "\n";
}

void cmd_train(const PipelineConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.models_dir());
    const auto candidates = load_candidates(config.candidates_csv());
    const auto ds = load_patches(config.patches_bin());
    if (ds.size() == 0) throw DataError("patch dataset is empty");

    const auto patients = distinct_patients(candidates);
    const FoldAssignment folds = make_folds(patients, config.k_folds, config.seed);
    save_folds_csv(folds, patients, config.folds_csv());

    // record -> fold via its candidate's patient
    std::vector<int> record_fold(ds.size());
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const std::uint32_t ci = ds.candidate_index[r];
        if (ci >= candidates.size())
            throw DataError("patch dataset references unknown candidate " + std::to_string(ci));
        record_fold[r] = folds.fold(candidates[ci].patient_id);
    }

    const cnn::Architecture arch = config.architecture();
    parallel_for(static_cast<std::size_t>(config.k_folds), config.threads, [&](std::size_t f) {
        std::vector<std::size_t> train_idx;
        for (std::size_t r = 0; r < ds.size(); ++r)
            if (record_fold[r] != static_cast<int>(f)) train_idx.push_back(r);
        if (train_idx.empty())
            throw DataError("fold " + std::to_string(f) + " has no training data");

        Rng balance_rng = Rng::substream(config.seed, kBalanceDomain + f);
        const auto balanced = balance_training_set(ds.labels, train_idx, balance_rng);

        cnn::TrainConfig tc = config.train;
        tc.seed = Rng::substream(config.seed, kTrainDomain + f).next_u64();
        const auto result = cnn::train(ds, balanced, arch, tc);

        save_model(result.model, config.model_file(static_cast<int>(f)));
        cnn::save_train_log(result.log, config.train_log_file(static_cast<int>(f)));
    });

    std::cout << "train: " << config.k_folds << " fold models -> "
              << config.models_dir().string() << "\n";
}

void cmd_score(const PipelineConfig& config) {
    config.validate();
    const auto candidates = load_candidates(config.candidates_csv());
    if (candidates.empty()) throw DataError("candidate list is empty");
    const auto patients = distinct_patients(candidates);
    const FoldAssignment folds = make_folds(patients, config.k_folds, config.seed);
    const auto volumes = load_resampled_volumes(config, patients);

    std::vector<cnn::Model> models;
    models.reserve(static_cast<std::size_t>(config.k_folds));
    for (int f = 0; f < config.k_folds; ++f) models.push_back(cnn::load_model(config.model_file(f)));
    for (const auto& m : models) {
        if (m.arch.input.height != config.sampler.patch_pixels)
            throw DataError("model patch size disagrees with sampler.patch_pixels");
    }

    SamplerConfig sampler = config.sampler;
    sampler.seed = config.seed;

    std::vector<CandidateScore> scores(candidates.size());
    ViewProbTable table;
    table.probs.resize(candidates.size());
    parallel_for(candidates.size(), config.threads, [&](std::size_t i) {
        const Candidate& cand = candidates[i];
        // each candidate is scored by the model that held its patient out
        const cnn::Model& model = models[static_cast<std::size_t>(folds.fold(cand.patient_id))];
        table.probs[i] = view_probabilities(model, volumes.at(cand.patient_id), cand, sampler);
        scores[i] = {cand.patient_id, cand.index, cand.label,
                     static_cast<int>(table.probs[i].size()), aggregate(table.probs[i])};
    });

    save_scores(scores, config.scores_csv());
    save_view_probs(scores, table, config.view_probs_csv());
    std::cout << "score: " << scores.size() << " candidates x " << sampler.views_per_candidate()
              << " views -> " << config.scores_csv().string() << "\n";
}

void cmd_eval(const PipelineConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.reports_dir());

    const auto scores = load_scores(config.scores_csv());
    if (scores.empty()) throw DataError("score file is empty");
    const auto table = load_view_probs(scores, config.view_probs_csv());

    std::vector<std::string> patients;
    for (const auto& s : scores)
        if (std::find(patients.begin(), patients.end(), s.patient_id) == patients.end())
            patients.push_back(s.patient_id);
    const FoldAssignment folds = make_folds(patients, config.k_folds, config.seed);
    const int n_volumes = static_cast<int>(patients.size());

    std::size_t total_views = 0;
    for (const auto& p : table.probs) total_views = std::max(total_views, p.size());

    // clamp requested N values to the available views, drop duplicates
    std::vector<int> n_list;
    for (int n : config.n_views_list) {
        const int clamped = std::min<std::size_t>(static_cast<std::size_t>(n), total_views);
        if (std::find(n_list.begin(), n_list.end(), clamped) == n_list.end())
            n_list.push_back(clamped);
    }

    // FROC per N (prefix running means), pooled over all patients
    std::vector<FrocSeries> series;
    std::map<int, std::vector<CandidateScore>> scores_at_n;
    for (int n : n_list) {
        std::vector<CandidateScore> sn = scores;
        for (std::size_t i = 0; i < sn.size(); ++i) {
            const auto& vp = table.probs[i];
            const std::size_t take = std::min(static_cast<std::size_t>(n), vp.size());
            double sum = 0.0;
            for (std::size_t v = 0; v < take; ++v) sum += vp[v];
            sn[i].probability = sum / static_cast<double>(take);
            sn[i].n_views = static_cast<int>(take);
        }
        const auto curve = froc_curve(sn, n_volumes);
        char name[64];
        std::snprintf(name, sizeof(name), "froc_pooled_N%d.csv", n);
        save_froc_csv(curve, config.reports_dir() / name);
        std::snprintf(name, sizeof(name), "N=%d", n);
        series.push_back({name, curve});
        scores_at_n.emplace(n, std::move(sn));
    }
    save_froc_svg(series, config.reports_dir() / "froc.svg");

    // per-fold curves at full N
    std::vector<std::vector<CandidateScore>> fold_scores(
        static_cast<std::size_t>(config.k_folds));
    std::vector<int> fold_volumes(static_cast<std::size_t>(config.k_folds), 0);
    for (const auto& p : patients) fold_volumes[static_cast<std::size_t>(folds.fold(p))] += 1;
    for (const auto& s : scores)
        fold_scores[static_cast<std::size_t>(folds.fold(s.patient_id))].push_back(s);

    // summary report
    std::ofstream report(config.reports_dir() / "summary.txt", std::ios::trunc);
    if (!report) throw DataError("cannot write summary report");
    char buf[256];

    std::size_t n_pos = 0;
    for (const auto& s : scores) n_pos += s.label ? 1 : 0;
    const std::size_t n_neg = scores.size() - n_pos;

    report << "candidates: " << scores.size() << " (" << n_pos << " positive, " << n_neg
           << " negative)\n";
    report << "patients: " << n_volumes << ", folds: " << config.k_folds << "\n";
    report << "views per candidate: " << total_views << "\n\n";

    const auto full_curve = froc_curve(scores, n_volumes);
    const double pooled_auc = roc_auc(scores);
    save_roc_csv(roc_points(scores), config.reports_dir() / "roc_pooled.csv");
    report << "[pooled]\n";
    std::snprintf(buf, sizeof(buf), "auc = %.6f\n", pooled_auc);
    report << buf;
    for (double fp : config.fp_per_vol_points) {
        std::snprintf(buf, sizeof(buf), "sensitivity@%gfp = %.6f\n", fp,
                      sensitivity_at_fp(full_curve, fp));
        report << buf;
    }
    for (int n : n_list) {
        const auto curve = froc_curve(scores_at_n.at(n), n_volumes);
        std::snprintf(buf, sizeof(buf), "sensitivity@%gfp[N=%d] = %.6f\n",
                      config.fp_per_vol_points.front(), n,
                      sensitivity_at_fp(curve, config.fp_per_vol_points.front()));
        report << buf;
    }

    // Fisher's exact test against the no-CNN baseline (every candidate
    // scored by the same constant, i.e. no discrimination)
    for (double fp : config.fp_per_vol_points) {
        const double sens = sensitivity_at_fp(full_curve, fp);
        const auto detected = static_cast<std::int64_t>(std::llround(
            sens * static_cast<double>(n_pos)));
        const double baseline_fp_rate =
            static_cast<double>(n_neg) / static_cast<double>(n_volumes);
        const std::int64_t baseline_detected =
            baseline_fp_rate <= fp ? static_cast<std::int64_t>(n_pos) : 0;
        const std::array<std::array<std::int64_t, 2>, 2> tab{
            {{detected, static_cast<std::int64_t>(n_pos) - detected},
             {baseline_detected, static_cast<std::int64_t>(n_pos) - baseline_detected}}};
        std::snprintf(buf, sizeof(buf), "fisher_p_vs_baseline@%gfp = %.6g\n", fp,
                      fisher_exact(tab));
        report << buf;
    }
    report << "\n";

    for (int f = 0; f < config.k_folds; ++f) {
        const auto& fs = fold_scores[static_cast<std::size_t>(f)];
        report << "[fold " << f << "]\n";
        if (fs.empty()) {
            report << "no candidates\n\n";
            continue;
        }
        char name[64];
        std::snprintf(name, sizeof(name), "froc_fold%d.csv", f);
        bool has_pos = false, has_neg = false;
        for (const auto& s : fs) (s.label ? has_pos : has_neg) = true;
        if (has_pos) {
            const auto curve = froc_curve(fs, fold_volumes[static_cast<std::size_t>(f)]);
            save_froc_csv(curve, config.reports_dir() / name);
            for (double fp : config.fp_per_vol_points) {
                std::snprintf(buf, sizeof(buf), "sensitivity@%gfp = %.6f\n", fp,
                              sensitivity_at_fp(curve, fp));
                report << buf;
            }
        }
        if (has_pos && has_neg) {
            std::snprintf(buf, sizeof(buf), "auc = %.6f\n", roc_auc(fs));
            report << buf;
            std::snprintf(name, sizeof(name), "roc_fold%d.csv", f);
            save_roc_csv(roc_points(fs), config.reports_dir() / name);
        }
        report << "\n";
    }
    if (!report) throw DataError("failed writing summary report");

    std::cout << "eval: pooled auc " << pooled_auc << ", reports -> "
              << config.reports_dir().string() << "\n";
}

void cmd_all(const PipelineConfig& config) {
    cmd_phantom(config);
    cmd_extract(config);
    cmd_train(config);
    cmd_score(config);
    cmd_eval(config);
}

}  // namespace lncade
