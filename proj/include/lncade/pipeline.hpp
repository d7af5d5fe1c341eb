#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lncade/cnn/train.hpp"
#include "lncade/phantom.hpp"
#include "lncade/view_sampler.hpp"

namespace lncade {

// Whole-pipeline configuration, loadable from a line-oriented key=value
// file. Unknown keys are rejected; serialization is canonical so a parsed
// config re-serializes to a stable form.
struct PipelineConfig {
    std::filesystem::path out_dir = "run";
    std::uint64_t seed = 42;
    int threads = 0;  // 0 = all hardware threads
    int n_patients = 20;
    double resample_mm = 1.0;  // isotropic target spacing before sampling

    SamplerConfig sampler;  // scoring views (and extraction defaults)
    // Extraction-time view counts; 0 inherits the sampler value. Lets a run
    // train on fewer views per candidate than it scores with.
    int extract_n_translations = 0;
    int extract_n_rotations = 0;

    PhantomConfig phantom;

    // Compact layer-stack description, e.g.
    //   conv:16:5,relu,pool:2,conv:32:5,relu,pool:2,fc:64,relu,dropfc:2,softmax
    std::string cnn_arch =
        "conv:16:5,relu,pool:2,conv:32:5,relu,pool:2,fc:64,relu,dropfc:2,softmax";

    cnn::TrainConfig train;

    int k_folds = 3;
    std::vector<double> fp_per_vol_points{3.0, 6.0};
    std::vector<int> n_views_list{1, 5, 25, 100};

    // derived paths
    std::filesystem::path volumes_dir() const { return out_dir / "volumes"; }
    std::filesystem::path candidates_csv() const { return out_dir / "candidates.csv"; }
    std::filesystem::path patches_bin() const { return out_dir / "patches.bin"; }
    std::filesystem::path models_dir() const { return out_dir / "models"; }
    std::filesystem::path model_file(int fold) const;
    std::filesystem::path train_log_file(int fold) const;
    std::filesystem::path folds_csv() const { return out_dir / "folds.csv"; }
    std::filesystem::path scores_csv() const { return out_dir / "scores.csv"; }
    std::filesystem::path view_probs_csv() const { return out_dir / "view_probs.csv"; }
    std::filesystem::path reports_dir() const { return out_dir / "reports"; }

    SamplerConfig extraction_sampler() const;
    cnn::Architecture architecture() const;

    void validate() const;
};

// Parse a config file / text. Flags on the CLI override file values.
PipelineConfig parse_config_file(const std::filesystem::path& path);
PipelineConfig parse_config_text(const std::string& text);
std::string serialize_config(const PipelineConfig& config);

// Layer-stack DSL used by PipelineConfig::architecture().
cnn::Architecture parse_architecture(const std::string& text, int patch_pixels);

// Pipeline commands. Each is deterministic given (inputs, seed) and throws
// DataError / NumericError on failure; the CLI maps those to exit codes.
void cmd_phantom(const PipelineConfig& config);
void cmd_extract(const PipelineConfig& config);
void cmd_train(const PipelineConfig& config);
void cmd_score(const PipelineConfig& config);
void cmd_eval(const PipelineConfig& config);
void cmd_all(const PipelineConfig& config);

}  // namespace lncade
