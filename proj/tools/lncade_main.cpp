#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "lncade/errors.hpp"
#include "lncade/kernels/kernels.hpp"
#include "lncade/pipeline.hpp"

namespace {

// exit codes: 0 ok, 1 usage, 2 data, 3 numerical
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

int run(int argc, char** argv) {
    CLI::App app{
        "lncade - 2.5D random-view CNN false-positive reduction for volumetric "
        "candidate detection"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string isa;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<int> n_patients;

    app.add_option("--config", config_path, "pipeline config file (key = value lines)");
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--threads", threads, "worker thread cap (0 = all cores)");
    app.add_option("--isa", isa, "force a kernel ISA (scalar, avx2, neon)");

    auto* sub_phantom =
        app.add_subcommand("phantom", "generate a synthetic cohort and candidate list");
    sub_phantom->add_option("--n-patients", n_patients, "override n_patients");
    auto* sub_extract = app.add_subcommand("extract", "extract random-view patches");
    auto* sub_train = app.add_subcommand("train", "train per-fold CNN models");
    auto* sub_score = app.add_subcommand("score", "score candidates with held-out models");
    auto* sub_eval = app.add_subcommand("eval", "compute FROC/ROC reports from scores");
    auto* sub_all = app.add_subcommand("all", "run the whole pipeline");
    auto* sub_config = app.add_subcommand("config", "print the canonicalized config");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (!isa.empty() && !lncade::kernels::select_isa(isa)) {
            std::cerr << "error: kernel ISA '" << isa << "' is not available on this machine\n";
            return kExitUsage;
        }

        lncade::PipelineConfig config;
        if (!config_path.empty()) config = lncade::parse_config_file(config_path);
        if (seed) config.seed = *seed;
        if (threads) config.threads = *threads;
        if (n_patients) config.n_patients = *n_patients;

        if (sub_config->parsed()) {
            std::cout << lncade::serialize_config(config);
            return 0;
        }
        if (sub_phantom->parsed()) {
            lncade::cmd_phantom(config);
        } else if (sub_extract->parsed()) {
            lncade::cmd_extract(config);
        } else if (sub_train->parsed()) {
            lncade::cmd_train(config);
        } else if (sub_score->parsed()) {
            lncade::cmd_score(config);
        } else if (sub_eval->parsed()) {
            lncade::cmd_eval(config);
        } else if (sub_all->parsed()) {
            lncade::cmd_all(config);
        }
        return 0;
    } catch (const lncade::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const lncade::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const lncade::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
