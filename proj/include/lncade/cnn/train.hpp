#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lncade/cnn/model.hpp"
#include "lncade/view_sampler.hpp"

namespace lncade::cnn {

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    int batch_size = 64;
    int epochs = 30;
    double dropconnect_rate = 0.5;
    double weight_init_stddev = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double train_accuracy = 0.0;
};

struct TrainResult {
    Model model;
    std::vector<EpochStats> log;
};

// Minibatch SGD with momentum over a seeded shuffle of `sample_indices`
// (records of `data`). DropConnect rates in the architecture are set from
// the config. Single-threaded and bit-deterministic per seed.
// Throws DataError if the selected samples are single-class, NumericError
// if the loss turns non-finite (divergence).
TrainResult train(const PatchDataset& data, std::span<const std::size_t> sample_indices,
                  const Architecture& arch, const TrainConfig& config);

// All records of the dataset.
TrainResult train(const PatchDataset& data, const Architecture& arch,
                  const TrainConfig& config);

// CSV: epoch,mean_loss,train_accuracy
void save_train_log(const std::vector<EpochStats>& log, const std::filesystem::path& path);

}  // namespace lncade::cnn
