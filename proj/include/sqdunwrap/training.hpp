#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqdunwrap/datagen.hpp"
#include "sqdunwrap/losses.hpp"
#include "sqdunwrap/network.hpp"

namespace sqdunwrap {

struct TrainConfig {
    std::filesystem::path dataset;
    ArchConfig arch;
    LossWeights weights;
    LossKind loss = LossKind::composite;
    LossPooling pooling = LossPooling::per_image;
    double lr = 0.001;
    std::size_t batch_size = 8;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json &j, const TrainConfig &c);

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0; // mean over the epoch's batches
    double test_nrmse = 0.0; // mean offset-corrected NRMSE on the test split, percent
    double wall_seconds = 0.0;
};

struct TrainHistory {
    std::string loss_name;
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
};

/// `with_timing` = false drops wall-clock fields, leaving only values that
/// are reproducible from the seed.
nlohmann::json history_json(const TrainHistory &h, bool with_timing = true);

struct TrainResult {
    Network<float> model; // parameters of the best test-NRMSE epoch
    TrainHistory history;
    Split split;
    std::vector<std::size_t> trained_indices; // every image used in a gradient step
};

using EpochCallback = std::function<void(const EpochRecord &)>;

/// Adam on the seeded 5:1 train/test split with per-epoch reshuffling.
/// Throws TrainingDiverged on a non-finite loss.
TrainResult train(const TrainConfig &config, const Dataset &data,
                  const EpochCallback &on_epoch = {});
TrainResult train(const TrainConfig &config, const EpochCallback &on_epoch = {});

/// Stacks wrapped inputs and truths of the given images as (n, H, W, 1).
void assemble_batch(const Dataset &data, std::span<const std::size_t> indices,
                    Tensor4<float> &inputs, Tensor4<float> &targets);

// ----------------------------------------------------------------- evaluation

struct ImageResult {
    std::size_t index = 0;
    std::optional<double> snr_db;
    double nrmse = 0.0;     // offset-corrected, percent
    double nrmse_raw = 0.0; // no offset removal, percent
    double congruence = 0.0;
    double seconds = 0.0;
};

struct SnrBucket {
    std::size_t count = 0;
    double mean_nrmse = 0.0;
};

struct MethodReport {
    std::string method;
    std::vector<ImageResult> images;
    double mean_nrmse = 0.0;
    double median_nrmse = 0.0;
    double mean_nrmse_raw = 0.0;
    double mean_congruence = 0.0;
    double mean_seconds = 0.0;
    /// Keyed by SNR label ("none" for noise-free images, else the dB value).
    std::map<std::string, SnrBucket> buckets;
};

nlohmann::json method_json(const MethodReport &r, bool with_timing = true);

std::string snr_label(const std::optional<double> &snr_db);

/// Produces an unwrapped estimate for one sample.
using Predictor = std::function<PhaseImage(const Sample &)>;

/// Evaluates any predictor on the listed images. Images are processed by
/// `threads` workers (1 = serial); results are identical for any count.
MethodReport evaluate_method(const std::string &name, const Predictor &predictor,
                             const Dataset &data, std::span<const std::size_t> indices,
                             unsigned threads = 1);

/// Inference-mode network evaluation, one image at a time.
MethodReport evaluate(Network<float> &model, const Dataset &data,
                      std::span<const std::size_t> indices, const std::string &name = "model");
MethodReport evaluate(const std::filesystem::path &checkpoint, const Dataset &data,
                      std::span<const std::size_t> indices);

/// Network prediction for a single wrapped image.
PhaseImage predict(Network<float> &model, const WrappedImage &wrapped);

Predictor identity_predictor();
Predictor truth_predictor();
Predictor qgpu_predictor();

} // namespace sqdunwrap
