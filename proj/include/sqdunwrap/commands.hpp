#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sqdunwrap/datagen.hpp"
#include "sqdunwrap/report.hpp"
#include "sqdunwrap/training.hpp"

namespace sqdunwrap {

/// Process exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitInternalError = 2;

/// Runs `body`, mapping bad input (InvalidInput, CorruptDataset) to exit
/// code 1 and anything else to 2. Messages go to `err`.
int run_guarded(const std::function<void()> &body, std::ostream &err);

struct GenOptions {
    std::filesystem::path out;
    std::size_t count = 6000;
    std::size_t size = 256;
    std::uint64_t seed = 0;
    std::vector<double> noise; // empty = noise free
    std::size_t stages = 4;    // size must be divisible by 2^stages
    unsigned threads = 0;      // 0 = default_thread_count()
};

DatasetManifest cmd_gen(const GenOptions &opt, std::ostream &out);

struct TrainOptions {
    std::filesystem::path data;
    std::filesystem::path out;
    std::string loss = "lc";
    std::string pooling = "per_image";
    bool no_sqd = false;
    std::size_t epochs = 10;
    std::size_t batch = 8;
    double lr = 0.001;
    std::uint64_t seed = 0;
    std::vector<std::size_t> filters; // encoder filters; empty = 32,64,128,256
    std::size_t units = 32;
    std::size_t fusion = 64;
    double lambda1 = 1.0;
    double lambda2 = 0.1;
};

struct TrainArtifacts {
    std::filesystem::path checkpoint;
    std::filesystem::path history;
    TrainHistory history_values;
};

/// Output names carry the loss tag: model_<tag>.ckpt, history_<tag>.json,
/// with tag "lc", "mse", "lc_nosqd", ...
std::string run_tag(const TrainOptions &opt);
TrainConfig make_train_config(const TrainOptions &opt, const Dataset &data);
TrainArtifacts cmd_train(const TrainOptions &opt, std::ostream &out);

struct UnwrapOptions {
    std::filesystem::path input; // raw little-endian float32, row-major
    std::size_t height = 0;
    std::size_t width = 0;
    std::filesystem::path dataset; // alternative input: one dataset image
    std::optional<std::size_t> index;
    std::string method = "qgpu";
    std::filesystem::path checkpoint;
    std::filesystem::path out; // raw float32 result
    std::filesystem::path pgm; // optional 16-bit export
};

struct UnwrapOutcome {
    PhaseImage phase;
    double congruence = 0.0;
    std::optional<double> nrmse; // when the truth is known
};

UnwrapOutcome cmd_unwrap(const UnwrapOptions &opt, std::ostream &out);

struct CompareOptions {
    std::filesystem::path data;
    /// identity, qgpu, truth, or model:PATH. identity is always added.
    std::vector<std::string> methods;
    std::string split = "test";
    std::optional<std::uint64_t> split_seed; // default: from the first model, else 0
    std::filesystem::path out;
    unsigned threads = 0;
};

RunReport cmd_compare(const CompareOptions &opt, std::ostream &out);

// ------------------------------------------------------------------ file I/O

ImageGrid read_raw_f32(const std::filesystem::path &path, std::size_t height, std::size_t width);
void write_raw_f32(const std::filesystem::path &path, const ImageGrid &image);

/// Binary PGM, maxval 65535: pixel = round((v - min) / (max - min) * 65535).
/// A sidecar <path>.json records min and max so values can be recovered.
void write_pgm16(const std::filesystem::path &path, const ImageGrid &image);

} // namespace sqdunwrap
