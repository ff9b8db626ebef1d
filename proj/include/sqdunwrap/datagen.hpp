#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqdunwrap/phase_core.hpp"

namespace sqdunwrap {

struct IntRange {
    int lo = 0;
    int hi = 0;
};

struct RealRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Synthetic surface generator settings. Defaults describe 256x256 images;
/// use scaled_for() for other sizes.
struct GenConfig {
    std::size_t image_size = 256;
    std::size_t count = 6000;
    IntRange n_gaussians{3, 12};
    RealRange amplitude{5.0, 25.0}; // magnitude; sign is drawn separately
    RealRange sigma{12.0, 90.0};    // pixels, per axis
    RealRange slope{-0.06, 0.06};   // radians per pixel
    RealRange value_range{-44.0, 44.0};
    std::vector<double> noise_menu; // SNR levels in dB, empty = noise free
    std::uint64_t seed = 0;

    /// Defaults with amplitudes, widths and value range scaled by size/256,
    /// which keeps per-pixel phase gradients at the 256x256 statistics.
    static GenConfig scaled_for(std::size_t size);

    void validate() const;
};

void to_json(nlohmann::json &j, const GenConfig &c);
void from_json(const nlohmann::json &j, GenConfig &c);

struct GaussianBump {
    double amplitude = 0.0; // signed
    double center_x = 0.0;
    double center_y = 0.0;
    double sigma_major = 1.0;
    double sigma_minor = 1.0;
    double rotation = 0.0;
};

/// Random draw describing one surface before rendering.
struct SurfaceParams {
    std::vector<GaussianBump> bumps;
    double slope_x = 0.0;
    double slope_y = 0.0;
};

SurfaceParams draw_surface(std::mt19937_64 &rng, const GenConfig &config);

/// Renders the mixture plus ramp and applies the value-range rescale.
PhaseImage render_surface(const SurfaceParams &surface, const GenConfig &config);

PhaseImage synth_phase(std::mt19937_64 &rng, const GenConfig &config);

/// Independent RNG stream for (seed, stream index).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index);

struct Sample {
    WrappedImage wrapped;
    PhaseImage truth; // always the clean phase
    std::optional<double> snr_db;
};

/// Sample `index` of a dataset, in double precision.
Sample make_sample(const GenConfig &config, std::size_t index);

/// Float value stored for a wrapped phase; kept inside (-pi, pi] after rounding.
float to_stored_wrapped(double v);

inline constexpr int kDatasetVersion = 1;

struct ImageRecord {
    std::uint64_t offset = 0; // byte offset into wrapped.bin / truth.bin
    std::optional<double> snr_db;
};

struct DatasetManifest {
    int version = kDatasetVersion;
    GenConfig config;
    std::vector<ImageRecord> records;
};

void to_json(nlohmann::json &j, const DatasetManifest &m);
void from_json(const nlohmann::json &j, DatasetManifest &m);

/// Writes manifest.json, wrapped.bin and truth.bin into out_dir. The bytes
/// do not depend on `threads`.
DatasetManifest generate_dataset(const GenConfig &config, const std::filesystem::path &out_dir,
                                 unsigned threads = 0);

/// Read access to a dataset directory. Images are read on demand.
class Dataset {
  public:
    explicit Dataset(const std::filesystem::path &dir);

    std::size_t size() const { return manifest_.records.size(); }
    std::size_t height() const { return manifest_.config.image_size; }
    std::size_t width() const { return manifest_.config.image_size; }
    const DatasetManifest &manifest() const { return manifest_; }
    const std::filesystem::path &directory() const { return dir_; }

    Sample load(std::size_t index) const;

  private:
    std::vector<float> read_floats(std::ifstream &file, std::uint64_t offset) const;

    std::filesystem::path dir_;
    DatasetManifest manifest_;
    mutable std::mutex io_mutex_;
    mutable std::ifstream wrapped_;
    mutable std::ifstream truth_;
};

Dataset load_dataset(const std::filesystem::path &dir);

/// Seeded train/test partition: a shuffled permutation whose first
/// count - count/6 entries are training images.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
Split split_indices(std::size_t count, std::uint64_t seed);

/// Worker count from SQDUNWRAP_THREADS, else hardware concurrency.
unsigned default_thread_count();

} // namespace sqdunwrap
