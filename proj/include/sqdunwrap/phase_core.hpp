#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace sqdunwrap {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Dense row-major 2-D grid of doubles. Base for the two phase image types.
class ImageGrid {
  public:
    ImageGrid() = default;
    ImageGrid(std::size_t height, std::size_t width, std::vector<double> values);
    ImageGrid(std::size_t height, std::size_t width, double fill = 0.0);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return values_.size(); }

    double operator()(std::size_t y, std::size_t x) const { return values_[y * width_ + x]; }
    double &operator()(std::size_t y, std::size_t x) { return values_[y * width_ + x]; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    bool same_shape(const ImageGrid &other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

  protected:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> values_;
};

/// True (unwrapped) phase in radians. Every value finite, at least 2x2.
class PhaseImage : public ImageGrid {
  public:
    PhaseImage() = default;
    PhaseImage(std::size_t height, std::size_t width, std::vector<double> values);
    PhaseImage(std::size_t height, std::size_t width, double fill = 0.0);
};

/// Observed phase, every value in (-pi, pi].
class WrappedImage : public ImageGrid {
  public:
    WrappedImage() = default;
    /// Validates the range; throws InvalidInput otherwise.
    WrappedImage(std::size_t height, std::size_t width, std::vector<double> values);
};

struct NoiseSpec {
    double snr_db = std::numeric_limits<double>::infinity(); // +inf means no noise
    std::uint64_t rng_seed = 0;
};

/// Principal value of a single angle, in (-pi, pi].
double wrap_scalar(double v);

/// Elementwise principal value: angle of exp(i*phase).
WrappedImage wrap(const ImageGrid &phase);

/// Itoh integration of wrapped differences. out[0] = seq[0].
std::vector<double> itoh_unwrap_1d(std::span<const double> seq);

/// Adds zero-mean Gaussian noise whose variance is var(phase) / 10^(snr/10).
PhaseImage add_noise(const PhaseImage &phase, const NoiseSpec &spec);

/// Root-mean-square error over the range of truth, in percent.
double nrmse(const ImageGrid &pred, const ImageGrid &truth);

/// Same as nrmse after removing the mean error (the constant offset that
/// minimizes the squared error against truth).
double nrmse_offset_corrected(const ImageGrid &pred, const ImageGrid &truth);

inline constexpr double kDefaultCongruenceTol = 1e-3;

/// Fraction of pixels whose re-wrapped prediction agrees with the observation.
double congruence_fraction(const ImageGrid &pred, const WrappedImage &observed,
                           double tol = kDefaultCongruenceTol);

/// Mean and population variance of a set of values.
struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};
Moments moments(std::span<const double> values);

} // namespace sqdunwrap
