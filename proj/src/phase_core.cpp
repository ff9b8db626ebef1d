#include "sqdunwrap/phase_core.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <string>

#include "sqdunwrap/errors.hpp"

namespace sqdunwrap {

namespace {

void require_finite(std::span<const double> values, const char *what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw InvalidInput(std::string(what) + ": non-finite phase value");
        }
    }
}

void require_same_shape(const ImageGrid &a, const ImageGrid &b, const char *what) {
    if (!a.same_shape(b)) {
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.height()) + "x" +
                                std::to_string(a.width()) + " vs " + std::to_string(b.height()) +
                                "x" + std::to_string(b.width()));
    }
}

} // namespace

ImageGrid::ImageGrid(std::size_t height, std::size_t width, std::vector<double> values)
    : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != height_ * width_) {
        throw DimensionMismatch("image: value count " + std::to_string(values_.size()) +
                                " does not match " + std::to_string(height_) + "x" +
                                std::to_string(width_));
    }
}

ImageGrid::ImageGrid(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), values_(height * width, fill) {}

PhaseImage::PhaseImage(std::size_t height, std::size_t width, std::vector<double> values)
    : ImageGrid(height, width, std::move(values)) {
    if (height_ < 2 || width_ < 2) {
        throw InvalidInput("phase image must be at least 2x2");
    }
    require_finite(values_, "phase image");
}

PhaseImage::PhaseImage(std::size_t height, std::size_t width, double fill)
    : PhaseImage(height, width, std::vector<double>(height * width, fill)) {}

WrappedImage::WrappedImage(std::size_t height, std::size_t width, std::vector<double> values)
    : ImageGrid(height, width, std::move(values)) {
    for (double v : values_) {
        if (!(v > -kPi && v <= kPi)) {
            throw InvalidInput("wrapped image value outside (-pi, pi]");
        }
    }
}

double wrap_scalar(double v) {
    // Values already in the principal range are returned untouched so that
    // wrapping is exactly idempotent.
    if (v > -kPi && v <= kPi) {
        return v;
    }
    const double angle = std::arg(std::polar(1.0, v));
    return angle <= -kPi ? kPi : angle;
}

WrappedImage wrap(const ImageGrid &phase) {
    require_finite(phase.values(), "wrap");
    std::vector<double> out(phase.size());
    std::ranges::transform(phase.values(), out.begin(), wrap_scalar);
    return WrappedImage(phase.height(), phase.width(), std::move(out));
}

std::vector<double> itoh_unwrap_1d(std::span<const double> seq) {
    std::vector<double> out(seq.size());
    if (seq.empty()) {
        return out;
    }
    out[0] = seq[0];
    for (std::size_t k = 1; k < seq.size(); ++k) {
        out[k] = out[k - 1] + wrap_scalar(seq[k] - seq[k - 1]);
    }
    return out;
}

Moments moments(std::span<const double> values) {
    Moments m;
    if (values.empty()) {
        return m;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    m.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) {
        sq += (v - m.mean) * (v - m.mean);
    }
    m.variance = sq / static_cast<double>(values.size());
    return m;
}

PhaseImage add_noise(const PhaseImage &phase, const NoiseSpec &spec) {
    if (std::isinf(spec.snr_db) && spec.snr_db > 0) {
        return phase;
    }
    if (!std::isfinite(spec.snr_db)) {
        throw InvalidInput("add_noise: snr_db must be finite or +inf");
    }
    const double signal_power = moments(phase.values()).variance;
    if (!(signal_power > 0.0)) {
        throw DegenerateSignal("add_noise: constant image has no signal power, SNR undefined");
    }
    const double sigma = std::sqrt(signal_power / std::pow(10.0, spec.snr_db / 10.0));
    std::mt19937_64 rng(spec.rng_seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::vector<double> out(phase.values().begin(), phase.values().end());
    for (double &v : out) {
        v += gauss(rng);
    }
    return PhaseImage(phase.height(), phase.width(), std::move(out));
}

double nrmse(const ImageGrid &pred, const ImageGrid &truth) {
    require_same_shape(pred, truth, "nrmse");
    const auto [lo, hi] = std::ranges::minmax(truth.values());
    const double range = hi - lo;
    if (!(range > 0.0)) {
        throw DegenerateSignal("nrmse: truth has zero range");
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double e = pred.values()[i] - truth.values()[i];
        sq += e * e;
    }
    return 100.0 * std::sqrt(sq / static_cast<double>(truth.size())) / range;
}

double nrmse_offset_corrected(const ImageGrid &pred, const ImageGrid &truth) {
    require_same_shape(pred, truth, "nrmse");
    std::vector<double> err(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        err[i] = pred.values()[i] - truth.values()[i];
    }
    const double offset = moments(err).mean;
    ImageGrid shifted(pred.height(), pred.width(),
                      std::vector<double>(pred.values().begin(), pred.values().end()));
    for (double &v : shifted.values()) {
        v -= offset;
    }
    return nrmse(shifted, truth);
}

double congruence_fraction(const ImageGrid &pred, const WrappedImage &observed, double tol) {
    require_same_shape(pred, observed, "congruence_fraction");
    if (!(tol > 0.0)) {
        throw InvalidInput("congruence_fraction: tolerance must be positive");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double rewrapped = wrap_scalar(pred.values()[i]);
        if (std::abs(wrap_scalar(rewrapped - observed.values()[i])) <= tol) {
            ++hits;
        }
    }
    return observed.size() == 0 ? 0.0
                                : static_cast<double>(hits) / static_cast<double>(observed.size());
}

} // namespace sqdunwrap
