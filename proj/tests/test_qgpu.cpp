#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "sqdunwrap/datagen.hpp"
#include "sqdunwrap/errors.hpp"
#include "sqdunwrap/qgpu.hpp"

using namespace sqdunwrap;

namespace {

PhaseImage ramp(std::size_t h, std::size_t w, double ax, double ay, double c) {
    PhaseImage p(h, w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            p(y, x) = c + ax * static_cast<double>(x) + ay * static_cast<double>(y);
    return p;
}

/// out - truth is one constant multiple of 2*pi.
void check_exact(const PhaseImage &out, const PhaseImage &truth, double tol) {
    const double k = std::round((out.values()[0] - truth.values()[0]) / kTwoPi);
    for (std::size_t i = 0; i < out.size(); ++i) {
        REQUIRE(std::abs(out.values()[i] - truth.values()[i] - k * kTwoPi) < tol);
    }
}

} // namespace

TEST_CASE("quality map") {
    SUBCASE("constant image has uniform maximal quality") {
        const QualityMap q = quality_map(WrappedImage(5, 6, std::vector<double>(30, 1.2)));
        CHECK(std::ranges::all_of(q.values(), [](double v) { return v == 0.0; }));
    }
    SUBCASE("smooth region beats a salt-noise region") {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> u(-kPi, kPi);
        PhaseImage p = ramp(20, 40, 0.4, 0.2, 0.0);
        std::vector<double> v(p.values().begin(), p.values().end());
        for (std::size_t y = 0; y < 20; ++y)
            for (std::size_t x = 20; x < 40; ++x)
                v[y * 40 + x] = u(rng);
        const QualityMap q = quality_map(wrap(PhaseImage(20, 40, v)));
        double smooth = 0.0, noisy = 0.0;
        for (std::size_t y = 0; y < 20; ++y)
            for (std::size_t x = 0; x < 18; ++x) {
                smooth += q(y, x);
                noisy += q(y, x + 22);
            }
        CHECK(smooth > noisy);
    }
    SUBCASE("invariant under a global offset of the source phase") {
        auto rng = make_stream(3, 0);
        const PhaseImage p = synth_phase(rng, GenConfig::scaled_for(32));
        std::vector<double> shifted(p.values().begin(), p.values().end());
        for (auto &v : shifted) {
            v += 1.234;
        }
        const QualityMap a = quality_map(wrap(p));
        const QualityMap b = quality_map(wrap(PhaseImage(32, 32, shifted)));
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(std::abs(a.values()[i] - b.values()[i]) < 1e-9);
        }
    }
    SUBCASE("degenerate dims") {
        CHECK_THROWS_AS(quality_map(WrappedImage{}), InvalidInput);
    }
}

TEST_CASE("noise-free synthetic images are recovered to float precision") {
    for (std::size_t size : {32u, 64u, 128u}) {
        const GenConfig c = GenConfig::scaled_for(size);
        for (std::size_t i = 0; i < 10; ++i) {
            const Sample s = make_sample(c, i);
            const PhaseImage out = qgpu_unwrap(s.wrapped);
            CHECK(nrmse_offset_corrected(out, s.truth) < 1e-6);
            check_exact(out, s.truth, 1e-6);
        }
    }
}

TEST_CASE("already unwrapped input is returned unchanged") {
    PhaseImage p(12, 12);
    for (std::size_t y = 0; y < 12; ++y)
        for (std::size_t x = 0; x < 12; ++x)
            p(y, x) = 2.5 * std::sin(0.2 * static_cast<double>(x)) * std::cos(0.15 * static_cast<double>(y));
    const PhaseImage out = qgpu_unwrap(wrap(p));
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(std::abs(out.values()[i] - p.values()[i]) < 1e-12);
    }
}

TEST_CASE("wrapped ramps are recovered exactly") {
    for (double ax : {0.3, -1.1, 2.9}) {
        const PhaseImage truth = ramp(17, 23, ax, 0.7, -3.0);
        const PhaseImage out = qgpu_unwrap(wrap(truth));
        check_exact(out, truth, 1e-9);
        // Each row agrees with the 1-D reference up to its own constant.
        for (std::size_t y = 0; y < truth.height(); ++y) {
            std::vector<double> row;
            for (std::size_t x = 0; x < truth.width(); ++x)
                row.push_back(wrap_scalar(truth(y, x)));
            const auto ref = itoh_unwrap_1d(row);
            const double off = out(y, 0) - ref[0];
            for (std::size_t x = 0; x < truth.width(); ++x)
                REQUIRE(std::abs(out(y, x) - ref[x] - off) < 1e-9);
        }
    }
}

TEST_CASE("every output is congruent with its input") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-kPi, kPi);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(15 * 19);
        for (auto &x : v) {
            x = wrap_scalar(u(rng));
        }
        const WrappedImage w(15, 19, v);
        const PhaseImage out = qgpu_unwrap(w);
        for (std::size_t i = 0; i < v.size(); ++i) {
            REQUIRE(std::abs(wrap_scalar(out.values()[i] - v[i])) < 1e-6);
        }
        CHECK(congruence_fraction(out, w) == 1.0);
    }
}

TEST_CASE("error grows as the signal-to-noise ratio falls") {
    GenConfig c = GenConfig::scaled_for(64);
    std::map<double, double> mean;
    for (double snr : {0.0, 5.0, 10.0, 20.0, 60.0}) {
        c.noise_menu = {snr};
        double sum = 0.0;
        for (std::size_t i = 0; i < 50; ++i) {
            const Sample s = make_sample(c, i);
            sum += nrmse_offset_corrected(qgpu_unwrap(s.wrapped), s.truth);
        }
        mean[snr] = sum / 50.0;
    }
    MESSAGE("mean NRMSE per SNR: 0 dB " << mean[0] << ", 5 dB " << mean[5] << ", 10 dB " << mean[10]
                                        << ", 20 dB " << mean[20] << ", 60 dB " << mean[60]);
    CHECK(mean[0] >= mean[5]);
    CHECK(mean[5] >= mean[10]);
    CHECK(mean[10] >= mean[20]);
    CHECK(mean[20] >= mean[60]);
}
