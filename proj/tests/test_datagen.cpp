#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include "sqdunwrap/datagen.hpp"
#include "sqdunwrap/errors.hpp"
#include "test_support.hpp"

using namespace sqdunwrap;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path &p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

GenConfig small_config(std::size_t count, std::uint64_t seed) {
    GenConfig c = GenConfig::scaled_for(32);
    c.count = count;
    c.seed = seed;
    return c;
}

} // namespace

TEST_CASE("config validation") {
    GenConfig c;
    CHECK_NOTHROW(c.validate());
    c.image_size = 8;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = GenConfig{};
    c.amplitude = {3.0, 1.0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = GenConfig{};
    c.count = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("empty mixture without ramp renders zeros") {
    GenConfig c = small_config(1, 0);
    c.n_gaussians = {0, 0};
    c.slope = {0.0, 0.0};
    auto rng = make_stream(1, 0);
    const PhaseImage p = synth_phase(rng, c);
    CHECK(std::ranges::all_of(p.values(), [](double v) { return v == 0.0; }));
}

TEST_CASE("a single positive gaussian peaks at its center") {
    GenConfig c = small_config(1, 0);
    c.n_gaussians = {1, 1};
    c.amplitude = {1.0, 1.0};
    c.slope = {0.0, 0.0};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto rng = make_stream(seed, 0);
        SurfaceParams s = draw_surface(rng, c);
        REQUIRE(s.bumps.size() == 1);
        s.bumps[0].amplitude = 1.0;
        // Pixel-centred so the maximum is unique.
        s.bumps[0].center_x = std::round(s.bumps[0].center_x);
        s.bumps[0].center_y = std::round(s.bumps[0].center_y);
        const PhaseImage p = render_surface(s, c);
        const auto it = std::ranges::max_element(p.values());
        const auto idx = static_cast<std::size_t>(it - p.values().begin());
        CHECK(idx % p.width() == static_cast<std::size_t>(s.bumps[0].center_x));
        CHECK(idx / p.width() == static_cast<std::size_t>(s.bumps[0].center_y));
        CHECK(std::ranges::count(p.values(), *it) == 1);
    }
}

TEST_CASE("default surfaces stay within -44..44 and are smooth") {
    const GenConfig c;
    std::vector<double> steps;
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) {
        auto rng = make_stream(123, i);
        const PhaseImage p = synth_phase(rng, c);
        const auto [a, b] = std::ranges::minmax(p.values());
        lo = std::min(lo, a);
        hi = std::max(hi, b);
        if (i < 100) {
            steps.clear();
            for (std::size_t y = 0; y < p.height(); ++y) {
                for (std::size_t x = 0; x < p.width(); ++x) {
                    if (x + 1 < p.width()) {
                        steps.push_back(std::abs(p(y, x + 1) - p(y, x)));
                    }
                    if (y + 1 < p.height()) {
                        steps.push_back(std::abs(p(y + 1, x) - p(y, x)));
                    }
                }
            }
            auto p99 = steps.begin() + static_cast<std::ptrdiff_t>(0.99 * static_cast<double>(steps.size()));
            std::nth_element(steps.begin(), p99, steps.end());
            REQUIRE(*p99 < kPi);
        }
    }
    CHECK(lo >= -44.0);
    CHECK(hi <= 44.0);
}

TEST_CASE("scaled configs keep slope and shrink the spatial and value scales") {
    const GenConfig d;
    const GenConfig s = GenConfig::scaled_for(64);
    CHECK(s.image_size == 64);
    CHECK(s.slope.lo == d.slope.lo);
    CHECK(s.slope.hi == d.slope.hi);
    CHECK(s.sigma.hi == doctest::Approx(d.sigma.hi / 4.0));
    CHECK(s.value_range.hi == doctest::Approx(11.0));
}

TEST_CASE("generation is deterministic and independent of thread count") {
    const auto dir = testing::scratch_dir("gen_det");
    GenConfig c = small_config(10, 7);
    c.noise_menu = {0, 5, 10, 20, 60};
    generate_dataset(c, dir / "a", 1);
    generate_dataset(c, dir / "b", 1);
    generate_dataset(c, dir / "c", 3);
    for (const char *f : {"manifest.json", "wrapped.bin", "truth.bin"}) {
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "c" / f));
    }
    c.seed = 8;
    generate_dataset(c, dir / "d", 1);
    CHECK(slurp(dir / "a" / "truth.bin") != slurp(dir / "d" / "truth.bin"));
    fs::remove_all(dir);
}

TEST_CASE("noise-free datasets store wrap(truth) and round trip") {
    const auto dir = testing::scratch_dir("gen_clean");
    const GenConfig c = small_config(12, 3);
    const DatasetManifest m = generate_dataset(c, dir);
    CHECK(m.records.size() == 12);
    const Dataset data(dir);
    REQUIRE(data.size() == 12);
    CHECK(data.height() == 32);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Sample s = data.load(i);
        CHECK_FALSE(s.snr_db.has_value());
        const Sample fresh = make_sample(c, i);
        for (std::size_t k = 0; k < s.truth.size(); ++k) {
            const double t = s.truth.values()[k];
            const double w = s.wrapped.values()[k];
            REQUIRE(t == static_cast<double>(static_cast<float>(fresh.truth.values()[k])));
            REQUIRE(w > -kPi);
            REQUIRE(w <= kPi);
            REQUIRE(static_cast<float>(w) == to_stored_wrapped(wrap_scalar(t)));
            REQUIRE(std::abs(wrap_scalar(wrap_scalar(t) - w)) <= 1e-6);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("noise levels are drawn uniformly from the menu") {
    const auto dir = testing::scratch_dir("gen_menu");
    GenConfig c = GenConfig::scaled_for(16);
    c.count = 5000;
    c.seed = 1;
    c.noise_menu = {0, 5, 10, 20, 60};
    const DatasetManifest m = generate_dataset(c, dir);
    std::map<double, std::size_t> freq;
    for (const auto &r : m.records) {
        REQUIRE(r.snr_db.has_value());
        ++freq[*r.snr_db];
    }
    CHECK(freq.size() == 5);
    for (const auto &[level, n] : freq) {
        CHECK(std::set<double>{0, 5, 10, 20, 60}.contains(level));
        CHECK(std::abs(static_cast<double>(n) / 5000.0 - 0.2) < 0.03);
    }
    const Dataset data(dir);
    for (std::size_t i = 0; i < 50; ++i) {
        const Sample s = data.load(i);
        CHECK(std::ranges::all_of(s.wrapped.values(), [](double v) { return v > -kPi && v <= kPi; }));
    }
    fs::remove_all(dir);
}

TEST_CASE("damaged datasets are reported, not crashed on") {
    const auto dir = testing::scratch_dir("gen_bad");
    generate_dataset(small_config(4, 2), dir);

    SUBCASE("truncated data file") {
        const auto size = fs::file_size(dir / "truth.bin");
        fs::resize_file(dir / "truth.bin", size - 10);
        CHECK_THROWS_AS(Dataset{dir}, CorruptDataset);
    }
    SUBCASE("file truncated after opening") {
        const Dataset data(dir);
        fs::resize_file(dir / "wrapped.bin", 100);
        CHECK_THROWS_AS(data.load(3), CorruptDataset);
    }
    SUBCASE("missing manifest") {
        fs::remove(dir / "manifest.json");
        CHECK_THROWS_AS(Dataset{dir}, CorruptDataset);
    }
    SUBCASE("malformed manifest") {
        std::ofstream(dir / "manifest.json") << "{ not json";
        CHECK_THROWS_AS(Dataset{dir}, CorruptDataset);
    }
    SUBCASE("version mismatch") {
        auto j = nlohmann::json::parse(slurp(dir / "manifest.json"));
        j["version"] = kDatasetVersion + 1;
        std::ofstream(dir / "manifest.json") << j.dump();
        CHECK_THROWS_AS(Dataset{dir}, VersionMismatch);
    }
    fs::remove_all(dir);
}

TEST_CASE("train/test split") {
    const Split s = split_indices(6000, 0);
    CHECK(s.train.size() == 5000);
    CHECK(s.test.size() == 1000);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto i : s.test) {
        CHECK_FALSE(all.contains(i));
        all.insert(i);
    }
    CHECK(all.size() == 6000);
    CHECK(split_indices(6000, 0).test == s.test);
    CHECK(split_indices(6000, 1).test != s.test);
    CHECK(split_indices(600, 0).test.size() == 100);
}
