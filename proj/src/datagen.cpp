#include "sqdunwrap/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>
#include <thread>

#include "sqdunwrap/errors.hpp"

namespace sqdunwrap {

namespace fs = std::filesystem;
using nlohmann::json;

GenConfig GenConfig::scaled_for(std::size_t size) {
    GenConfig c;
    const double s = static_cast<double>(size) / 256.0;
    c.image_size = size;
    c.amplitude = {c.amplitude.lo * s, c.amplitude.hi * s};
    c.sigma = {c.sigma.lo * s, c.sigma.hi * s};
    c.value_range = {c.value_range.lo * s, c.value_range.hi * s};
    return c;
}

void GenConfig::validate() const {
    if (image_size < 16) {
        throw ConfigError("image_size must be at least 16");
    }
    if (count < 1) {
        throw ConfigError("count must be at least 1");
    }
    if (n_gaussians.lo < 0 || n_gaussians.lo > n_gaussians.hi) {
        throw ConfigError("n_gaussians range is empty or negative");
    }
    for (const auto &[name, r] : {std::pair{"amplitude", amplitude}, std::pair{"sigma", sigma},
                                  std::pair{"slope", slope}, std::pair{"value_range", value_range}}) {
        if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
            throw ConfigError(std::string(name) + " range is empty or non-finite");
        }
    }
    if (sigma.lo <= 0.0) {
        throw ConfigError("sigma must be positive");
    }
    for (double snr : noise_menu) {
        if (!std::isfinite(snr)) {
            throw ConfigError("noise levels must be finite");
        }
    }
}

void to_json(json &j, const GenConfig &c) {
    j = json{{"image_size", c.image_size},
             {"count", c.count},
             {"n_gaussians", {c.n_gaussians.lo, c.n_gaussians.hi}},
             {"amplitude", {c.amplitude.lo, c.amplitude.hi}},
             {"sigma", {c.sigma.lo, c.sigma.hi}},
             {"slope", {c.slope.lo, c.slope.hi}},
             {"value_range", {c.value_range.lo, c.value_range.hi}},
             {"noise_menu", c.noise_menu},
             {"seed", c.seed}};
}

void from_json(const json &j, GenConfig &c) {
    const auto pair = [&](const char *key) { return j.at(key).get<std::vector<double>>(); };
    c.image_size = j.at("image_size").get<std::size_t>();
    c.count = j.at("count").get<std::size_t>();
    const auto ng = j.at("n_gaussians").get<std::vector<int>>();
    const auto amp = pair("amplitude");
    const auto sig = pair("sigma");
    const auto slp = pair("slope");
    const auto vr = pair("value_range");
    if (ng.size() != 2 || amp.size() != 2 || sig.size() != 2 || slp.size() != 2 || vr.size() != 2) {
        throw CorruptDataset("manifest: malformed range in config");
    }
    c.n_gaussians = {ng[0], ng[1]};
    c.amplitude = {amp[0], amp[1]};
    c.sigma = {sig[0], sig[1]};
    c.slope = {slp[0], slp[1]};
    c.value_range = {vr[0], vr[1]};
    c.noise_menu = j.at("noise_menu").get<std::vector<double>>();
    c.seed = j.at("seed").get<std::uint64_t>();
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x5eedu};
    return std::mt19937_64(seq);
}

SurfaceParams draw_surface(std::mt19937_64 &rng, const GenConfig &config) {
    std::uniform_int_distribution<int> count_dist(config.n_gaussians.lo, config.n_gaussians.hi);
    std::uniform_real_distribution<double> amp_dist(config.amplitude.lo, config.amplitude.hi);
    std::uniform_real_distribution<double> sigma_dist(config.sigma.lo, config.sigma.hi);
    std::uniform_real_distribution<double> pos_dist(0.0, static_cast<double>(config.image_size - 1));
    std::uniform_real_distribution<double> rot_dist(0.0, kPi);
    std::uniform_real_distribution<double> slope_dist(config.slope.lo, config.slope.hi);
    std::bernoulli_distribution sign_dist(0.5);

    SurfaceParams surface;
    const int k = count_dist(rng);
    surface.bumps.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        GaussianBump b;
        b.amplitude = amp_dist(rng);
        if (sign_dist(rng)) {
            b.amplitude = -b.amplitude;
        }
        b.center_x = pos_dist(rng);
        b.center_y = pos_dist(rng);
        b.sigma_major = sigma_dist(rng);
        b.sigma_minor = sigma_dist(rng);
        b.rotation = rot_dist(rng);
        surface.bumps.push_back(b);
    }
    surface.slope_x = slope_dist(rng);
    surface.slope_y = slope_dist(rng);
    return surface;
}

PhaseImage render_surface(const SurfaceParams &surface, const GenConfig &config) {
    const std::size_t n = config.image_size;
    std::vector<double> values(n * n, 0.0);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            values[y * n + x] = surface.slope_x * static_cast<double>(x) +
                                surface.slope_y * static_cast<double>(y);
        }
    }
    for (const GaussianBump &b : surface.bumps) {
        const double c = std::cos(b.rotation);
        const double s = std::sin(b.rotation);
        const double inv_a = 1.0 / (2.0 * b.sigma_major * b.sigma_major);
        const double inv_b = 1.0 / (2.0 * b.sigma_minor * b.sigma_minor);
        for (std::size_t y = 0; y < n; ++y) {
            const double dy = static_cast<double>(y) - b.center_y;
            for (std::size_t x = 0; x < n; ++x) {
                const double dx = static_cast<double>(x) - b.center_x;
                const double u = c * dx + s * dy;
                const double v = -s * dx + c * dy;
                values[y * n + x] += b.amplitude * std::exp(-(u * u * inv_a + v * v * inv_b));
            }
        }
    }

    const auto [lo_it, hi_it] = std::ranges::minmax_element(values);
    const double lo = *lo_it;
    const double hi = *hi_it;
    const double target_lo = config.value_range.lo;
    const double target_hi = config.value_range.hi;
    if (hi - lo == 0.0) {
        std::ranges::fill(values, 0.0);
    } else if (hi - lo > target_hi - target_lo) {
        const double scale = (target_hi - target_lo) / (hi - lo);
        for (double &v : values) {
            v = std::clamp(target_lo + (v - lo) * scale, target_lo, target_hi);
        }
    } else if (lo < target_lo || hi > target_hi) {
        // Fits in the target width: shift the smallest amount that brings it inside.
        const double shift = lo < target_lo ? target_lo - lo : target_hi - hi;
        for (double &v : values) {
            v = std::clamp(v + shift, target_lo, target_hi);
        }
    }
    return PhaseImage(n, n, std::move(values));
}

PhaseImage synth_phase(std::mt19937_64 &rng, const GenConfig &config) {
    return render_surface(draw_surface(rng, config), config);
}

Sample make_sample(const GenConfig &config, std::size_t index) {
    auto rng = make_stream(config.seed, index);
    PhaseImage truth = synth_phase(rng, config);
    Sample sample{WrappedImage{}, truth, std::nullopt};
    if (config.noise_menu.empty()) {
        sample.wrapped = wrap(truth);
        return sample;
    }
    std::uniform_int_distribution<std::size_t> pick(0, config.noise_menu.size() - 1);
    const double snr = config.noise_menu[pick(rng)];
    const NoiseSpec spec{snr, rng()};
    sample.snr_db = snr;
    // A flat image has no defined SNR; it is stored without noise.
    if (moments(truth.values()).variance > 0.0) {
        sample.wrapped = wrap(add_noise(truth, spec));
    } else {
        sample.wrapped = wrap(truth);
    }
    return sample;
}

float to_stored_wrapped(double v) {
    constexpr float kMaxBelowPi = 3.14159250f; // largest float below pi
    float f = static_cast<float>(v);
    if (static_cast<double>(f) > kPi) {
        f = kMaxBelowPi;
    } else if (static_cast<double>(f) <= -kPi) {
        f = -kMaxBelowPi;
    }
    return f;
}

namespace {

void append_le(std::vector<char> &out, float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>(bits & 0xFFu));
        bits >>= 8;
    }
}

float read_le(const char *p) {
    std::uint32_t bits = 0;
    for (int i = 3; i >= 0; --i) {
        bits = (bits << 8) | static_cast<unsigned char>(p[i]);
    }
    return std::bit_cast<float>(bits);
}

/// Little-endian bytes for one image pair.
void encode_sample(const Sample &sample, bool noise_free, std::vector<char> &wrapped_bytes,
                   std::vector<char> &truth_bytes) {
    wrapped_bytes.clear();
    truth_bytes.clear();
    const auto truth = sample.truth.values();
    const auto wrapped = sample.wrapped.values();
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const float t = static_cast<float>(truth[i]);
        append_le(truth_bytes, t);
        const double w = noise_free ? wrap_scalar(static_cast<double>(t)) : wrapped[i];
        append_le(wrapped_bytes, to_stored_wrapped(w));
    }
}

} // namespace

unsigned default_thread_count() {
    if (const char *env = std::getenv("SQDUNWRAP_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) {
            return static_cast<unsigned>(n);
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void to_json(json &j, const DatasetManifest &m) {
    json records = json::array();
    json snrs = json::array();
    for (const auto &r : m.records) {
        const json snr = r.snr_db ? json(*r.snr_db) : json(nullptr);
        records.push_back({{"offset", r.offset}, {"snr_db", snr}});
        snrs.push_back(snr);
    }
    j = json{{"version", m.version},
             {"dtype", "f32"},
             {"layout", "row-major"},
             {"endianness", "little"},
             {"count", m.records.size()},
             {"height", m.config.image_size},
             {"width", m.config.image_size},
             {"config", m.config},
             {"snr_db", snrs},
             {"records", records}};
}

void from_json(const json &j, DatasetManifest &m) {
    m.version = j.at("version").get<int>();
    if (m.version != kDatasetVersion) {
        throw VersionMismatch("dataset version " + std::to_string(m.version) +
                              " is not supported (expected " + std::to_string(kDatasetVersion) +
                              ")");
    }
    if (j.at("dtype").get<std::string>() != "f32" ||
        j.at("layout").get<std::string>() != "row-major") {
        throw CorruptDataset("manifest: unsupported dtype or layout");
    }
    m.config = j.at("config").get<GenConfig>();
    m.records.clear();
    for (const auto &r : j.at("records")) {
        ImageRecord rec;
        rec.offset = r.at("offset").get<std::uint64_t>();
        if (!r.at("snr_db").is_null()) {
            rec.snr_db = r.at("snr_db").get<double>();
        }
        m.records.push_back(rec);
    }
    if (m.records.size() != j.at("count").get<std::size_t>() ||
        m.records.size() != m.config.count) {
        throw CorruptDataset("manifest: record count does not match count");
    }
}

DatasetManifest generate_dataset(const GenConfig &config, const fs::path &out_dir,
                                 unsigned threads) {
    config.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw InvalidInput("cannot create " + out_dir.string() + ": " + ec.message());
    }
    const std::size_t pixels = config.image_size * config.image_size;
    const std::size_t image_bytes = pixels * sizeof(float);
    const bool noise_free = config.noise_menu.empty();

    DatasetManifest manifest;
    manifest.config = config;
    manifest.records.resize(config.count);

    std::ofstream wrapped_out(out_dir / "wrapped.bin", std::ios::binary | std::ios::trunc);
    std::ofstream truth_out(out_dir / "truth.bin", std::ios::binary | std::ios::trunc);
    if (!wrapped_out || !truth_out) {
        throw InvalidInput("cannot open dataset files in " + out_dir.string());
    }

    // Images are synthesized in chunks by a pool of workers and written in
    // index order; every image has its own RNG stream.
    const unsigned workers = std::max(1u, threads == 0 ? default_thread_count() : threads);
    const std::size_t chunk = std::max<std::size_t>(workers * 4, 16);
    std::vector<std::vector<char>> wrapped_buf(chunk);
    std::vector<std::vector<char>> truth_buf(chunk);
    std::vector<std::optional<double>> snr_buf(chunk);
    for (std::size_t begin = 0; begin < config.count; begin += chunk) {
        const std::size_t end = std::min(config.count, begin + chunk);
        auto work = [&](unsigned worker) {
            for (std::size_t i = begin + worker; i < end; i += workers) {
                const Sample s = make_sample(config, i);
                encode_sample(s, noise_free, wrapped_buf[i - begin], truth_buf[i - begin]);
                snr_buf[i - begin] = s.snr_db;
            }
        };
        if (workers == 1) {
            work(0);
        } else {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back(work, w);
            }
        }
        for (std::size_t i = begin; i < end; ++i) {
            wrapped_out.write(wrapped_buf[i - begin].data(),
                              static_cast<std::streamsize>(image_bytes));
            truth_out.write(truth_buf[i - begin].data(), static_cast<std::streamsize>(image_bytes));
            manifest.records[i] = {static_cast<std::uint64_t>(i * image_bytes), snr_buf[i - begin]};
        }
    }
    wrapped_out.close();
    truth_out.close();
    if (!wrapped_out || !truth_out) {
        throw std::runtime_error("failed writing dataset files in " + out_dir.string());
    }

    std::ofstream manifest_out(out_dir / "manifest.json", std::ios::trunc);
    manifest_out << json(manifest).dump(2) << '\n';
    if (!manifest_out) {
        throw std::runtime_error("failed writing manifest in " + out_dir.string());
    }
    return manifest;
}

Dataset::Dataset(const fs::path &dir) : dir_(dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) {
        throw CorruptDataset("missing manifest.json in " + dir.string());
    }
    try {
        manifest_ = json::parse(in).get<DatasetManifest>();
    } catch (const json::exception &e) {
        throw CorruptDataset(std::string("malformed manifest: ") + e.what());
    }
    const std::uint64_t image_bytes =
        manifest_.config.image_size * manifest_.config.image_size * sizeof(float);
    const std::uint64_t expected = image_bytes * manifest_.records.size();
    for (const char *name : {"wrapped.bin", "truth.bin"}) {
        std::error_code ec;
        const auto actual = fs::file_size(dir / name, ec);
        if (ec) {
            throw CorruptDataset("missing " + std::string(name) + " in " + dir.string());
        }
        if (actual != expected) {
            throw CorruptDataset(std::string(name) + " has " + std::to_string(actual) +
                                 " bytes, expected " + std::to_string(expected));
        }
    }
    for (std::size_t i = 0; i < manifest_.records.size(); ++i) {
        if (manifest_.records[i].offset != i * image_bytes) {
            throw CorruptDataset("manifest: record " + std::to_string(i) + " has a bad offset");
        }
    }
    wrapped_.open(dir / "wrapped.bin", std::ios::binary);
    truth_.open(dir / "truth.bin", std::ios::binary);
}

std::vector<float> Dataset::read_floats(std::ifstream &file, std::uint64_t offset) const {
    const std::size_t n = height() * width();
    std::vector<char> bytes(n * sizeof(float));
    file.clear();
    file.seekg(static_cast<std::streamoff>(offset));
    file.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (file.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw CorruptDataset("short read at offset " + std::to_string(offset) + " in " +
                             dir_.string());
    }
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = read_le(bytes.data() + i * sizeof(float));
    }
    return out;
}

Sample Dataset::load(std::size_t index) const {
    if (index >= size()) {
        throw InvalidInput("dataset index " + std::to_string(index) + " out of range");
    }
    const auto &rec = manifest_.records[index];
    std::vector<float> w;
    std::vector<float> t;
    {
        std::lock_guard lock(io_mutex_);
        w = read_floats(wrapped_, rec.offset);
        t = read_floats(truth_, rec.offset);
    }
    std::vector<double> wd(w.begin(), w.end());
    std::vector<double> td(t.begin(), t.end());
    try {
        return Sample{WrappedImage(height(), width(), std::move(wd)),
                      PhaseImage(height(), width(), std::move(td)), rec.snr_db};
    } catch (const InvalidInput &e) {
        throw CorruptDataset("image " + std::to_string(index) + ": " + e.what());
    }
}

Dataset load_dataset(const fs::path &dir) { return Dataset(dir); }

Split split_indices(std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) {
        order[i] = i;
    }
    auto rng = make_stream(seed, 0x5b117ull);
    std::ranges::shuffle(order, rng);
    const std::size_t n_test = count >= 2 ? std::max<std::size_t>(1, count / 6) : 0;
    Split split;
    split.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
    split.test.assign(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
    return split;
}

} // namespace sqdunwrap
