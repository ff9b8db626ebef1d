#include "sqdunwrap/commands.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include "sqdunwrap/checkpoint.hpp"
#include "sqdunwrap/errors.hpp"
#include "sqdunwrap/qgpu.hpp"

namespace sqdunwrap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw InvalidInput("cannot write " + path.string());
    }
    f << text;
}

void ensure_directory(const fs::path &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw InvalidInput("cannot create directory " + dir.string() + ": " + ec.message());
    }
}

LossPooling parse_pooling(const std::string &name) {
    if (name == "joint") {
        return LossPooling::joint;
    }
    if (name == "per_image") {
        return LossPooling::per_image;
    }
    throw ConfigError("unknown pooling '" + name + "' (expected joint or per_image)");
}

std::map<std::string, std::string> dataset_hashes(const fs::path &dir) {
    std::map<std::string, std::string> h;
    for (const char *name : {"manifest.json", "wrapped.bin", "truth.bin"}) {
        h[std::string("dataset/") + name] = sha256_file(dir / name);
    }
    return h;
}

struct MethodSpec {
    std::string name;
    std::string kind; // identity, qgpu, truth, model
    fs::path checkpoint;
};

MethodSpec parse_method(const std::string &text) {
    if (text == "identity" || text == "qgpu" || text == "truth") {
        return {text, text, {}};
    }
    if (text.rfind("model:", 0) == 0 && text.size() > 6) {
        const fs::path path = text.substr(6);
        return {path.stem().string(), "model", path};
    }
    throw ConfigError("unknown method '" + text +
                      "' (expected identity, qgpu, truth or model:CHECKPOINT)");
}

} // namespace

int run_guarded(const std::function<void()> &body, std::ostream &err) {
    try {
        body();
        return kExitOk;
    } catch (const InvalidInput &e) {
        err << "error: " << e.what() << '\n';
        return kExitUserError;
    } catch (const CorruptDataset &e) {
        err << "error: " << e.what() << '\n';
        return kExitUserError;
    } catch (const std::exception &e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternalError;
    }
}

// ----------------------------------------------------------------------- gen

DatasetManifest cmd_gen(const GenOptions &opt, std::ostream &out) {
    if (opt.out.empty()) {
        throw ConfigError("--out is required");
    }
    if (opt.stages == 0 || opt.stages > 16) {
        throw ConfigError("--stages must be between 1 and 16");
    }
    const std::size_t factor = std::size_t{1} << opt.stages;
    if (opt.size == 0 || opt.size % factor != 0) {
        throw ConfigError("image size " + std::to_string(opt.size) + " is not divisible by 2^" +
                          std::to_string(opt.stages) + " = " + std::to_string(factor) +
                          "; choose a multiple of " + std::to_string(factor) +
                          " or change --stages");
    }
    GenConfig cfg = GenConfig::scaled_for(opt.size);
    cfg.count = opt.count;
    cfg.seed = opt.seed;
    cfg.noise_menu = opt.noise;
    const DatasetManifest m = generate_dataset(cfg, opt.out, opt.threads);

    std::map<std::string, std::size_t> per_level;
    for (const auto &r : m.records) {
        ++per_level[snr_label(r.snr_db)];
    }
    out << "wrote " << m.records.size() << " images of " << cfg.image_size << "x"
        << cfg.image_size << " to " << opt.out.string() << " (seed " << cfg.seed << ")\n";
    out << "noise levels:";
    for (const auto &[label, n] : per_level) {
        out << ' ' << label << (label == "none" ? "" : " dB") << " x" << n << ';';
    }
    out << '\n';
    return m;
}

// --------------------------------------------------------------------- train

std::string run_tag(const TrainOptions &opt) {
    std::string tag = loss_kind_name(parse_loss_kind(opt.loss));
    if (opt.no_sqd) {
        tag += "_nosqd";
    }
    return tag;
}

TrainConfig make_train_config(const TrainOptions &opt, const Dataset &data) {
    TrainConfig c;
    c.dataset = opt.data;
    if (!opt.filters.empty()) {
        c.arch.encoder_filters = opt.filters;
        c.arch.decoder_filters.assign(opt.filters.rbegin(), opt.filters.rend());
    }
    c.arch.sqd_units = opt.units;
    c.arch.sqd_filters = opt.fusion;
    c.arch.use_sqd = !opt.no_sqd;
    c.arch.input_height = data.height();
    c.arch.input_width = data.width();
    c.weights = {opt.lambda1, opt.lambda2};
    c.loss = parse_loss_kind(opt.loss);
    c.pooling = parse_pooling(opt.pooling);
    c.lr = opt.lr;
    c.batch_size = opt.batch;
    c.epochs = opt.epochs;
    c.seed = opt.seed;
    c.validate();
    return c;
}

TrainArtifacts cmd_train(const TrainOptions &opt, std::ostream &out) {
    if (opt.data.empty() || opt.out.empty()) {
        throw ConfigError("--data and --out are required");
    }
    const Dataset data(opt.data);
    const TrainConfig cfg = make_train_config(opt, data);
    ensure_directory(opt.out);

    const std::string tag = run_tag(opt);
    out << "training " << tag << " on " << data.size() << " images, "
        << cfg.arch.stages() << " stages, " << cfg.epochs << " epochs\n";
    TrainResult result = train(cfg, data, [&](const EpochRecord &r) {
        out << "epoch " << r.epoch << "  loss " << std::setprecision(6) << r.train_loss
            << "  test NRMSE " << std::fixed << std::setprecision(3) << r.test_nrmse << "%"
            << std::defaultfloat << "  (" << std::setprecision(3) << r.wall_seconds << " s)\n";
    });

    TrainArtifacts a;
    a.checkpoint = opt.out / ("model_" + tag + ".ckpt");
    a.history = opt.out / ("history_" + tag + ".json");
    a.history_values = result.history;

    json cfg_json = cfg;
    save_model(a.checkpoint, result.model,
               {{"train_config", cfg_json}, {"split_seed", cfg.seed}, {"tag", tag}});

    json h = history_json(result.history);
    h["tag"] = tag;
    h["config"] = cfg_json;
    h["code_version"] = code_version();
    h["artifact_hashes"] = dataset_hashes(opt.data);
    h["artifact_hashes"]["checkpoint"] = sha256_file(a.checkpoint);
    write_text(a.history, h.dump(2) + "\n");

    out << "best epoch " << result.history.best_epoch << "; wrote " << a.checkpoint.string()
        << " and " << a.history.string() << '\n';
    return a;
}

// -------------------------------------------------------------------- unwrap

UnwrapOutcome cmd_unwrap(const UnwrapOptions &opt, std::ostream &out) {
    if (opt.method != "model" && opt.method != "qgpu") {
        throw ConfigError("unknown method '" + opt.method + "' (expected model or qgpu)");
    }
    if (opt.method == "model" && opt.checkpoint.empty()) {
        throw ConfigError("method 'model' needs --checkpoint");
    }
    if (opt.out.empty()) {
        throw ConfigError("--out is required");
    }

    std::optional<Sample> sample;
    WrappedImage wrapped;
    if (!opt.dataset.empty()) {
        if (!opt.index) {
            throw ConfigError("--dataset needs --index");
        }
        const Dataset data(opt.dataset);
        if (*opt.index >= data.size()) {
            throw InvalidInput("index " + std::to_string(*opt.index) + " out of range (dataset has " +
                               std::to_string(data.size()) + " images)");
        }
        sample = data.load(*opt.index);
        wrapped = sample->wrapped;
    } else {
        if (opt.input.empty() || opt.height == 0 || opt.width == 0) {
            throw ConfigError("give --input with --height and --width, or --dataset with --index");
        }
        ImageGrid raw = read_raw_f32(opt.input, opt.height, opt.width);
        std::vector<double> v(raw.values().begin(), raw.values().end());
        for (double &x : v) {
            x = wrap_scalar(x);
        }
        wrapped = WrappedImage(opt.height, opt.width, std::move(v));
    }

    UnwrapOutcome result;
    if (opt.method == "qgpu") {
        result.phase = qgpu_unwrap(wrapped);
    } else {
        Network<float> model = load_model(opt.checkpoint);
        result.phase = predict(model, wrapped);
    }
    result.congruence = congruence_fraction(result.phase, wrapped);
    if (sample) {
        result.nrmse = nrmse_offset_corrected(result.phase, sample->truth);
    }

    write_raw_f32(opt.out, result.phase);
    if (!opt.pgm.empty()) {
        write_pgm16(opt.pgm, result.phase);
    }
    out << "method " << opt.method << ": congruence fraction " << std::fixed
        << std::setprecision(6) << result.congruence;
    if (result.nrmse) {
        out << ", NRMSE " << *result.nrmse << "%";
    }
    out << std::defaultfloat << '\n';
    return result;
}

// ------------------------------------------------------------------- compare

RunReport cmd_compare(const CompareOptions &opt, std::ostream &out) {
    if (opt.data.empty() || opt.out.empty()) {
        throw ConfigError("--data and --out are required");
    }
    if (opt.split != "test" && opt.split != "all") {
        throw ConfigError("--split must be test or all");
    }
    std::vector<MethodSpec> specs{parse_method("identity")};
    for (const auto &m : opt.methods) {
        MethodSpec s = parse_method(m);
        if (s.kind != "identity") {
            specs.push_back(std::move(s));
        }
    }

    std::uint64_t split_seed = 0;
    if (opt.split_seed) {
        split_seed = *opt.split_seed;
    } else {
        for (const auto &s : specs) {
            if (s.kind == "model") {
                split_seed = read_checkpoint(s.checkpoint).meta.value("split_seed", std::uint64_t{0});
                break;
            }
        }
    }

    const Dataset data(opt.data);
    std::vector<std::size_t> indices;
    if (opt.split == "test") {
        indices = split_indices(data.size(), split_seed).test;
    } else {
        indices.resize(data.size());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            indices[i] = i;
        }
    }
    const unsigned threads = opt.threads ? opt.threads : default_thread_count();

    RunReport report;
    report.artifact_hashes = dataset_hashes(opt.data);
    json methods = json::array();
    for (const auto &s : specs) {
        methods.push_back(s.kind == "model" ? "model:" + s.checkpoint.string() : s.kind);
        if (s.kind == "identity") {
            report.methods.push_back(evaluate_method(s.name, identity_predictor(), data, indices, threads));
        } else if (s.kind == "qgpu") {
            report.methods.push_back(evaluate_method(s.name, qgpu_predictor(), data, indices, threads));
        } else if (s.kind == "truth") {
            report.methods.push_back(evaluate_method(s.name, truth_predictor(), data, indices, threads));
        } else {
            report.artifact_hashes["checkpoint/" + s.name] = sha256_file(s.checkpoint);
            Network<float> model = load_model(s.checkpoint);
            report.methods.push_back(evaluate(model, data, indices, s.name));
        }
    }
    report.config = {{"dataset", opt.data.string()},
                     {"dataset_config", data.manifest().config},
                     {"split", opt.split},
                     {"split_seed", split_seed},
                     {"n_images", indices.size()},
                     {"methods", methods}};

    ensure_directory(opt.out);
    write_text(opt.out / "report.json", report_json(report).dump(2) + "\n");
    const std::string table = report_table(report);
    write_text(opt.out / "report.txt", table);
    write_text(opt.out / "sweep.csv", sweep_csv(report));
    out << table;
    return report;
}

// ------------------------------------------------------------------ file I/O

ImageGrid read_raw_f32(const fs::path &path, std::size_t height, std::size_t width) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw InvalidInput("cannot read " + path.string());
    }
    const std::size_t n = height * width;
    std::vector<char> bytes(n * 4);
    f.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(f.gcount()) != bytes.size() || f.peek() != EOF) {
        throw InvalidInput(path.string() + " does not hold exactly " + std::to_string(height) +
                           "x" + std::to_string(width) + " float32 values");
    }
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        for (int b = 3; b >= 0; --b) {
            bits = (bits << 8) | static_cast<unsigned char>(bytes[i * 4 + b]);
        }
        v[i] = std::bit_cast<float>(bits);
        if (!std::isfinite(v[i])) {
            throw InvalidInput(path.string() + " contains non-finite values");
        }
    }
    return ImageGrid(height, width, std::move(v));
}

void write_raw_f32(const fs::path &path, const ImageGrid &image) {
    std::string bytes;
    bytes.reserve(image.size() * 4);
    for (const double v : image.values()) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int b = 0; b < 4; ++b) {
            bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
        }
    }
    write_text(path, bytes);
}

void write_pgm16(const fs::path &path, const ImageGrid &image) {
    const auto [lo_it, hi_it] = std::ranges::minmax_element(image.values());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const double span = hi - lo;
    std::string bytes = "P5\n" + std::to_string(image.width()) + " " +
                        std::to_string(image.height()) + "\n65535\n";
    for (const double v : image.values()) {
        const auto p = static_cast<std::uint16_t>(
            span > 0.0 ? std::lround((v - lo) / span * 65535.0) : 0);
        bytes.push_back(static_cast<char>(p >> 8));
        bytes.push_back(static_cast<char>(p & 0xff));
    }
    write_text(path, bytes);
    const json side{{"min", lo},
                    {"max", hi},
                    {"maxval", 65535},
                    {"mapping", "value = min + pixel / 65535 * (max - min)"}};
    write_text(fs::path(path.string() + ".json"), side.dump(2) + "\n");
}

} // namespace sqdunwrap
