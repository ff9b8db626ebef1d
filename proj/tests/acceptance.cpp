#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sqdunwrap/commands.hpp"
#include "sqdunwrap/datagen.hpp"
#include "sqdunwrap/layers.hpp"
#include "sqdunwrap/losses.hpp"
#include "sqdunwrap/lstm.hpp"
#include "sqdunwrap/network.hpp"
#include "sqdunwrap/phase_core.hpp"
#include "sqdunwrap/qgpu.hpp"
#include "sqdunwrap/sqd_lstm.hpp"
#include "test_support.hpp"

using namespace sqdunwrap;
using nlohmann::json;
using testing::random_tensor;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// Pinned tolerances.
constexpr double kItohTol = 1e-6;            // rad
constexpr double kQgpuNoiseFreeTol = 1e-6;   // percent
constexpr double kOffsetTol = 1e-6;
constexpr double kPrimitiveTol = 1e-4;
constexpr double kCompositionTol = 1e-3;
constexpr int kGradientSeeds = 20;
constexpr double kToyNrmseLimit = 20.0;      // percent
constexpr double kToyIdentityRatio = 5.0;
constexpr std::size_t kToyEpochs = 20;
constexpr std::size_t kToyTrain = 500;
constexpr std::size_t kToyTest = 100;
constexpr int kAblationSeeds = 3;
constexpr int kAblationWinsNeeded = 2;
constexpr int kSweepInversionsAllowed = 1;
constexpr double kReferenceZeroDb = 1.26;    // percent, full-scale network at 0 dB

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    fs::path out;
    std::ofstream log;
};

std::string fmt(double v, int precision = 4) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

const MethodReport &method(const RunReport &r, const std::string &name) {
    for (const auto &m : r.methods) {
        if (m.method == name) {
            return m;
        }
    }
    throw std::runtime_error("method " + name + " missing from report");
}

// ------------------------------------------------------------------ 1

Outcome itoh_exactness(Context &) {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> len(2, 512);
    std::uniform_real_distribution<double> step(-0.99 * kPi, 0.99 * kPi);
    std::uniform_real_distribution<double> start(-50.0, 50.0);
    double worst = 0.0;
    for (int s = 0; s < 1000; ++s) {
        std::vector<double> phi(len(rng));
        phi[0] = start(rng);
        for (std::size_t i = 1; i < phi.size(); ++i) {
            phi[i] = phi[i - 1] + step(rng);
        }
        std::vector<double> wrapped(phi.size());
        std::ranges::transform(phi, wrapped.begin(), wrap_scalar);
        const auto out = itoh_unwrap_1d(wrapped);
        const double k = std::round((out[0] - phi[0]) / (2.0 * kPi));
        for (std::size_t i = 0; i < phi.size(); ++i) {
            worst = std::max(worst, std::abs(out[i] - phi[i] - 2.0 * kPi * k));
        }
    }
    return {worst < kItohTol, "1000 sequences, max deviation " + fmt(worst) + " rad"};
}

// ------------------------------------------------------------------ 2

Outcome qgpu_noise_free(Context &ctx) {
    GenConfig cfg = GenConfig::scaled_for(128);
    cfg.count = 50;
    cfg.seed = 202;
    const fs::path dir = ctx.out / "qgpu_noise_free";
    generate_dataset(cfg, dir, 0);
    const Dataset data(dir);
    double worst = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Sample s = data.load(i);
        worst = std::max(worst, nrmse_offset_corrected(qgpu_unwrap(s.wrapped), s.truth));
    }
    return {worst < kQgpuNoiseFreeTol,
            "50 images 128x128, max offset-corrected NRMSE " + fmt(worst) + "%"};
}

// ------------------------------------------------------------------ 3

template <typename T>
double offset_residual(std::mt19937_64 &rng) {
    double worst = 0.0;
    const auto phi = random_tensor<T>({2, 32, 32, 1}, rng, -kPi, kPi);
    for (double c : {-10.0 * kPi, -2.0 * kPi, 0.37, 2.0 * kPi, 100.0}) {
        Tensor4<T> shifted = phi;
        for (auto &v : shifted.values()) {
            v = static_cast<T>(v + c);
        }
        for (auto pooling : {LossPooling::joint, LossPooling::per_image}) {
            worst = std::max(worst, std::abs(l_c(shifted, phi, {}, pooling)));
        }
    }
    return worst;
}

Outcome loss_offset_invariance(Context &) {
    std::mt19937_64 rng(303);
    double worst_double = 0.0, worst_float = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        worst_double = std::max(worst_double, offset_residual<double>(rng));
        worst_float = std::max(worst_float, offset_residual<float>(rng));
    }
    return {worst_double < kOffsetTol && worst_float < kOffsetTol,
            "max l_c residual double " + fmt(worst_double) + ", float32 " + fmt(worst_float)};
}

// ------------------------------------------------------------------ 4

template <typename Layer>
double simple_layer_error(Layer &layer, Tensor4<double> x, const Tensor4<double> &r) {
    return testing::layer_gradient_error<Layer>(layer, x, r,
                                                [](auto &l, const auto &in) { return l.forward(in); });
}

std::map<std::string, double> primitive_errors() {
    std::map<std::string, double> worst;
    const auto note = [&](const std::string &name, double e) { worst[name] = std::max(worst[name], e); };
    for (int seed = 0; seed < kGradientSeeds; ++seed) {
        std::mt19937_64 rng(4000 + seed);
        {
            Conv2d<double> conv("c", 3, 2, 3);
            testing::randomize(conv.weight, rng);
            testing::randomize(conv.bias, rng);
            note("conv3x3", simple_layer_error(conv, random_tensor<double>({2, 4, 4, 2}, rng),
                                               random_tensor<double>({2, 4, 4, 3}, rng)));
        }
        {
            Conv2d<double> conv("c", 1, 3, 2);
            testing::randomize(conv.weight, rng);
            testing::randomize(conv.bias, rng);
            note("conv1x1", simple_layer_error(conv, random_tensor<double>({2, 3, 4, 3}, rng),
                                               random_tensor<double>({2, 3, 4, 2}, rng)));
        }
        {
            TransposedConv2d<double> t("t", 2, 3);
            testing::randomize(t.weight, rng);
            testing::randomize(t.bias, rng);
            note("tconv", simple_layer_error(t, random_tensor<double>({2, 3, 2, 2}, rng),
                                             random_tensor<double>({2, 6, 4, 3}, rng)));
        }
        {
            BatchNorm<double> bn("bn", 3);
            testing::randomize(bn.gamma, rng, 2.0);
            testing::randomize(bn.beta, rng, 2.0);
            auto x = random_tensor<double>({2, 3, 3, 3}, rng, -2.0, 2.0);
            const auto r = random_tensor<double>({2, 3, 3, 3}, rng);
            note("batchnorm", testing::layer_gradient_error<BatchNorm<double>>(
                                  bn, x, r, [](auto &l, const auto &in) { return l.forward(in, Mode::train); }));
        }
        {
            struct ReluLayer {
                Relu<double> relu;
                ParamList<double> params() { return {}; }
                Tensor4<double> forward(const Tensor4<double> &x) { return relu.forward(x); }
                Tensor4<double> backward(const Tensor4<double> &dy) { return relu.backward(dy); }
            } layer;
            auto x = random_tensor<double>({2, 4, 3, 2}, rng);
            for (auto &v : x.values()) {
                v += v < 0 ? -0.05 : 0.05;
            }
            note("relu", simple_layer_error(layer, x, random_tensor<double>({2, 4, 3, 2}, rng)));
        }
        {
            struct PoolLayer {
                MaxPool2<double> pool;
                ParamList<double> params() { return {}; }
                Tensor4<double> forward(const Tensor4<double> &x) { return pool.forward(x); }
                Tensor4<double> backward(const Tensor4<double> &dy) { return pool.backward(dy); }
            } layer;
            Tensor4<double> x({2, 4, 6, 2});
            std::vector<double> vals(x.size());
            for (std::size_t i = 0; i < vals.size(); ++i) {
                vals[i] = 0.01 * static_cast<double>(i);
            }
            std::ranges::shuffle(vals, rng);
            std::ranges::copy(vals, x.values().begin());
            note("maxpool", simple_layer_error(layer, x, random_tensor<double>({2, 2, 3, 2}, rng)));
        }
        {
            ConvBlock<double> block("b", 2, 3);
            block.init(rng);
            testing::randomize(block.bn.gamma, rng, 2.0);
            testing::randomize(block.bn.beta, rng, 2.0);
            auto x = random_tensor<double>({2, 4, 4, 2}, rng);
            const auto r = random_tensor<double>({2, 4, 4, 3}, rng);
            note("convblock", testing::layer_gradient_error<ConvBlock<double>>(
                                  block, x, r, [](auto &l, const auto &in) { return l.forward(in, Mode::train); }));
        }
        {
            Lstm<double> lstm("l", 3, 4);
            lstm.init(rng);
            testing::randomize(lstm.bias, rng);
            SequenceBatch<double> x(3, 2, 3);
            SequenceBatch<double> r(3, 2, 4);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (auto &v : x.data) {
                v = u(rng);
            }
            for (auto &v : r.data) {
                v = u(rng);
            }
            for (auto *p : lstm.params()) {
                p->zero_grad();
            }
            lstm.forward(x);
            const auto dx = lstm.backward(r);
            const auto loss = [&] { return testing::dot<double>(lstm.forward(x).data, r.data); };
            double e = testing::check_gradient(x.data, dx.data, loss);
            for (auto *p : lstm.params()) {
                const auto g = p->grad;
                e = std::max(e, testing::check_gradient(p->value, g, loss));
            }
            note("lstm", e);
        }
        {
            SqdLstm<double> sqd("sqd", 2, 3, 4);
            sqd.init(rng);
            testing::randomize(sqd.fuse_horizontal().bias, rng);
            testing::randomize(sqd.fuse_vertical().bias, rng);
            note("sqd_lstm", simple_layer_error(sqd, random_tensor<double>({2, 3, 3, 2}, rng),
                                                random_tensor<double>({2, 3, 3, 8}, rng)));
        }
    }
    return worst;
}

/// Float32 backprop and float64 backprop, both against float64 differences.
std::pair<double, double> composition_errors() {
    double worst_double = 0.0, worst_float = 0.0;
    for (int seed = 0; seed < kGradientSeeds; ++seed) {
        std::mt19937_64 rng(5000 + seed);
        ArchConfig cfg;
        cfg.encoder_filters = {3, 4};
        cfg.decoder_filters = {4, 3};
        cfg.sqd_units = 3;
        cfg.sqd_filters = 2;
        cfg.input_height = 16;
        cfg.input_width = 16;
        Network<double> net = build<double>(cfg, rng);
        for (auto *p : net.params()) {
            if (p->trainable && (p->name.find("bias") != std::string::npos ||
                                 p->name.find("beta") != std::string::npos)) {
                testing::randomize(*p, rng, 0.2);
            }
        }
        auto x = random_tensor<double>({2, 16, 16, 1}, rng, -kPi, kPi);
        const auto r = random_tensor<double>({2, 16, 16, 1}, rng);

        Network<float> netf(cfg);
        auto pd = net.params();
        auto pf = netf.params();
        for (std::size_t k = 0; k < pd.size(); ++k) {
            std::ranges::transform(pd[k]->value, pf[k]->value.begin(), [](double v) { return static_cast<float>(v); });
            std::ranges::transform(pf[k]->value, pd[k]->value.begin(), [](float v) { return static_cast<double>(v); });
        }
        net.zero_grad();
        net.forward(x, Mode::train);
        const auto dx = net.backward(r);
        netf.zero_grad();
        netf.forward(tensor_cast<float>(x), Mode::train);
        const auto dxf = tensor_cast<double>(netf.backward(tensor_cast<float>(r)));

        const auto loss = [&] { return testing::dot<double>(net.forward(x, Mode::train).values(), r.values()); };
        const auto num_x = testing::numeric_gradient(x.values(), loss);
        worst_double = std::max(worst_double, testing::relative_error(dx.values(), num_x));
        worst_float = std::max(worst_float, testing::relative_error(dxf.values(), num_x));
        for (std::size_t k = 0; k < pd.size(); ++k) {
            if (!pd[k]->trainable) {
                continue;
            }
            const auto analytic = pd[k]->grad;
            const std::vector<double> analytic_f(pf[k]->grad.begin(), pf[k]->grad.end());
            const auto num = testing::numeric_gradient(pd[k]->value, loss);
            worst_double = std::max(worst_double, testing::relative_error(analytic, num));
            worst_float = std::max(worst_float, testing::relative_error(analytic_f, num));
        }
    }
    return {worst_double, worst_float};
}

Outcome gradient_correctness(Context &ctx) {
    const auto prims = primitive_errors();
    const auto [comp_double, comp_float] = composition_errors();
    bool pass = comp_double < kCompositionTol && comp_float < kCompositionTol;
    double worst_prim = 0.0;
    std::string worst_name;
    for (const auto &[name, e] : prims) {
        ctx.log << "gradient " << name << " " << e << "\n";
        pass = pass && e < kPrimitiveTol;
        if (e >= worst_prim) {
            worst_prim = e;
            worst_name = name;
        }
    }
    ctx.log << "gradient composition double " << comp_double << " float32 " << comp_float << "\n";
    return {pass, std::to_string(kGradientSeeds) + " seeds, worst primitive " + worst_name + " " +
                      fmt(worst_prim) + ", composition " + fmt(comp_double) + " (float32 backprop " +
                      fmt(comp_float) + ")"};
}

// ------------------------------------------------------------------ 5

std::vector<double> channels(const Tensor4<double> &t, std::size_t from, std::size_t to) {
    std::vector<double> out;
    const std::size_t c = t.dims().c;
    for (std::size_t p = 0; p < t.dims().pixels(); ++p) {
        for (std::size_t k = from; k < to; ++k) {
            out.push_back(t.values()[p * c + k]);
        }
    }
    return out;
}

Outcome sqd_structure(Context &) {
    std::size_t maps = 0;
    bool inverse = true;
    for (std::size_t h = 1; h <= 3; ++h) {
        for (std::size_t w = 1; w <= 4; ++w) {
            for (std::size_t hot = 0; hot <= h * w; ++hot) {
                Tensor4<double> x({1, h, w, 2});
                for (std::size_t p = 0; p < h * w; ++p) {
                    x.values()[2 * p] = hot == h * w ? static_cast<double>(p + 1) : (p == hot ? 1.0 : 0.0);
                    x.values()[2 * p + 1] = -x.values()[2 * p];
                }
                const auto seqs = extract_sequences(x);
                for (Direction d : kDirections) {
                    const auto back = reassemble<double>(seqs[d], 2, d, h, w);
                    inverse = inverse && std::ranges::equal(back.values(), x.values());
                }
                ++maps;
            }
            for (Direction d : kDirections) {
                auto order = traversal_order(d, h, w);
                std::ranges::sort(order);
                for (std::size_t i = 0; i < order.size(); ++i) {
                    inverse = inverse && order[i] == i;
                }
            }
        }
    }

    std::mt19937_64 rng(505);
    bool shapes = true;
    for (auto [n, h, w, c, u, d] : std::vector<std::array<std::size_t, 6>>{
             {1, 8, 8, 64, 32, 64}, {2, 3, 5, 3, 4, 6}, {1, 1, 1, 2, 3, 4}}) {
        SqdLstm<float> sqd("sqd", c, u, d);
        sqd.init(rng);
        shapes = shapes && sqd.forward(random_tensor<float>({n, h, w, c}, rng)).dims() == Dims{n, h, w, 2 * d};
    }

    bool independent = true;
    for (bool zero_vertical : {true, false}) {
        SqdLstm<double> sqd("sqd", 3, 4, 5);
        sqd.init(rng);
        for (auto *p : sqd.params()) {
            testing::randomize(*p, rng);
        }
        const auto x = random_tensor<double>({2, 4, 3, 3}, rng);
        const auto before = sqd.forward(x);
        const auto zeroed = zero_vertical ? std::vector{Direction::down, Direction::up}
                                          : std::vector{Direction::right, Direction::left};
        for (Direction d : zeroed) {
            for (auto *p : sqd.lstm(d).params()) {
                std::ranges::fill(p->value, 0.0);
            }
        }
        for (auto *p : (zero_vertical ? sqd.fuse_vertical() : sqd.fuse_horizontal()).params()) {
            std::ranges::fill(p->value, 0.0);
        }
        const auto after = sqd.forward(x);
        const std::size_t kept = zero_vertical ? 0 : 5;
        independent = independent && channels(before, kept, kept + 5) == channels(after, kept, kept + 5);
    }
    return {inverse && shapes && independent,
            "inverse on " + std::to_string(maps) + " maps " + (inverse ? "ok" : "broken") + ", shapes " +
                (shapes ? "ok" : "wrong") + ", branch independence " + (independent ? "ok" : "broken")};
}

// ------------------------------------------------------------------ 6 - 8

GenOptions toy_gen(const fs::path &out, std::uint64_t seed, std::vector<double> noise = {}) {
    GenOptions g;
    g.out = out;
    g.count = kToyTrain + kToyTest;
    g.size = 64;
    g.seed = seed;
    g.noise = std::move(noise);
    g.stages = 3;
    return g;
}

TrainOptions toy_train(const fs::path &data, const fs::path &out, std::uint64_t seed) {
    TrainOptions t;
    t.data = data;
    t.out = out;
    t.epochs = kToyEpochs;
    t.seed = seed;
    t.filters = {16, 32, 64};
    return t;
}

Outcome toy_learning(Context &ctx) {
    const fs::path data = ctx.out / "toy_clean";
    cmd_gen(toy_gen(data, 606), ctx.log);
    const auto run = cmd_train(toy_train(data, ctx.out / "toy_model", 1), ctx.log);
    CompareOptions c;
    c.data = data;
    c.methods = {"qgpu", "model:" + run.checkpoint.string()};
    c.out = ctx.out / "toy_model" / "compare";
    const RunReport r = cmd_compare(c, ctx.log);
    const double model = method(r, run.checkpoint.stem().string()).mean_nrmse;
    const double identity = method(r, "identity").mean_nrmse;
    const std::size_t n = method(r, "identity").images.size();
    const double ratio = identity / model;
    return {n == kToyTest && model < kToyNrmseLimit && ratio >= kToyIdentityRatio,
            "model " + fmt(model) + "% vs identity " + fmt(identity) + "% (" + fmt(ratio, 3) + "x) on " +
                std::to_string(n) + " test images, best of " + std::to_string(kToyEpochs) + " epochs"};
}

Outcome loss_ablation(Context &ctx) {
    const fs::path data = ctx.out / "toy_clean";
    if (!fs::exists(data / "manifest.json")) {
        cmd_gen(toy_gen(data, 606), ctx.log);
    }
    json archive = json::array();
    int wins = 0;
    std::string detail;
    for (int seed = 1; seed <= kAblationSeeds; ++seed) {
        const fs::path dir = ctx.out / "ablation" / ("seed_" + std::to_string(seed));
        json entry{{"seed", seed}};
        CompareOptions c;
        c.data = data;
        c.out = dir / "compare";
        std::vector<std::string> stems;
        for (const std::string loss : {"lc", "mse"}) {
            TrainOptions t = toy_train(data, dir, static_cast<std::uint64_t>(seed));
            t.loss = loss;
            t.no_sqd = true;
            const auto run = cmd_train(t, ctx.log);
            entry["history_" + loss] = history_json(run.history_values, false);
            c.methods.push_back("model:" + run.checkpoint.string());
            stems.push_back(run.checkpoint.stem().string());
        }
        const RunReport r = cmd_compare(c, ctx.log);
        const double lc = method(r, stems[0]).mean_nrmse;
        const double mse = method(r, stems[1]).mean_nrmse;
        entry["test_nrmse_lc"] = lc;
        entry["test_nrmse_mse"] = mse;
        archive.push_back(entry);
        wins += lc < mse ? 1 : 0;
        detail += (detail.empty() ? "" : "; ") + ("seed " + std::to_string(seed) + " L_c " + fmt(lc) +
                                                   "% vs MSE " + fmt(mse) + "%");
    }
    std::ofstream(ctx.out / "ablation" / "ablation.json") << archive.dump(2) << "\n";
    return {wins >= kAblationWinsNeeded,
            "L_c wins " + std::to_string(wins) + "/" + std::to_string(kAblationSeeds) + " (" + detail + ")"};
}

Outcome noise_sweep(Context &ctx) {
    const fs::path data = ctx.out / "toy_noisy";
    cmd_gen(toy_gen(data, 808, {0, 5, 10, 20, 60}), ctx.log);
    const auto run = cmd_train(toy_train(data, ctx.out / "noisy_model", 1), ctx.log);
    CompareOptions c;
    c.data = data;
    c.methods = {"qgpu", "model:" + run.checkpoint.string()};
    c.out = ctx.out / "noisy_model" / "compare";
    const RunReport r = cmd_compare(c, ctx.log);

    const auto curve = [](const MethodReport &m) {
        std::vector<std::pair<double, double>> pts;
        for (const auto &[label, b] : m.buckets) {
            if (label != "none") {
                pts.emplace_back(std::stod(label), b.mean_nrmse);
            }
        }
        std::ranges::sort(pts);
        return pts;
    };
    const auto qgpu = curve(method(r, "qgpu"));
    const auto model = curve(method(r, run.checkpoint.stem().string()));
    int inversions = 0;
    for (std::size_t i = 1; i < qgpu.size(); ++i) {
        inversions += qgpu[i].second > qgpu[i - 1].second ? 1 : 0;
    }
    std::ifstream csv(c.out / "sweep.csv");
    std::size_t rows = 0;
    for (std::string line; std::getline(csv, line);) {
        rows += line.empty() ? 0 : 1;
    }
    std::string q, m;
    for (std::size_t i = 0; i < qgpu.size(); ++i) {
        q += (i ? " " : "") + fmt(qgpu[i].first) + ":" + fmt(qgpu[i].second, 3);
    }
    for (std::size_t i = 0; i < model.size(); ++i) {
        m += (i ? " " : "") + fmt(model[i].first) + ":" + fmt(model[i].second, 3);
    }
    const bool levels = qgpu.size() == 5;
    return {levels && inversions <= kSweepInversionsAllowed && rows > 1,
            "qgpu dB:% " + q + " (" + std::to_string(inversions) + " inversions); model " + m +
                "; full-scale reference at 0 dB " + fmt(kReferenceZeroDb) + "% (not asserted); csv " +
                (c.out / "sweep.csv").string()};
}

// ------------------------------------------------------------------ 9

bool same_bytes(const fs::path &a, const fs::path &b) {
    return sha256_file(a) == sha256_file(b);
}

Outcome determinism(Context &ctx) {
    const fs::path root = ctx.out / "determinism";
    std::vector<fs::path> gens;
    for (const char *name : {"gen_a", "gen_b"}) {
        GenOptions g;
        g.out = root / name;
        g.count = 48;
        g.size = 32;
        g.seed = 909;
        g.noise = {0, 10, 60};
        g.stages = 2;
        g.threads = name[4] == 'a' ? 1 : 0;
        cmd_gen(g, ctx.log);
        gens.push_back(g.out);
    }
    bool gen_same = true;
    std::size_t files = 0;
    for (const auto &entry : fs::directory_iterator(gens[0])) {
        const fs::path other = gens[1] / entry.path().filename();
        gen_same = gen_same && fs::exists(other) && same_bytes(entry.path(), other);
        ++files;
    }

    std::vector<TrainArtifacts> runs;
    for (const char *name : {"train_a", "train_b"}) {
        TrainOptions t;
        t.data = gens[0];
        t.out = root / name;
        t.epochs = 2;
        t.seed = 3;
        t.filters = {4, 8};
        t.units = 4;
        t.fusion = 4;
        runs.push_back(cmd_train(t, ctx.log));
    }
    const bool train_same = history_json(runs[0].history_values, false) ==
                                history_json(runs[1].history_values, false) &&
                            same_bytes(runs[0].checkpoint, runs[1].checkpoint);

    std::vector<json> reports;
    std::vector<std::string> hashes;
    for (unsigned threads : {1u, 0u}) {
        CompareOptions c;
        c.data = gens[0];
        c.methods = {"qgpu", "model:" + runs[0].checkpoint.string()};
        c.out = root / ("compare_" + std::to_string(threads));
        c.threads = threads;
        const RunReport r = cmd_compare(c, ctx.log);
        reports.push_back(report_json(r, false));
        hashes.push_back(content_hash(r));
    }
    const bool compare_same = reports[0] == reports[1] && hashes[0] == hashes[1];
    return {gen_same && train_same && compare_same,
            "gen " + std::string(gen_same ? "byte-identical" : "DIFFERS") + " (" + std::to_string(files) +
                " files), train " + (train_same ? "identical" : "DIFFERS") + ", compare " +
                (compare_same ? "identical (content_hash " + hashes[0].substr(0, 12) + ")"
                              : "DIFFERS")};
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Acceptance checks; prints one PASS/FAIL line per criterion"};
    fs::path out = "acceptance_artifacts";
    std::vector<int> only;
    app.add_option("--out", out, "Directory for datasets, models and reports");
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome(Context &)>>> criteria{
        {"wrap/itoh exactness", itoh_exactness},
        {"qgpu noise-free near-exactness", qgpu_noise_free},
        {"loss offset invariance", loss_offset_invariance},
        {"gradient correctness", gradient_correctness},
        {"sqd-lstm structure", sqd_structure},
        {"toy-scale learning", toy_learning},
        {"loss ablation trend", loss_ablation},
        {"noise sweep shape", noise_sweep},
        {"determinism", determinism},
    };

    fs::create_directories(out);
    Context ctx{out, std::ofstream(out / "acceptance.log")};
    json summary = json::array();
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && std::ranges::find(only, id) == only.end()) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second(ctx);
        } catch (const std::exception &e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failed += o.pass ? 0 : 1;
        std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << ": " << criteria[i].first
                  << " - " << o.detail << " [" << fmt(secs, 3) << " s]" << std::endl;
        summary.push_back({{"criterion", id}, {"name", criteria[i].first}, {"pass", o.pass},
                           {"detail", o.detail}, {"seconds", secs}});
    }
    std::ofstream(out / "acceptance.json") << summary.dump(2) << "\n";
    return failed == 0 ? 0 : 1;
}
