#include "sqdunwrap/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <thread>

#include "sqdunwrap/adam.hpp"
#include "sqdunwrap/errors.hpp"
#include "sqdunwrap/qgpu.hpp"

namespace sqdunwrap {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

const Param<float> *first_non_finite(const ParamList<float> &params) {
    for (const auto *p : params) {
        for (const float v : p->value) {
            if (!std::isfinite(v)) {
                return p;
            }
        }
    }
    return nullptr;
}

} // namespace

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw ConfigError("epochs must be at least 1");
    }
    if (batch_size < 1) {
        throw ConfigError("batch size must be at least 1");
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw ConfigError("learning rate must be a finite non-negative number");
    }
    if (weights.lambda1 < 0.0 || weights.lambda2 < 0.0) {
        throw ConfigError("loss weights must be non-negative");
    }
    arch.validate();
}

void to_json(json &j, const TrainConfig &c) {
    j = json{{"dataset", c.dataset.string()},
             {"arch", c.arch},
             {"lambda1", c.weights.lambda1},
             {"lambda2", c.weights.lambda2},
             {"loss", loss_kind_name(c.loss)},
             {"pooling", c.pooling == LossPooling::joint ? "joint" : "per_image"},
             {"lr", c.lr},
             {"batch_size", c.batch_size},
             {"epochs", c.epochs},
             {"seed", c.seed}};
}

json history_json(const TrainHistory &h, bool with_timing) {
    json epochs = json::array();
    for (const auto &e : h.epochs) {
        json rec{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"test_nrmse", e.test_nrmse}};
        if (with_timing) {
            rec["wall_seconds"] = e.wall_seconds;
        }
        epochs.push_back(rec);
    }
    return json{{"loss", h.loss_name}, {"best_epoch", h.best_epoch}, {"epochs", epochs}};
}

void assemble_batch(const Dataset &data, std::span<const std::size_t> indices,
                    Tensor4<float> &inputs, Tensor4<float> &targets) {
    const Dims d{indices.size(), data.height(), data.width(), 1};
    inputs = Tensor4<float>(d);
    targets = Tensor4<float>(d);
    const std::size_t pixels = data.height() * data.width();
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const Sample s = data.load(indices[b]);
        std::ranges::transform(s.wrapped.values(), inputs.data() + b * pixels,
                               [](double v) { return static_cast<float>(v); });
        std::ranges::transform(s.truth.values(), targets.data() + b * pixels,
                               [](double v) { return static_cast<float>(v); });
    }
}

TrainResult train(const TrainConfig &config, const EpochCallback &on_epoch) {
    const Dataset data(config.dataset);
    return train(config, data, on_epoch);
}

TrainResult train(const TrainConfig &config, const Dataset &data, const EpochCallback &on_epoch) {
    config.validate();
    if (data.height() != config.arch.input_height || data.width() != config.arch.input_width) {
        throw ConfigError("dataset images are " + std::to_string(data.height()) + "x" +
                          std::to_string(data.width()) + " but the network expects " +
                          std::to_string(config.arch.input_height) + "x" +
                          std::to_string(config.arch.input_width));
    }
    if (data.size() < 2) {
        throw ConfigError("dataset needs at least two images for a train/test split");
    }

    auto init_rng = make_stream(config.seed, 1);
    TrainResult result{build<float>(config.arch, init_rng), TrainHistory{},
                       split_indices(data.size(), config.seed), {}};
    Network<float> &model = result.model;
    result.history.loss_name = loss_kind_name(config.loss);

    AdamState<float> adam;
    adam.hyper.lr = config.lr;
    const ParamList<float> params = model.params();
    std::set<std::size_t> used;
    std::vector<std::vector<float>> best_values;
    double best_nrmse = std::numeric_limits<double>::infinity();

    Tensor4<float> inputs;
    Tensor4<float> targets;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = Clock::now();
        std::vector<std::size_t> order = result.split.train;
        auto shuffle_rng = make_stream(config.seed, 1000 + epoch);
        std::ranges::shuffle(order, shuffle_rng);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            const std::span<const std::size_t> batch(order.data() + begin, end - begin);
            assemble_batch(data, batch, inputs, targets);
            model.zero_grad();
            const Tensor4<float> pred = model.forward(inputs, Mode::train);
            const LossResult<float> loss =
                loss_and_grad(config.loss, pred, targets, config.weights, config.pooling);
            if (!std::isfinite(loss.value) || !pred.all_finite()) {
                std::ostringstream msg;
                msg << "non-finite loss at epoch " << epoch << ", batch " << batches
                    << ": loss=" << loss.value << " l_var=" << loss.variance_term
                    << " l_tv=" << loss.tv_term << " images=[";
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    msg << (i ? "," : "") << batch[i];
                }
                msg << "]";
                throw TrainingDiverged(msg.str());
            }
            model.backward(loss.grad);
            adam_step(params, adam);
            if (const Param<float> *bad = first_non_finite(params)) {
                std::ostringstream msg;
                msg << "non-finite parameter " << bad->name << " after the update at epoch " << epoch
                    << ", batch " << batches << ": loss=" << loss.value
                    << " l_var=" << loss.variance_term << " l_tv=" << loss.tv_term << " images=[";
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    msg << (i ? "," : "") << batch[i];
                }
                msg << "]";
                throw TrainingDiverged(msg.str());
            }
            used.insert(batch.begin(), batch.end());
            loss_sum += loss.value;
            ++batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(batches);
        rec.test_nrmse = evaluate(model, data, result.split.test).mean_nrmse;
        rec.wall_seconds = seconds_since(start);
        result.history.epochs.push_back(rec);
        if (rec.test_nrmse < best_nrmse) {
            best_nrmse = rec.test_nrmse;
            result.history.best_epoch = epoch;
            best_values.clear();
            for (const auto *p : params) {
                best_values.push_back(p->value);
            }
        }
        if (on_epoch) {
            on_epoch(rec);
        }
    }
    if (!best_values.empty()) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            params[k]->value = best_values[k];
        }
    }
    result.trained_indices.assign(used.begin(), used.end());
    return result;
}

// ----------------------------------------------------------------- evaluation

std::string snr_label(const std::optional<double> &snr_db) {
    if (!snr_db) {
        return "none";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", *snr_db);
    return buf;
}

MethodReport evaluate_method(const std::string &name, const Predictor &predictor,
                             const Dataset &data, std::span<const std::size_t> indices,
                             unsigned threads) {
    MethodReport report;
    report.method = name;
    report.images.resize(indices.size());
    const auto work = [&](unsigned worker, unsigned workers) {
        for (std::size_t k = worker; k < indices.size(); k += workers) {
            const Sample s = data.load(indices[k]);
            const auto start = Clock::now();
            const PhaseImage pred = predictor(s);
            const double secs = seconds_since(start);
            ImageResult &r = report.images[k];
            r.index = indices[k];
            r.snr_db = s.snr_db;
            r.nrmse = nrmse_offset_corrected(pred, s.truth);
            r.nrmse_raw = nrmse(pred, s.truth);
            r.congruence = congruence_fraction(pred, s.wrapped);
            r.seconds = secs;
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(
                                                                          std::max<std::size_t>(1, indices.size()))));
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(work, w, workers);
        }
    }

    // Reductions run in index order so the result does not depend on threads.
    std::vector<double> values;
    std::map<std::string, double> sums;
    for (const auto &r : report.images) {
        values.push_back(r.nrmse);
        report.mean_nrmse += r.nrmse;
        report.mean_nrmse_raw += r.nrmse_raw;
        report.mean_congruence += r.congruence;
        report.mean_seconds += r.seconds;
        auto &bucket = report.buckets[snr_label(r.snr_db)];
        ++bucket.count;
        sums[snr_label(r.snr_db)] += r.nrmse;
    }
    if (!values.empty()) {
        const double n = static_cast<double>(values.size());
        report.mean_nrmse /= n;
        report.mean_nrmse_raw /= n;
        report.mean_congruence /= n;
        report.mean_seconds /= n;
        std::ranges::sort(values);
        const std::size_t mid = values.size() / 2;
        report.median_nrmse =
            values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    }
    for (auto &[label, bucket] : report.buckets) {
        bucket.mean_nrmse = sums[label] / static_cast<double>(bucket.count);
    }
    return report;
}

json method_json(const MethodReport &r, bool with_timing) {
    json images = json::array();
    for (const auto &im : r.images) {
        json j{{"index", im.index},
               {"snr_db", im.snr_db ? json(*im.snr_db) : json(nullptr)},
               {"nrmse", im.nrmse},
               {"nrmse_raw", im.nrmse_raw},
               {"congruence", im.congruence}};
        if (with_timing) {
            j["seconds"] = im.seconds;
        }
        images.push_back(j);
    }
    json buckets = json::object();
    for (const auto &[label, b] : r.buckets) {
        buckets[label] = {{"count", b.count}, {"mean_nrmse", b.mean_nrmse}};
    }
    json out{{"method", r.method},
             {"mean_nrmse", r.mean_nrmse},
             {"median_nrmse", r.median_nrmse},
             {"mean_nrmse_raw", r.mean_nrmse_raw},
             {"mean_congruence", r.mean_congruence},
             {"snr_buckets", buckets},
             {"images", images}};
    if (with_timing) {
        out["mean_seconds"] = r.mean_seconds;
    }
    return out;
}

PhaseImage predict(Network<float> &model, const WrappedImage &wrapped) {
    const Dims d{1, wrapped.height(), wrapped.width(), 1};
    std::vector<float> in(wrapped.size());
    std::ranges::transform(wrapped.values(), in.begin(),
                           [](double v) { return static_cast<float>(v); });
    const Tensor4<float> out = model.forward(Tensor4<float>(d, std::move(in)), Mode::infer);
    return PhaseImage(wrapped.height(), wrapped.width(),
                      std::vector<double>(out.values().begin(), out.values().end()));
}

MethodReport evaluate(Network<float> &model, const Dataset &data,
                      std::span<const std::size_t> indices, const std::string &name) {
    return evaluate_method(
        name, [&model](const Sample &s) { return predict(model, s.wrapped); }, data, indices, 1);
}

MethodReport evaluate(const std::filesystem::path &checkpoint, const Dataset &data,
                      std::span<const std::size_t> indices) {
    Network<float> model = load_model(checkpoint);
    if (model.config().input_height != data.height() ||
        model.config().input_width != data.width()) {
        throw ConfigError("checkpoint " + checkpoint.string() +
                          " was built for a different image size");
    }
    return evaluate(model, data, indices, "model");
}

Predictor identity_predictor() {
    return [](const Sample &s) {
        return PhaseImage(s.wrapped.height(), s.wrapped.width(),
                          std::vector<double>(s.wrapped.values().begin(), s.wrapped.values().end()));
    };
}

Predictor truth_predictor() {
    return [](const Sample &s) { return s.truth; };
}

Predictor qgpu_predictor() {
    return [](const Sample &s) { return qgpu_unwrap(s.wrapped); };
}

} // namespace sqdunwrap
