#include "sqdunwrap/network.hpp"

#include <string>

#include "sqdunwrap/checkpoint.hpp"
#include "sqdunwrap/errors.hpp"

namespace sqdunwrap {

using nlohmann::json;

ArchConfig ArchConfig::toy() {
    ArchConfig c;
    c.encoder_filters = {16, 32, 64};
    c.decoder_filters = {64, 32, 16};
    c.input_height = 64;
    c.input_width = 64;
    return c;
}

void ArchConfig::validate() const {
    if (encoder_filters.empty() || encoder_filters.size() != decoder_filters.size()) {
        throw ConfigError("encoder and decoder must have the same, non-zero number of stages");
    }
    const std::size_t factor = std::size_t{1} << stages();
    if (input_height % factor != 0 || input_width % factor != 0 || input_height == 0 ||
        input_width == 0) {
        throw ConfigError("input " + std::to_string(input_height) + "x" +
                          std::to_string(input_width) + " is not divisible by 2^" +
                          std::to_string(stages()) + " = " + std::to_string(factor));
    }
    for (std::size_t f : encoder_filters) {
        if (f == 0) {
            throw ConfigError("filter counts must be positive");
        }
    }
    for (std::size_t f : decoder_filters) {
        if (f == 0) {
            throw ConfigError("filter counts must be positive");
        }
    }
    if (use_sqd && (sqd_units == 0 || sqd_filters == 0)) {
        throw ConfigError("sqd units and filters must be positive");
    }
    if (in_channels == 0 || out_channels == 0) {
        throw ConfigError("channel counts must be positive");
    }
}

void to_json(json &j, const ArchConfig &c) {
    j = json{{"encoder_filters", c.encoder_filters}, {"decoder_filters", c.decoder_filters},
             {"sqd_units", c.sqd_units},             {"sqd_filters", c.sqd_filters},
             {"in_channels", c.in_channels},         {"out_channels", c.out_channels},
             {"input_height", c.input_height},       {"input_width", c.input_width},
             {"use_sqd", c.use_sqd}};
}

void from_json(const json &j, ArchConfig &c) {
    j.at("encoder_filters").get_to(c.encoder_filters);
    j.at("decoder_filters").get_to(c.decoder_filters);
    j.at("sqd_units").get_to(c.sqd_units);
    j.at("sqd_filters").get_to(c.sqd_filters);
    j.at("in_channels").get_to(c.in_channels);
    j.at("out_channels").get_to(c.out_channels);
    j.at("input_height").get_to(c.input_height);
    j.at("input_width").get_to(c.input_width);
    j.at("use_sqd").get_to(c.use_sqd);
}

template <typename T>
Network<T>::Network(const ArchConfig &config) : config_(config) {
    config_.validate();
    const std::size_t stages = config_.stages();
    std::size_t channels = config_.in_channels;
    for (std::size_t s = 0; s < stages; ++s) {
        encoder_.push_back(
            {ConvBlock<T>("enc" + std::to_string(s + 1), channels, config_.encoder_filters[s]),
             MaxPool2<T>{}});
        channels = config_.encoder_filters[s];
    }
    if (config_.use_sqd) {
        sqd_ = std::make_unique<SqdLstm<T>>("sqd", channels, config_.sqd_units,
                                            config_.sqd_filters);
        channels = sqd_->out_channels();
    }
    for (std::size_t s = 0; s < stages; ++s) {
        const std::size_t filters = config_.decoder_filters[s];
        const std::size_t skip = config_.encoder_filters[stages - 1 - s];
        const std::string name = "dec" + std::to_string(s + 1);
        decoder_.push_back({TransposedConv2d<T>(name + ".up", channels, filters),
                            ConvBlock<T>(name, filters + skip, filters), filters});
        channels = filters;
    }
    head_ = Conv2d<T>("head", 1, channels, config_.out_channels, true);
}

template <typename T>
void Network<T>::init(std::mt19937_64 &rng) {
    for (auto &e : encoder_) {
        e.block.init(rng);
    }
    if (sqd_) {
        sqd_->init(rng);
    }
    for (auto &d : decoder_) {
        d.up.init(rng);
        d.block.init(rng);
    }
    head_.init(rng);
}

template <typename T>
Tensor4<T> Network<T>::forward(const Tensor4<T> &x, Mode mode) {
    const Dims d = x.dims();
    if (d.h != config_.input_height || d.w != config_.input_width || d.c != config_.in_channels) {
        throw DimensionMismatch("network expects (n, " + std::to_string(config_.input_height) +
                                ", " + std::to_string(config_.input_width) + ", " +
                                std::to_string(config_.in_channels) + "), got " + d.str());
    }
    std::vector<Tensor4<T>> skips;
    skips.reserve(encoder_.size());
    Tensor4<T> h = x;
    for (auto &e : encoder_) {
        skips.push_back(e.block.forward(h, mode));
        h = e.pool.forward(skips.back());
    }
    if (sqd_) {
        h = sqd_->forward(h);
    }
    for (std::size_t s = 0; s < decoder_.size(); ++s) {
        auto &dec = decoder_[s];
        h = dec.block.forward(concat_channels(dec.up.forward(h), skips[skips.size() - 1 - s]),
                              mode);
    }
    return head_.forward(h);
}

template <typename T>
Tensor4<T> Network<T>::backward(const Tensor4<T> &dy) {
    Tensor4<T> g = head_.backward(dy);
    const std::size_t stages = encoder_.size();
    std::vector<Tensor4<T>> dskips(stages);
    for (std::size_t s = decoder_.size(); s-- > 0;) {
        auto &dec = decoder_[s];
        auto [dup, dskip] = split_channels(dec.block.backward(g), dec.up_channels);
        dskips[stages - 1 - s] = std::move(dskip);
        g = dec.up.backward(dup);
    }
    if (sqd_) {
        g = sqd_->backward(g);
    }
    for (std::size_t s = stages; s-- > 0;) {
        Tensor4<T> dact = encoder_[s].pool.backward(g);
        const auto &ds = dskips[s];
        for (std::size_t i = 0; i < dact.size(); ++i) {
            dact.data()[i] += ds.data()[i];
        }
        g = encoder_[s].block.backward(dact);
    }
    return g;
}

template <typename T>
ParamList<T> Network<T>::params() {
    ParamList<T> out;
    const auto append = [&out](const ParamList<T> &ps) { out.insert(out.end(), ps.begin(), ps.end()); };
    for (auto &e : encoder_) {
        append(e.block.params());
    }
    if (sqd_) {
        append(sqd_->params());
    }
    for (auto &d : decoder_) {
        append(d.up.params());
        append(d.block.params());
    }
    append(head_.params());
    return out;
}

template <typename T>
void Network<T>::zero_grad() {
    for (auto *p : params()) {
        p->zero_grad();
    }
}

template <typename T>
std::size_t Network<T>::trainable_count() {
    std::size_t n = 0;
    for (auto *p : params()) {
        if (p->trainable) {
            n += p->size();
        }
    }
    return n;
}

template class Network<float>;
template class Network<double>;

void save_model(const std::filesystem::path &path, Network<float> &net, const json &extra_meta) {
    json meta = extra_meta;
    meta["arch"] = net.config();
    save_checkpoint(path, net.params(), meta);
}

Network<float> load_model(const std::filesystem::path &path) {
    const CheckpointData data = read_checkpoint(path);
    if (!data.meta.contains("arch")) {
        throw ConfigError("checkpoint " + path.string() + " has no architecture record");
    }
    ArchConfig arch;
    try {
        arch = data.meta.at("arch").get<ArchConfig>();
    } catch (const json::exception &e) {
        throw ConfigError(std::string("checkpoint architecture: ") + e.what());
    }
    Network<float> net(arch);
    assign_checkpoint(data, net.params());
    return net;
}

} // namespace sqdunwrap
