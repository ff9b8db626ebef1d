#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "sqdunwrap/layers.hpp"
#include "sqdunwrap/sqd_lstm.hpp"

namespace sqdunwrap {

/// Encoder/decoder geometry. One conv block per stage; each encoder stage
/// halves the resolution, each decoder stage doubles it.
struct ArchConfig {
    std::vector<std::size_t> encoder_filters{32, 64, 128, 256};
    std::vector<std::size_t> decoder_filters{256, 128, 64, 32};
    std::size_t sqd_units = 32;
    std::size_t sqd_filters = 64;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t input_height = 256;
    std::size_t input_width = 256;
    bool use_sqd = true; // false: the plain U-Net ablation

    /// 64x64 input, three stages with 16/32/64 filters.
    static ArchConfig toy();

    std::size_t stages() const { return encoder_filters.size(); }
    void validate() const;
};

void to_json(nlohmann::json &j, const ArchConfig &c);
void from_json(const nlohmann::json &j, ArchConfig &c);

/// Encoder -> quad-directional LSTM -> decoder with concatenated skips and
/// a linear 1x1 head.
template <typename T>
class Network {
  public:
    explicit Network(const ArchConfig &config);

    /// He-normal convolutions, LSTM initializers, unit BN scale.
    void init(std::mt19937_64 &rng);

    Tensor4<T> forward(const Tensor4<T> &x, Mode mode);
    /// Accumulates parameter gradients; returns the input gradient.
    Tensor4<T> backward(const Tensor4<T> &dy);

    /// Every parameter in checkpoint order, BN running statistics included.
    ParamList<T> params();
    void zero_grad();
    std::size_t trainable_count();

    const ArchConfig &config() const { return config_; }

  private:
    struct EncoderStage {
        ConvBlock<T> block;
        MaxPool2<T> pool;
    };
    struct DecoderStage {
        TransposedConv2d<T> up;
        ConvBlock<T> block;
        std::size_t up_channels = 0;
    };

    ArchConfig config_;
    std::vector<EncoderStage> encoder_;
    std::unique_ptr<SqdLstm<T>> sqd_;
    std::vector<DecoderStage> decoder_;
    Conv2d<T> head_;
};

template <typename T>
Network<T> build(const ArchConfig &config, std::mt19937_64 &rng) {
    Network<T> net(config);
    net.init(rng);
    return net;
}

/// Checkpoint with the architecture stored under meta["arch"].
void save_model(const std::filesystem::path &path, Network<float> &net,
                const nlohmann::json &extra_meta = nlohmann::json::object());
Network<float> load_model(const std::filesystem::path &path);

extern template class Network<float>;
extern template class Network<double>;

} // namespace sqdunwrap
