#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "sqdunwrap/tensor.hpp"

namespace sqdunwrap {

enum class Mode { train, infer };

/// A named weight array with its gradient accumulator. Non-trainable
/// parameters (batch-norm running statistics) are skipped by the optimizer
/// but still checkpointed.
template <typename T>
struct Param {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool trainable = true;

    Param() = default;
    Param(std::string name_, std::vector<std::size_t> shape_, bool trainable_ = true);

    std::size_t size() const { return value.size(); }
    void zero_grad();
};

template <typename T>
using ParamList = std::vector<Param<T> *>;

/// He-normal fill with the given fan-in.
template <typename T>
void he_normal(Param<T> &p, std::size_t fan_in, std::mt19937_64 &rng);

/// 3x3 or 1x1 convolution, stride 1, zero "same" padding.
/// Weight layout (ky, kx, cin, cout).
template <typename T>
class Conv2d {
  public:
    Conv2d() = default;
    Conv2d(const std::string &name, std::size_t kernel, std::size_t in_channels,
           std::size_t out_channels, bool bias = true);

    void init(std::mt19937_64 &rng);
    Tensor4<T> forward(const Tensor4<T> &x);
    Tensor4<T> backward(const Tensor4<T> &dy);
    ParamList<T> params();

    std::size_t kernel() const { return kernel_; }
    std::size_t in_channels() const { return cin_; }
    std::size_t out_channels() const { return cout_; }

    Param<T> weight;
    Param<T> bias;

  private:
    std::size_t kernel_ = 3;
    std::size_t cin_ = 0;
    std::size_t cout_ = 0;
    bool has_bias_ = true;
    Dims in_dims_{};
    std::vector<T> cols_; // im2col of the last input (or the input itself for 1x1)
};

/// 3x3 transposed convolution with stride 2; output is exactly (2h, 2w).
/// It is the adjoint of a stride-2 3x3 convolution whose window for output
/// (i, j) starts at input (2i, 2j). Weight layout (cin, ky, kx, cout).
template <typename T>
class TransposedConv2d {
  public:
    TransposedConv2d() = default;
    TransposedConv2d(const std::string &name, std::size_t in_channels, std::size_t out_channels);

    void init(std::mt19937_64 &rng);
    Tensor4<T> forward(const Tensor4<T> &x);
    Tensor4<T> backward(const Tensor4<T> &dy);
    ParamList<T> params();

    Param<T> weight;
    Param<T> bias;

  private:
    std::size_t cin_ = 0;
    std::size_t cout_ = 0;
    Tensor4<T> input_;
};

/// Reference stride-2 3x3 convolution that transposed_conv is the adjoint of.
/// Uses the transposed layer's weights: x has `cout` channels, y has `cin`.
template <typename T>
Tensor4<T> strided_conv_adjoint_reference(const Tensor4<T> &x, const Param<T> &tconv_weight,
                                          std::size_t cin, std::size_t cout);

/// Per-channel batch normalization over (n, h, w).
template <typename T>
class BatchNorm {
  public:
    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.9;

    BatchNorm() = default;
    BatchNorm(const std::string &name, std::size_t channels);

    Tensor4<T> forward(const Tensor4<T> &x, Mode mode);
    Tensor4<T> backward(const Tensor4<T> &dy);
    ParamList<T> params();

    Param<T> gamma;
    Param<T> beta;
    Param<T> running_mean;
    Param<T> running_var;

  private:
    std::size_t channels_ = 0;
    Tensor4<T> xhat_;
    std::vector<T> inv_std_;
};

template <typename T>
class Relu {
  public:
    Tensor4<T> forward(const Tensor4<T> &x);
    Tensor4<T> backward(const Tensor4<T> &dy) const;

  private:
    Tensor4<T> output_;
};

/// 2x2 max pooling with stride 2. Input height and width must be even.
template <typename T>
class MaxPool2 {
  public:
    Tensor4<T> forward(const Tensor4<T> &x);
    Tensor4<T> backward(const Tensor4<T> &dy) const;

  private:
    Dims in_dims_{};
    std::vector<std::size_t> argmax_;
};

/// 3x3 conv + batch norm + ReLU.
template <typename T>
class ConvBlock {
  public:
    ConvBlock() = default;
    ConvBlock(const std::string &name, std::size_t in_channels, std::size_t out_channels);

    void init(std::mt19937_64 &rng) { conv.init(rng); }
    Tensor4<T> forward(const Tensor4<T> &x, Mode mode);
    Tensor4<T> backward(const Tensor4<T> &dy);
    ParamList<T> params();

    Conv2d<T> conv;
    BatchNorm<T> bn;
    Relu<T> relu;
};

} // namespace sqdunwrap
