#include "sqdunwrap/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Core>

#include "sqdunwrap/errors.hpp"

namespace sqdunwrap {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

std::size_t product(const std::vector<std::size_t> &shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_channels(const Dims &d, std::size_t expected, const char *layer) {
    if (d.c != expected) {
        throw DimensionMismatch(std::string(layer) + ": expected " + std::to_string(expected) +
                                " input channels, got " + d.str());
    }
}

} // namespace

template <typename T>
Param<T>::Param(std::string name_, std::vector<std::size_t> shape_, bool trainable_)
    : name(std::move(name_)), shape(std::move(shape_)), value(product(shape), T(0)),
      grad(value.size(), T(0)), trainable(trainable_) {}

template <typename T>
void Param<T>::zero_grad() {
    std::ranges::fill(grad, T(0));
}

template <typename T>
void he_normal(Param<T> &p, std::size_t fan_in, std::mt19937_64 &rng) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (T &v : p.value) {
        v = static_cast<T>(dist(rng));
    }
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(const std::string &name, std::size_t kernel, std::size_t in_channels,
                  std::size_t out_channels, bool bias_)
    : weight(name + ".weight", {kernel, kernel, in_channels, out_channels}),
      bias(name + ".bias", {bias_ ? out_channels : 0}), kernel_(kernel), cin_(in_channels),
      cout_(out_channels), has_bias_(bias_) {
    if (kernel != 1 && kernel != 3) {
        throw InvalidInput("conv2d: only 1x1 and 3x3 kernels are supported");
    }
}

template <typename T>
void Conv2d<T>::init(std::mt19937_64 &rng) {
    he_normal(weight, kernel_ * kernel_ * cin_, rng);
    std::ranges::fill(bias.value, T(0));
}

template <typename T>
Tensor4<T> Conv2d<T>::forward(const Tensor4<T> &x) {
    const Dims d = x.dims();
    require_channels(d, cin_, "conv2d");
    in_dims_ = d;
    const std::size_t rows = d.pixels();
    const std::size_t k = kernel_ * kernel_ * cin_;

    if (kernel_ == 1) {
        cols_.assign(x.values().begin(), x.values().end());
    } else {
        cols_.assign(rows * k, T(0));
        const auto h = static_cast<std::ptrdiff_t>(d.h);
        const auto w = static_cast<std::ptrdiff_t>(d.w);
        for (std::size_t n = 0; n < d.n; ++n) {
            for (std::ptrdiff_t y = 0; y < h; ++y) {
                for (std::ptrdiff_t xx = 0; xx < w; ++xx) {
                    T *row = cols_.data() + ((n * d.h + y) * d.w + xx) * k;
                    for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
                        const std::ptrdiff_t sy = y + ky - 1;
                        for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
                            const std::ptrdiff_t sx = xx + kx - 1;
                            if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
                                std::copy_n(x.ptr(n, sy, sx), cin_, row);
                            }
                            row += cin_;
                        }
                    }
                }
            }
        }
    }

    Tensor4<T> y(Dims{d.n, d.h, d.w, cout_});
    CMapR<T> cols(cols_.data(), rows, k);
    CMapR<T> wmat(weight.value.data(), k, cout_);
    MapR<T> out(y.data(), rows, cout_);
    out.noalias() = cols * wmat;
    if (has_bias_) {
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.value.data(), cout_);
        out.rowwise() += b;
    }
    return y;
}

template <typename T>
Tensor4<T> Conv2d<T>::backward(const Tensor4<T> &dy) {
    const Dims d = in_dims_;
    if (dy.dims() != Dims{d.n, d.h, d.w, cout_}) {
        throw DimensionMismatch("conv2d backward: gradient dims " + dy.dims().str());
    }
    const std::size_t rows = d.pixels();
    const std::size_t k = kernel_ * kernel_ * cin_;
    CMapR<T> cols(cols_.data(), rows, k);
    CMapR<T> g(dy.data(), rows, cout_);
    MapR<T> gw(weight.grad.data(), k, cout_);
    gw.noalias() += cols.transpose() * g;
    if (has_bias_) {
        // Plain loop: Eigen's vectorised column sums depend on pointer alignment.
        for (std::size_t r = 0; r < rows; ++r) {
            const T *src = dy.data() + r * cout_;
            for (std::size_t o = 0; o < cout_; ++o) {
                bias.grad[o] += src[o];
            }
        }
    }
    CMapR<T> wmat(weight.value.data(), k, cout_);

    Tensor4<T> dx(d);
    if (kernel_ == 1) {
        MapR<T> out(dx.data(), rows, cin_);
        out.noalias() = g * wmat.transpose();
        return dx;
    }
    MatR<T> dcols = g * wmat.transpose();
    const auto h = static_cast<std::ptrdiff_t>(d.h);
    const auto w = static_cast<std::ptrdiff_t>(d.w);
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            for (std::ptrdiff_t xx = 0; xx < w; ++xx) {
                const T *row = dcols.data() + ((n * d.h + y) * d.w + xx) * k;
                for (std::ptrdiff_t ky = 0; ky < 3; ++ky) {
                    const std::ptrdiff_t sy = y + ky - 1;
                    for (std::ptrdiff_t kx = 0; kx < 3; ++kx) {
                        const std::ptrdiff_t sx = xx + kx - 1;
                        if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
                            T *dst = dx.ptr(n, sy, sx);
                            for (std::size_t c = 0; c < cin_; ++c) {
                                dst[c] += row[c];
                            }
                        }
                        row += cin_;
                    }
                }
            }
        }
    }
    return dx;
}

template <typename T>
ParamList<T> Conv2d<T>::params() {
    if (has_bias_) {
        return {&weight, &bias};
    }
    return {&weight};
}

// ------------------------------------------------------ TransposedConv2d

template <typename T>
TransposedConv2d<T>::TransposedConv2d(const std::string &name, std::size_t in_channels,
                                      std::size_t out_channels)
    : weight(name + ".weight", {in_channels, 3, 3, out_channels}),
      bias(name + ".bias", {out_channels}), cin_(in_channels), cout_(out_channels) {}

template <typename T>
void TransposedConv2d<T>::init(std::mt19937_64 &rng) {
    he_normal(weight, 9 * cin_, rng);
    std::ranges::fill(bias.value, T(0));
}

template <typename T>
Tensor4<T> TransposedConv2d<T>::forward(const Tensor4<T> &x) {
    const Dims d = x.dims();
    require_channels(d, cin_, "transposed_conv");
    input_ = x;
    const std::size_t rows = d.pixels();
    const std::size_t k = 9 * cout_;
    CMapR<T> in(x.data(), rows, cin_);
    CMapR<T> wmat(weight.value.data(), cin_, k);
    MatR<T> cols = in * wmat;

    const std::size_t oh = 2 * d.h;
    const std::size_t ow = 2 * d.w;
    Tensor4<T> y(Dims{d.n, oh, ow, cout_});
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t i = 0; i < d.h; ++i) {
            for (std::size_t j = 0; j < d.w; ++j) {
                const T *row = cols.data() + ((n * d.h + i) * d.w + j) * k;
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::size_t oy = 2 * i + ky;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::size_t ox = 2 * j + kx;
                        if (oy < oh && ox < ow) {
                            T *dst = y.ptr(n, oy, ox);
                            const T *src = row + (ky * 3 + kx) * cout_;
                            for (std::size_t c = 0; c < cout_; ++c) {
                                dst[c] += src[c];
                            }
                        }
                    }
                }
            }
        }
    }
    for (std::size_t p = 0; p < y.dims().pixels(); ++p) {
        T *dst = y.data() + p * cout_;
        for (std::size_t c = 0; c < cout_; ++c) {
            dst[c] += bias.value[c];
        }
    }
    return y;
}

template <typename T>
Tensor4<T> TransposedConv2d<T>::backward(const Tensor4<T> &dy) {
    const Dims d = input_.dims();
    const std::size_t oh = 2 * d.h;
    const std::size_t ow = 2 * d.w;
    if (dy.dims() != Dims{d.n, oh, ow, cout_}) {
        throw DimensionMismatch("transposed_conv backward: gradient dims " + dy.dims().str());
    }
    const std::size_t rows = d.pixels();
    const std::size_t k = 9 * cout_;
    MatR<T> dcols = MatR<T>::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(k));
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t i = 0; i < d.h; ++i) {
            for (std::size_t j = 0; j < d.w; ++j) {
                T *row = dcols.data() + ((n * d.h + i) * d.w + j) * k;
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::size_t oy = 2 * i + ky;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::size_t ox = 2 * j + kx;
                        if (oy < oh && ox < ow) {
                            std::copy_n(dy.ptr(n, oy, ox), cout_, row + (ky * 3 + kx) * cout_);
                        }
                    }
                }
            }
        }
    }
    for (std::size_t p = 0; p < dy.dims().pixels(); ++p) {
        const T *src = dy.data() + p * cout_;
        for (std::size_t c = 0; c < cout_; ++c) {
            bias.grad[c] += src[c];
        }
    }
    CMapR<T> in(input_.data(), rows, cin_);
    MapR<T> gw(weight.grad.data(), cin_, k);
    gw.noalias() += in.transpose() * dcols;
    CMapR<T> wmat(weight.value.data(), cin_, k);
    Tensor4<T> dx(d);
    MapR<T> out(dx.data(), rows, cin_);
    out.noalias() = dcols * wmat.transpose();
    return dx;
}

template <typename T>
ParamList<T> TransposedConv2d<T>::params() {
    return {&weight, &bias};
}

template <typename T>
Tensor4<T> strided_conv_adjoint_reference(const Tensor4<T> &x, const Param<T> &tconv_weight,
                                          std::size_t cin, std::size_t cout) {
    const Dims d = x.dims();
    require_channels(d, cout, "strided_conv");
    if (d.h % 2 != 0 || d.w % 2 != 0) {
        throw InvalidInput("strided_conv: spatial dims must be even");
    }
    Tensor4<T> y(Dims{d.n, d.h / 2, d.w / 2, cin});
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t i = 0; i < d.h / 2; ++i) {
            for (std::size_t j = 0; j < d.w / 2; ++j) {
                for (std::size_t ci = 0; ci < cin; ++ci) {
                    T acc = 0;
                    for (std::size_t ky = 0; ky < 3; ++ky) {
                        for (std::size_t kx = 0; kx < 3; ++kx) {
                            const std::size_t sy = 2 * i + ky;
                            const std::size_t sx = 2 * j + kx;
                            if (sy >= d.h || sx >= d.w) {
                                continue;
                            }
                            for (std::size_t co = 0; co < cout; ++co) {
                                acc += x(n, sy, sx, co) *
                                       tconv_weight.value[((ci * 3 + ky) * 3 + kx) * cout + co];
                            }
                        }
                    }
                    y(n, i, j, ci) = acc;
                }
            }
        }
    }
    return y;
}

// ------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(const std::string &name, std::size_t channels)
    : gamma(name + ".gamma", {channels}), beta(name + ".beta", {channels}),
      running_mean(name + ".running_mean", {channels}, false),
      running_var(name + ".running_var", {channels}, false), channels_(channels) {
    std::ranges::fill(gamma.value, T(1));
    std::ranges::fill(running_var.value, T(1));
}

template <typename T>
Tensor4<T> BatchNorm<T>::forward(const Tensor4<T> &x, Mode mode) {
    const Dims d = x.dims();
    require_channels(d, channels_, "batch_norm");
    const std::size_t pixels = d.pixels();
    const std::size_t c = channels_;
    Tensor4<T> y(d);
    if (mode == Mode::infer) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T inv = T(1) / std::sqrt(running_var.value[ch] + static_cast<T>(kEps));
            const T scale = gamma.value[ch] * inv;
            const T shift = beta.value[ch] - running_mean.value[ch] * scale;
            for (std::size_t p = 0; p < pixels; ++p) {
                y.data()[p * c + ch] = x.data()[p * c + ch] * scale + shift;
            }
        }
        return y;
    }

    // Statistics accumulate in double so that float training matches the
    // textbook formula closely.
    std::vector<double> mean(c, 0.0);
    std::vector<double> var(c, 0.0);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            mean[ch] += static_cast<double>(x.data()[p * c + ch]);
        }
    }
    for (double &m : mean) {
        m /= static_cast<double>(pixels);
    }
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double e = static_cast<double>(x.data()[p * c + ch]) - mean[ch];
            var[ch] += e * e;
        }
    }
    xhat_ = Tensor4<T>(d);
    inv_std_.assign(c, T(0));
    for (std::size_t ch = 0; ch < c; ++ch) {
        var[ch] /= static_cast<double>(pixels);
        inv_std_[ch] = static_cast<T>(1.0 / std::sqrt(var[ch] + kEps));
        running_mean.value[ch] = static_cast<T>(kMomentum * running_mean.value[ch] +
                                                (1.0 - kMomentum) * mean[ch]);
        running_var.value[ch] = static_cast<T>(kMomentum * running_var.value[ch] +
                                               (1.0 - kMomentum) * var[ch]);
    }
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i = p * c + ch;
            const T xh = static_cast<T>((static_cast<double>(x.data()[i]) - mean[ch])) *
                         inv_std_[ch];
            xhat_.data()[i] = xh;
            y.data()[i] = gamma.value[ch] * xh + beta.value[ch];
        }
    }
    return y;
}

template <typename T>
Tensor4<T> BatchNorm<T>::backward(const Tensor4<T> &dy) {
    const Dims d = xhat_.dims();
    if (dy.dims() != d) {
        throw DimensionMismatch("batch_norm backward: gradient dims " + dy.dims().str());
    }
    const std::size_t pixels = d.pixels();
    const std::size_t c = channels_;
    std::vector<double> sum_dy(c, 0.0);
    std::vector<double> sum_dy_xhat(c, 0.0);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i = p * c + ch;
            sum_dy[ch] += static_cast<double>(dy.data()[i]);
            sum_dy_xhat[ch] += static_cast<double>(dy.data()[i]) * xhat_.data()[i];
        }
    }
    for (std::size_t ch = 0; ch < c; ++ch) {
        beta.grad[ch] += static_cast<T>(sum_dy[ch]);
        gamma.grad[ch] += static_cast<T>(sum_dy_xhat[ch]);
    }
    Tensor4<T> dx(d);
    const double m = static_cast<double>(pixels);
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t i = p * c + ch;
            const double scale = static_cast<double>(gamma.value[ch] * inv_std_[ch]) / m;
            dx.data()[i] = static_cast<T>(
                scale * (m * dy.data()[i] - sum_dy[ch] - xhat_.data()[i] * sum_dy_xhat[ch]));
        }
    }
    return dx;
}

template <typename T>
ParamList<T> BatchNorm<T>::params() {
    return {&gamma, &beta, &running_mean, &running_var};
}

// ------------------------------------------------------------ Relu, pool

template <typename T>
Tensor4<T> Relu<T>::forward(const Tensor4<T> &x) {
    output_ = x;
    for (T &v : output_.values()) {
        v = v < T(0) ? T(0) : v; // NaN passes through
    }
    return output_;
}

template <typename T>
Tensor4<T> Relu<T>::backward(const Tensor4<T> &dy) const {
    if (dy.dims() != output_.dims()) {
        throw DimensionMismatch("relu backward: gradient dims " + dy.dims().str());
    }
    Tensor4<T> dx(dy.dims());
    for (std::size_t i = 0; i < dy.size(); ++i) {
        dx.data()[i] = output_.data()[i] > T(0) ? dy.data()[i] : T(0);
    }
    return dx;
}

template <typename T>
Tensor4<T> MaxPool2<T>::forward(const Tensor4<T> &x) {
    const Dims d = x.dims();
    if (d.h % 2 != 0 || d.w % 2 != 0) {
        throw InvalidInput("max_pool_2x2: height and width must be even, got " + d.str());
    }
    in_dims_ = d;
    Tensor4<T> y(Dims{d.n, d.h / 2, d.w / 2, d.c});
    argmax_.assign(y.size(), 0);
    std::size_t out = 0;
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t i = 0; i < d.h / 2; ++i) {
            for (std::size_t j = 0; j < d.w / 2; ++j) {
                for (std::size_t c = 0; c < d.c; ++c, ++out) {
                    std::size_t best = ((n * d.h + 2 * i) * d.w + 2 * j) * d.c + c;
                    for (std::size_t dy = 0; dy < 2; ++dy) {
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t idx =
                                ((n * d.h + 2 * i + dy) * d.w + 2 * j + dx) * d.c + c;
                            if (x.data()[idx] > x.data()[best]) {
                                best = idx;
                            }
                        }
                    }
                    argmax_[out] = best;
                    y.data()[out] = x.data()[best];
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor4<T> MaxPool2<T>::backward(const Tensor4<T> &dy) const {
    if (dy.size() != argmax_.size()) {
        throw DimensionMismatch("max_pool backward: gradient dims " + dy.dims().str());
    }
    Tensor4<T> dx(in_dims_);
    for (std::size_t i = 0; i < argmax_.size(); ++i) {
        dx.data()[argmax_[i]] += dy.data()[i];
    }
    return dx;
}

// ------------------------------------------------------------- ConvBlock

template <typename T>
ConvBlock<T>::ConvBlock(const std::string &name, std::size_t in_channels,
                        std::size_t out_channels)
    : conv(name + ".conv", 3, in_channels, out_channels, false), bn(name + ".bn", out_channels) {}

template <typename T>
Tensor4<T> ConvBlock<T>::forward(const Tensor4<T> &x, Mode mode) {
    return relu.forward(bn.forward(conv.forward(x), mode));
}

template <typename T>
Tensor4<T> ConvBlock<T>::backward(const Tensor4<T> &dy) {
    return conv.backward(bn.backward(relu.backward(dy)));
}

template <typename T>
ParamList<T> ConvBlock<T>::params() {
    ParamList<T> out = conv.params();
    for (auto *p : bn.params()) {
        out.push_back(p);
    }
    return out;
}

#define SQDUNWRAP_INSTANTIATE(T)                                                                   \
    template struct Param<T>;                                                                      \
    template void he_normal(Param<T> &, std::size_t, std::mt19937_64 &);                           \
    template class Conv2d<T>;                                                                      \
    template class TransposedConv2d<T>;                                                            \
    template Tensor4<T> strided_conv_adjoint_reference(const Tensor4<T> &, const Param<T> &,       \
                                                       std::size_t, std::size_t);                  \
    template class BatchNorm<T>;                                                                   \
    template class Relu<T>;                                                                        \
    template class MaxPool2<T>;                                                                    \
    template class ConvBlock<T>;

SQDUNWRAP_INSTANTIATE(float)
SQDUNWRAP_INSTANTIATE(double)

#undef SQDUNWRAP_INSTANTIATE

} // namespace sqdunwrap
