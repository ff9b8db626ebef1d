#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sqdunwrap {

/// Shape of an NHWC tensor.
struct Dims {
    std::size_t n = 1;
    std::size_t h = 1;
    std::size_t w = 1;
    std::size_t c = 1;

    std::size_t count() const { return n * h * w * c; }
    std::size_t pixels() const { return n * h * w; }
    bool operator==(const Dims &) const = default;
    std::string str() const;
};

/// Dense 4-D array (batch, height, width, channels), channels fastest.
template <typename T>
class Tensor4 {
  public:
    Tensor4() = default;
    explicit Tensor4(Dims dims, T fill = T(0)) : dims_(dims), data_(dims.count(), fill) {}
    Tensor4(Dims dims, std::vector<T> data);

    const Dims &dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }

    T *data() { return data_.data(); }
    const T *data() const { return data_.data(); }
    std::span<T> values() { return data_; }
    std::span<const T> values() const { return data_; }

    T &operator()(std::size_t n, std::size_t y, std::size_t x, std::size_t c) {
        return data_[((n * dims_.h + y) * dims_.w + x) * dims_.c + c];
    }
    T operator()(std::size_t n, std::size_t y, std::size_t x, std::size_t c) const {
        return data_[((n * dims_.h + y) * dims_.w + x) * dims_.c + c];
    }

    T *ptr(std::size_t n, std::size_t y, std::size_t x) {
        return data_.data() + ((n * dims_.h + y) * dims_.w + x) * dims_.c;
    }
    const T *ptr(std::size_t n, std::size_t y, std::size_t x) const {
        return data_.data() + ((n * dims_.h + y) * dims_.w + x) * dims_.c;
    }

    void fill(T v);
    bool all_finite() const;

  private:
    Dims dims_{0, 0, 0, 0};
    std::vector<T> data_;
};

/// Concatenates along channels: (a channels, then b channels).
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T> &a, const Tensor4<T> &b);

/// Inverse of concat_channels, first part keeps `first_channels` channels.
template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T> &x, std::size_t first_channels);

/// Elementwise precision conversion.
template <typename To, typename From>
Tensor4<To> tensor_cast(const Tensor4<From> &x) {
    std::vector<To> out(x.values().begin(), x.values().end());
    return Tensor4<To>(x.dims(), std::move(out));
}

extern template class Tensor4<float>;
extern template class Tensor4<double>;

} // namespace sqdunwrap
