#include "sqdunwrap/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "sqdunwrap/errors.hpp"

namespace sqdunwrap {

std::string Dims::str() const {
    return "(" + std::to_string(n) + ", " + std::to_string(h) + ", " + std::to_string(w) + ", " +
           std::to_string(c) + ")";
}

template <typename T>
Tensor4<T>::Tensor4(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims_.count()) {
        throw DimensionMismatch("tensor: " + std::to_string(data_.size()) +
                                " values for dims " + dims_.str());
    }
}

template <typename T>
void Tensor4<T>::fill(T v) {
    std::ranges::fill(data_, v);
}

template <typename T>
bool Tensor4<T>::all_finite() const {
    return std::ranges::all_of(data_, [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T> &a, const Tensor4<T> &b) {
    const Dims da = a.dims();
    const Dims db = b.dims();
    if (da.n != db.n || da.h != db.h || da.w != db.w) {
        throw DimensionMismatch("concat_channels: " + da.str() + " vs " + db.str());
    }
    Tensor4<T> out(Dims{da.n, da.h, da.w, da.c + db.c});
    const std::size_t pixels = da.pixels();
    T *dst = out.data();
    for (std::size_t p = 0; p < pixels; ++p) {
        dst = std::copy_n(a.data() + p * da.c, da.c, dst);
        dst = std::copy_n(b.data() + p * db.c, db.c, dst);
    }
    return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T> &x, std::size_t first_channels) {
    const Dims d = x.dims();
    if (first_channels > d.c) {
        throw DimensionMismatch("split_channels: " + std::to_string(first_channels) +
                                " exceeds channel count of " + d.str());
    }
    Tensor4<T> a(Dims{d.n, d.h, d.w, first_channels});
    Tensor4<T> b(Dims{d.n, d.h, d.w, d.c - first_channels});
    const std::size_t pixels = d.pixels();
    for (std::size_t p = 0; p < pixels; ++p) {
        const T *src = x.data() + p * d.c;
        std::copy_n(src, first_channels, a.data() + p * first_channels);
        std::copy_n(src + first_channels, d.c - first_channels, b.data() + p * (d.c - first_channels));
    }
    return {std::move(a), std::move(b)};
}

template class Tensor4<float>;
template class Tensor4<double>;
template Tensor4<float> concat_channels(const Tensor4<float> &, const Tensor4<float> &);
template Tensor4<double> concat_channels(const Tensor4<double> &, const Tensor4<double> &);
template std::pair<Tensor4<float>, Tensor4<float>> split_channels(const Tensor4<float> &,
                                                                  std::size_t);
template std::pair<Tensor4<double>, Tensor4<double>> split_channels(const Tensor4<double> &,
                                                                    std::size_t);

} // namespace sqdunwrap
