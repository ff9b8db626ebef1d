#include "sqdunwrap/sqd_lstm.hpp"

#include <algorithm>

#include "sqdunwrap/errors.hpp"

namespace sqdunwrap {

const char *direction_name(Direction d) {
    switch (d) {
    case Direction::right:
        return "right";
    case Direction::left:
        return "left";
    case Direction::down:
        return "down";
    case Direction::up:
        return "up";
    }
    return "?";
}

std::vector<std::size_t> traversal_order(Direction dir, std::size_t height, std::size_t width) {
    std::vector<std::size_t> order;
    order.reserve(height * width);
    switch (dir) {
    case Direction::right:
    case Direction::left:
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                order.push_back(y * width + x);
            }
        }
        break;
    case Direction::down:
    case Direction::up:
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t y = 0; y < height; ++y) {
                order.push_back(y * width + x);
            }
        }
        break;
    }
    // Left and up are the exact reversals of right and down.
    if (dir == Direction::left || dir == Direction::up) {
        std::ranges::reverse(order);
    }
    return order;
}

template <typename T>
DirectionalSequences<T> extract_sequences(const Tensor4<T> &x, std::size_t item) {
    const Dims d = x.dims();
    if (item >= d.n) {
        throw InvalidInput("extract_sequences: batch item out of range");
    }
    DirectionalSequences<T> out;
    out.height = d.h;
    out.width = d.w;
    out.channels = d.c;
    const T *base = x.data() + item * d.h * d.w * d.c;
    for (Direction dir : kDirections) {
        auto &seq = out.seqs[static_cast<int>(dir)];
        seq.resize(d.h * d.w * d.c);
        const auto order = traversal_order(dir, d.h, d.w);
        for (std::size_t s = 0; s < order.size(); ++s) {
            std::copy_n(base + order[s] * d.c, d.c, seq.data() + s * d.c);
        }
    }
    return out;
}

template <typename T>
Tensor4<T> reassemble(std::span<const T> seq, std::size_t features, Direction dir,
                      std::size_t height, std::size_t width) {
    if (seq.size() != height * width * features) {
        throw DimensionMismatch("reassemble: sequence length does not match " +
                                std::to_string(height) + "x" + std::to_string(width));
    }
    Tensor4<T> out(Dims{1, height, width, features});
    const auto order = traversal_order(dir, height, width);
    for (std::size_t s = 0; s < order.size(); ++s) {
        std::copy_n(seq.data() + s * features, features, out.data() + order[s] * features);
    }
    return out;
}

template <typename T>
SqdLstm<T>::SqdLstm(const std::string &name, std::size_t in_channels, std::size_t units,
                    std::size_t filters)
    : in_channels_(in_channels), units_(units), filters_(filters),
      lstms_{Lstm<T>(name + ".lstm_right", in_channels, units),
             Lstm<T>(name + ".lstm_left", in_channels, units),
             Lstm<T>(name + ".lstm_down", in_channels, units),
             Lstm<T>(name + ".lstm_up", in_channels, units)},
      fuse_h_(name + ".fuse_horizontal", 3, 2 * units, filters),
      fuse_v_(name + ".fuse_vertical", 3, 2 * units, filters) {}

template <typename T>
void SqdLstm<T>::init(std::mt19937_64 &rng) {
    for (auto &l : lstms_) {
        l.init(rng);
    }
    fuse_h_.init(rng);
    fuse_v_.init(rng);
}

template <typename T>
Tensor4<T> SqdLstm<T>::forward(const Tensor4<T> &x) {
    const Dims d = x.dims();
    if (d.c != in_channels_) {
        throw DimensionMismatch("sqd_lstm: expected " + std::to_string(in_channels_) +
                                " channels, got " + d.str());
    }
    in_dims_ = d;
    const std::size_t steps = d.h * d.w;
    std::array<Tensor4<T>, 4> maps;
    for (Direction dir : kDirections) {
        const auto order = traversal_order(dir, d.h, d.w);
        SequenceBatch<T> seq(steps, d.n, d.c);
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t b = 0; b < d.n; ++b) {
                std::copy_n(x.data() + (b * steps + order[s]) * d.c, d.c, seq.at(s, b));
            }
        }
        const SequenceBatch<T> y = lstms_[static_cast<int>(dir)].forward(seq);
        Tensor4<T> map(Dims{d.n, d.h, d.w, units_});
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t b = 0; b < d.n; ++b) {
                std::copy_n(y.at(s, b), units_, map.data() + (b * steps + order[s]) * units_);
            }
        }
        maps[static_cast<int>(dir)] = std::move(map);
    }
    const Tensor4<T> horizontal = concat_channels(maps[0], maps[1]);
    const Tensor4<T> vertical = concat_channels(maps[2], maps[3]);
    return concat_channels(relu_h_.forward(fuse_h_.forward(horizontal)),
                           relu_v_.forward(fuse_v_.forward(vertical)));
}

template <typename T>
Tensor4<T> SqdLstm<T>::backward(const Tensor4<T> &dy) {
    const Dims d = in_dims_;
    auto [dh, dv] = split_channels(dy, filters_);
    const Tensor4<T> dhorizontal = fuse_h_.backward(relu_h_.backward(dh));
    const Tensor4<T> dvertical = fuse_v_.backward(relu_v_.backward(dv));
    auto [dright, dleft] = split_channels(dhorizontal, units_);
    auto [ddown, dup] = split_channels(dvertical, units_);
    const std::array<const Tensor4<T> *, 4> dmaps{&dright, &dleft, &ddown, &dup};

    const std::size_t steps = d.h * d.w;
    Tensor4<T> dx(d);
    for (Direction dir : kDirections) {
        const auto order = traversal_order(dir, d.h, d.w);
        const Tensor4<T> &dmap = *dmaps[static_cast<int>(dir)];
        SequenceBatch<T> dseq(steps, d.n, units_);
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t b = 0; b < d.n; ++b) {
                std::copy_n(dmap.data() + (b * steps + order[s]) * units_, units_, dseq.at(s, b));
            }
        }
        const SequenceBatch<T> dxs = lstms_[static_cast<int>(dir)].backward(dseq);
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t b = 0; b < d.n; ++b) {
                T *dst = dx.data() + (b * steps + order[s]) * d.c;
                const T *src = dxs.at(s, b);
                for (std::size_t c = 0; c < d.c; ++c) {
                    dst[c] += src[c];
                }
            }
        }
    }
    return dx;
}

template <typename T>
ParamList<T> SqdLstm<T>::params() {
    ParamList<T> out;
    for (auto &l : lstms_) {
        for (auto *p : l.params()) {
            out.push_back(p);
        }
    }
    for (auto *p : fuse_h_.params()) {
        out.push_back(p);
    }
    for (auto *p : fuse_v_.params()) {
        out.push_back(p);
    }
    return out;
}

template DirectionalSequences<float> extract_sequences(const Tensor4<float> &, std::size_t);
template DirectionalSequences<double> extract_sequences(const Tensor4<double> &, std::size_t);
template Tensor4<float> reassemble(std::span<const float>, std::size_t, Direction, std::size_t,
                                   std::size_t);
template Tensor4<double> reassemble(std::span<const double>, std::size_t, Direction, std::size_t,
                                    std::size_t);
template class SqdLstm<float>;
template class SqdLstm<double>;

} // namespace sqdunwrap
