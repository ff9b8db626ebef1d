#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sqdunwrap/layers.hpp"
#include "sqdunwrap/lstm.hpp"
#include "sqdunwrap/tensor.hpp"

namespace sqdunwrap {

/// Scan directions over a feature map. Each scan is one sequence of length
/// h*w that covers the whole map; state carries across row/column ends.
///   right: rows top to bottom, each left to right
///   left:  rows bottom to top, each right to left
///   down:  columns left to right, each top to bottom
///   up:    columns right to left, each bottom to top
enum class Direction { right = 0, left = 1, down = 2, up = 3 };

inline constexpr std::array<Direction, 4> kDirections{Direction::right, Direction::left,
                                                      Direction::down, Direction::up};

const char *direction_name(Direction d);

/// Row-major pixel index visited at every step of the scan.
std::vector<std::size_t> traversal_order(Direction dir, std::size_t height, std::size_t width);

/// The four scans of one feature map, each stored (step, channel).
template <typename T>
struct DirectionalSequences {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::array<std::vector<T>, 4> seqs;

    const std::vector<T> &operator[](Direction d) const { return seqs[static_cast<int>(d)]; }
};

/// Scans batch item `item` of x in all four directions.
template <typename T>
DirectionalSequences<T> extract_sequences(const Tensor4<T> &x, std::size_t item = 0);

/// Places a (step, feature) sequence back at the pixels its scan visited.
template <typename T>
Tensor4<T> reassemble(std::span<const T> seq, std::size_t features, Direction dir,
                      std::size_t height, std::size_t width);

/// Quad-directional LSTM block: four independent LSTMs (units u) over the
/// four scans, horizontal pair (right, left) and vertical pair (down, up)
/// each fused by its own 3x3 conv with d filters and a ReLU, output
/// channels ordered (horizontal d, vertical d).
template <typename T>
class SqdLstm {
  public:
    SqdLstm() = default;
    SqdLstm(const std::string &name, std::size_t in_channels, std::size_t units,
            std::size_t filters);

    void init(std::mt19937_64 &rng);
    Tensor4<T> forward(const Tensor4<T> &x);
    Tensor4<T> backward(const Tensor4<T> &dy);
    ParamList<T> params();

    std::size_t out_channels() const { return 2 * filters_; }
    Lstm<T> &lstm(Direction d) { return lstms_[static_cast<int>(d)]; }
    Conv2d<T> &fuse_horizontal() { return fuse_h_; }
    Conv2d<T> &fuse_vertical() { return fuse_v_; }

  private:
    std::size_t in_channels_ = 0;
    std::size_t units_ = 0;
    std::size_t filters_ = 0;
    std::array<Lstm<T>, 4> lstms_;
    Conv2d<T> fuse_h_;
    Conv2d<T> fuse_v_;
    Relu<T> relu_h_;
    Relu<T> relu_v_;
    Dims in_dims_{};
};

} // namespace sqdunwrap
