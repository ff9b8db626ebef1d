#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "sqdunwrap/layers.hpp"

namespace sqdunwrap {

/// A batch of equally long sequences, laid out (step, batch, feature).
template <typename T>
struct SequenceBatch {
    std::size_t steps = 0;
    std::size_t batch = 0;
    std::size_t features = 0;
    std::vector<T> data;

    SequenceBatch() = default;
    SequenceBatch(std::size_t steps_, std::size_t batch_, std::size_t features_)
        : steps(steps_), batch(batch_), features(features_), data(steps_ * batch_ * features_) {}

    T *at(std::size_t step, std::size_t b) { return data.data() + (step * batch + b) * features; }
    const T *at(std::size_t step, std::size_t b) const {
        return data.data() + (step * batch + b) * features;
    }
};

/// Single-layer LSTM, zero initial state, one output per step.
///
///   i, f, o = sigmoid(.), g = tanh(.)   (gate order i, f, g, o)
///   c_t = f * c_{t-1} + i * g
///   h_t = o * tanh(c_t)
///
/// w_input is (features, 4u), w_recurrent is (u, 4u).
template <typename T>
class Lstm {
  public:
    Lstm() = default;
    Lstm(const std::string &name, std::size_t input_size, std::size_t units);

    /// Glorot-uniform input weights, orthogonal recurrent weights, forget bias 1.
    void init(std::mt19937_64 &rng);

    SequenceBatch<T> forward(const SequenceBatch<T> &x);
    SequenceBatch<T> backward(const SequenceBatch<T> &dy);
    ParamList<T> params();

    std::size_t input_size() const { return input_size_; }
    std::size_t units() const { return units_; }

    Param<T> w_input;
    Param<T> w_recurrent;
    Param<T> bias;

  private:
    std::size_t input_size_ = 0;
    std::size_t units_ = 0;
    SequenceBatch<T> x_;
    std::vector<T> gates_;  // activated gates per (step, batch), 4u each
    std::vector<T> cells_;  // c_t per (step, batch)
    std::vector<T> hidden_; // h_t per (step, batch)
};

/// Convenience for a single sequence (batch of one).
template <typename T>
std::vector<std::vector<T>> lstm_forward(Lstm<T> &lstm, const std::vector<std::vector<T>> &seq);

} // namespace sqdunwrap
