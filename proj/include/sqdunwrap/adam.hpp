#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sqdunwrap/layers.hpp"

namespace sqdunwrap {

struct AdamHyper {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment accumulators for a fixed list of parameters.
template <typename T>
struct AdamState {
    AdamHyper hyper;
    std::uint64_t t = 0;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
};

/// Bias-corrected Adam update of one parameter array; `t` is the step
/// number after increment (t >= 1).
template <typename T>
void adam_update(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::uint64_t t, const AdamHyper &hyper);

/// One optimizer step over every trainable parameter. The first call sizes
/// the accumulators; later calls require the same parameter list.
template <typename T>
void adam_step(const ParamList<T> &params, AdamState<T> &state);

} // namespace sqdunwrap
