#include "sqdunwrap/adam.hpp"

#include <cmath>

#include "sqdunwrap/errors.hpp"

namespace sqdunwrap {

template <typename T>
void adam_update(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 std::uint64_t t, const AdamHyper &hyper) {
    if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
        throw DimensionMismatch("adam: parameter, gradient and moment sizes differ");
    }
    const double b1 = hyper.beta1;
    const double b2 = hyper.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
        const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double mhat = mi / c1;
        const double vhat = vi / c2;
        theta[i] = static_cast<T>(static_cast<double>(theta[i]) -
                                  hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps));
    }
}

template <typename T>
void adam_step(const ParamList<T> &params, AdamState<T> &state) {
    if (state.m.empty() && state.t == 0) {
        for (const Param<T> *p : params) {
            state.m.emplace_back(p->size(), T(0));
            state.v.emplace_back(p->size(), T(0));
        }
    }
    if (state.m.size() != params.size()) {
        throw DimensionMismatch("adam: parameter list changed between steps");
    }
    ++state.t;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Param<T> &p = *params[k];
        if (!p.trainable) {
            continue;
        }
        adam_update<T>(p.value, p.grad, state.m[k], state.v[k], state.t, state.hyper);
    }
}

template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>,
                                 std::span<float>, std::uint64_t, const AdamHyper &);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                  std::span<double>, std::uint64_t, const AdamHyper &);
template void adam_step(const ParamList<float> &, AdamState<float> &);
template void adam_step(const ParamList<double> &, AdamState<double> &);

} // namespace sqdunwrap
