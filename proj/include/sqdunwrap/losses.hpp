#pragma once

#include <string>

#include "sqdunwrap/tensor.hpp"

namespace sqdunwrap {

struct LossWeights {
    double lambda1 = 1.0; // variance-of-error weight
    double lambda2 = 0.1; // total-variation-of-error weight
};

enum class LossKind { composite, mse };

/// How expectations pool: over batch and pixels jointly, or per image then
/// averaged over the batch.
enum class LossPooling { joint, per_image };

LossKind parse_loss_kind(const std::string &name); // "lc" or "mse"
std::string loss_kind_name(LossKind kind);

/// Variance of the error field pred - truth.
template <typename T>
double l_var(const Tensor4<T> &pred, const Tensor4<T> &truth,
             LossPooling pooling = LossPooling::joint);

/// Mean |forward x-difference of the error| plus mean |forward y-difference|,
/// each averaged over its valid positions.
template <typename T>
double l_tv(const Tensor4<T> &pred, const Tensor4<T> &truth);

template <typename T>
double l_c(const Tensor4<T> &pred, const Tensor4<T> &truth, const LossWeights &w = {},
           LossPooling pooling = LossPooling::joint);

template <typename T>
double mse(const Tensor4<T> &pred, const Tensor4<T> &truth);

template <typename T>
struct LossResult {
    double value = 0.0;
    double variance_term = 0.0; // l_var (composite only)
    double tv_term = 0.0;       // l_tv (composite only)
    Tensor4<T> grad;            // d value / d pred
};

/// Loss value and its gradient with respect to pred. |.| has gradient 0 at 0.
template <typename T>
LossResult<T> loss_and_grad(LossKind kind, const Tensor4<T> &pred, const Tensor4<T> &truth,
                            const LossWeights &w = {}, LossPooling pooling = LossPooling::joint);

} // namespace sqdunwrap
