#include "sqdunwrap/losses.hpp"

#include <cmath>

#include "sqdunwrap/errors.hpp"

namespace sqdunwrap {

namespace {

void require_same(const Dims &a, const Dims &b, const char *what) {
    if (a != b) {
        throw DimensionMismatch(std::string(what) + ": " + a.str() + " vs " + b.str());
    }
}

template <typename T>
std::vector<double> error_field(const Tensor4<T> &pred, const Tensor4<T> &truth) {
    std::vector<double> e(pred.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        e[i] = static_cast<double>(pred.data()[i]) - static_cast<double>(truth.data()[i]);
    }
    return e;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Variance of e per pooling group; optionally writes d/de into grad.
double variance_term(const std::vector<double> &e, const Dims &d, LossPooling pooling,
                     std::vector<double> *grad, double weight) {
    const std::size_t groups = pooling == LossPooling::joint ? 1 : d.n;
    const std::size_t per = e.size() / groups;
    double total = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
        const double *eg = e.data() + g * per;
        // Two passes: E[(e - E[e])^2] equals E[e^2] - E[e]^2 without the cancellation.
        double sum = 0.0;
        for (std::size_t i = 0; i < per; ++i) {
            sum += eg[i];
        }
        const double mean = sum / static_cast<double>(per);
        double sq = 0.0;
        for (std::size_t i = 0; i < per; ++i) {
            sq += (eg[i] - mean) * (eg[i] - mean);
        }
        total += sq / static_cast<double>(per);
        if (grad) {
            const double scale = weight * 2.0 / static_cast<double>(per * groups);
            for (std::size_t i = 0; i < per; ++i) {
                (*grad)[g * per + i] += scale * (eg[i] - mean);
            }
        }
    }
    return total / static_cast<double>(groups);
}

double tv_term(const std::vector<double> &e, const Dims &d, std::vector<double> *grad,
               double weight) {
    if (d.h < 2 || d.w < 2) {
        throw InvalidInput("l_tv: height and width must be at least 2, got " + d.str());
    }
    const double nx = static_cast<double>(d.n * d.h * (d.w - 1) * d.c);
    const double ny = static_cast<double>(d.n * (d.h - 1) * d.w * d.c);
    double sx = 0.0;
    double sy = 0.0;
    const auto idx = [&d](std::size_t n, std::size_t y, std::size_t x, std::size_t c) {
        return ((n * d.h + y) * d.w + x) * d.c + c;
    };
    for (std::size_t n = 0; n < d.n; ++n) {
        for (std::size_t y = 0; y < d.h; ++y) {
            for (std::size_t x = 0; x < d.w; ++x) {
                for (std::size_t c = 0; c < d.c; ++c) {
                    const std::size_t i = idx(n, y, x, c);
                    if (x + 1 < d.w) {
                        const std::size_t j = idx(n, y, x + 1, c);
                        const double diff = e[j] - e[i];
                        sx += std::abs(diff);
                        if (grad) {
                            const double g = weight * sign(diff) / nx;
                            (*grad)[j] += g;
                            (*grad)[i] -= g;
                        }
                    }
                    if (y + 1 < d.h) {
                        const std::size_t j = idx(n, y + 1, x, c);
                        const double diff = e[j] - e[i];
                        sy += std::abs(diff);
                        if (grad) {
                            const double g = weight * sign(diff) / ny;
                            (*grad)[j] += g;
                            (*grad)[i] -= g;
                        }
                    }
                }
            }
        }
    }
    return sx / nx + sy / ny;
}

} // namespace

LossKind parse_loss_kind(const std::string &name) {
    if (name == "lc") {
        return LossKind::composite;
    }
    if (name == "mse") {
        return LossKind::mse;
    }
    throw ConfigError("unknown loss '" + name + "' (expected lc or mse)");
}

std::string loss_kind_name(LossKind kind) { return kind == LossKind::composite ? "lc" : "mse"; }

template <typename T>
double l_var(const Tensor4<T> &pred, const Tensor4<T> &truth, LossPooling pooling) {
    require_same(pred.dims(), truth.dims(), "l_var");
    return variance_term(error_field(pred, truth), pred.dims(), pooling, nullptr, 1.0);
}

template <typename T>
double l_tv(const Tensor4<T> &pred, const Tensor4<T> &truth) {
    require_same(pred.dims(), truth.dims(), "l_tv");
    return tv_term(error_field(pred, truth), pred.dims(), nullptr, 1.0);
}

template <typename T>
double l_c(const Tensor4<T> &pred, const Tensor4<T> &truth, const LossWeights &w,
           LossPooling pooling) {
    return w.lambda1 * l_var(pred, truth, pooling) + w.lambda2 * l_tv(pred, truth);
}

template <typename T>
double mse(const Tensor4<T> &pred, const Tensor4<T> &truth) {
    require_same(pred.dims(), truth.dims(), "mse");
    const auto e = error_field(pred, truth);
    double sq = 0.0;
    for (double v : e) {
        sq += v * v;
    }
    return e.empty() ? 0.0 : sq / static_cast<double>(e.size());
}

template <typename T>
LossResult<T> loss_and_grad(LossKind kind, const Tensor4<T> &pred, const Tensor4<T> &truth,
                            const LossWeights &w, LossPooling pooling) {
    require_same(pred.dims(), truth.dims(), "loss");
    const auto e = error_field(pred, truth);
    std::vector<double> g(e.size(), 0.0);
    LossResult<T> r;
    if (kind == LossKind::composite) {
        r.variance_term = variance_term(e, pred.dims(), pooling, &g, w.lambda1);
        r.tv_term = tv_term(e, pred.dims(), &g, w.lambda2);
        r.value = w.lambda1 * r.variance_term + w.lambda2 * r.tv_term;
    } else {
        double sq = 0.0;
        const double scale = 2.0 / static_cast<double>(e.size());
        for (std::size_t i = 0; i < e.size(); ++i) {
            sq += e[i] * e[i];
            g[i] = scale * e[i];
        }
        r.value = sq / static_cast<double>(e.size());
    }
    r.grad = Tensor4<T>(pred.dims(), std::vector<T>(g.begin(), g.end()));
    return r;
}

#define SQDUNWRAP_INSTANTIATE(T)                                                                   \
    template double l_var(const Tensor4<T> &, const Tensor4<T> &, LossPooling);                    \
    template double l_tv(const Tensor4<T> &, const Tensor4<T> &);                                  \
    template double l_c(const Tensor4<T> &, const Tensor4<T> &, const LossWeights &, LossPooling); \
    template double mse(const Tensor4<T> &, const Tensor4<T> &);                                   \
    template LossResult<T> loss_and_grad(LossKind, const Tensor4<T> &, const Tensor4<T> &,         \
                                         const LossWeights &, LossPooling);

SQDUNWRAP_INSTANTIATE(float)
SQDUNWRAP_INSTANTIATE(double)

#undef SQDUNWRAP_INSTANTIATE

} // namespace sqdunwrap
