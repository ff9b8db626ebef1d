#include "sqdunwrap/lstm.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>
#include <Eigen/QR>

#include "sqdunwrap/errors.hpp"

namespace sqdunwrap {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;

template <typename T>
T sigmoid(T v) {
    return T(1) / (T(1) + std::exp(-v));
}

} // namespace

template <typename T>
Lstm<T>::Lstm(const std::string &name, std::size_t input_size, std::size_t units)
    : w_input(name + ".w_input", {input_size, 4 * units}),
      w_recurrent(name + ".w_recurrent", {units, 4 * units}), bias(name + ".bias", {4 * units}),
      input_size_(input_size), units_(units) {}

template <typename T>
void Lstm<T>::init(std::mt19937_64 &rng) {
    const std::size_t u = units_;
    const double limit = std::sqrt(6.0 / static_cast<double>(input_size_ + 4 * u));
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (T &v : w_input.value) {
        v = static_cast<T>(uni(rng));
    }

    // Orthogonal (u, 4u): rows of the transposed thin Q of a Gaussian matrix.
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto rows = static_cast<Eigen::Index>(4 * u);
    const auto cols = static_cast<Eigen::Index>(u);
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            a(i, j) = gauss(rng);
        }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(cols).template triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < cols; ++j) {
        if (r(j, j) < 0) {
            q.col(j) = -q.col(j);
        }
    }
    for (Eigen::Index i = 0; i < cols; ++i) {
        for (Eigen::Index j = 0; j < rows; ++j) {
            w_recurrent.value[static_cast<std::size_t>(i * rows + j)] = static_cast<T>(q(j, i));
        }
    }

    std::ranges::fill(bias.value, T(0));
    std::fill_n(bias.value.begin() + static_cast<std::ptrdiff_t>(u), u, T(1));
}

template <typename T>
SequenceBatch<T> Lstm<T>::forward(const SequenceBatch<T> &x) {
    if (x.features != input_size_ && x.steps > 0) {
        throw DimensionMismatch("lstm: step dimension " + std::to_string(x.features) +
                                " does not match input size " + std::to_string(input_size_));
    }
    const std::size_t u = units_;
    const std::size_t n = x.batch;
    const std::size_t steps = x.steps;
    x_ = x;
    SequenceBatch<T> y(steps, n, u);
    gates_.assign(steps * n * 4 * u, T(0));
    cells_.assign(steps * n * u, T(0));
    hidden_.assign(steps * n * u, T(0));
    if (steps == 0) {
        return y;
    }

    const auto rows = static_cast<Eigen::Index>(steps * n);
    CMapR<T> xm(x.data.data(), rows, static_cast<Eigen::Index>(input_size_));
    CMapR<T> wx(w_input.value.data(), static_cast<Eigen::Index>(input_size_),
                static_cast<Eigen::Index>(4 * u));
    CMapR<T> wh(w_recurrent.value.data(), static_cast<Eigen::Index>(u),
                static_cast<Eigen::Index>(4 * u));
    MapR<T> z(gates_.data(), rows, static_cast<Eigen::Index>(4 * u));
    z.noalias() = xm * wx;
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.value.data(),
                                                            static_cast<Eigen::Index>(4 * u));
    z.rowwise() += b;

    for (std::size_t t = 0; t < steps; ++t) {
        MapR<T> zt(gates_.data() + t * n * 4 * u, static_cast<Eigen::Index>(n),
                   static_cast<Eigen::Index>(4 * u));
        if (t > 0) {
            CMapR<T> hprev(hidden_.data() + (t - 1) * n * u, static_cast<Eigen::Index>(n),
                           static_cast<Eigen::Index>(u));
            zt.noalias() += hprev * wh;
        }
        for (std::size_t bi = 0; bi < n; ++bi) {
            T *g = gates_.data() + (t * n + bi) * 4 * u;
            T *c = cells_.data() + (t * n + bi) * u;
            T *h = hidden_.data() + (t * n + bi) * u;
            const T *cprev = t > 0 ? cells_.data() + ((t - 1) * n + bi) * u : nullptr;
            for (std::size_t k = 0; k < u; ++k) {
                const T ig = sigmoid(g[k]);
                const T fg = sigmoid(g[u + k]);
                const T gg = std::tanh(g[2 * u + k]);
                const T og = sigmoid(g[3 * u + k]);
                g[k] = ig;
                g[u + k] = fg;
                g[2 * u + k] = gg;
                g[3 * u + k] = og;
                c[k] = ig * gg + (cprev ? fg * cprev[k] : T(0));
                h[k] = og * std::tanh(c[k]);
            }
        }
    }
    std::ranges::copy(hidden_, y.data.begin());
    return y;
}

template <typename T>
SequenceBatch<T> Lstm<T>::backward(const SequenceBatch<T> &dy) {
    const std::size_t u = units_;
    const std::size_t n = x_.batch;
    const std::size_t steps = x_.steps;
    if (dy.steps != steps || dy.batch != n || dy.features != u) {
        throw DimensionMismatch("lstm backward: gradient shape does not match the forward pass");
    }
    SequenceBatch<T> dx(steps, n, input_size_);
    if (steps == 0) {
        return dx;
    }
    const auto eu = static_cast<Eigen::Index>(u);
    const auto en = static_cast<Eigen::Index>(n);
    std::vector<T> dz(steps * n * 4 * u, T(0));
    MatR<T> dh_next = MatR<T>::Zero(en, eu);
    std::vector<T> dc_next(n * u, T(0));
    CMapR<T> wh(w_recurrent.value.data(), eu, 4 * eu);
    MapR<T> gwh(w_recurrent.grad.data(), eu, 4 * eu);

    for (std::size_t t = steps; t-- > 0;) {
        for (std::size_t bi = 0; bi < n; ++bi) {
            const T *g = gates_.data() + (t * n + bi) * 4 * u;
            const T *c = cells_.data() + (t * n + bi) * u;
            const T *cprev = t > 0 ? cells_.data() + ((t - 1) * n + bi) * u : nullptr;
            const T *dyt = dy.at(t, bi);
            T *d = dz.data() + (t * n + bi) * 4 * u;
            T *dcn = dc_next.data() + bi * u;
            for (std::size_t k = 0; k < u; ++k) {
                const T ig = g[k];
                const T fg = g[u + k];
                const T gg = g[2 * u + k];
                const T og = g[3 * u + k];
                const T tc = std::tanh(c[k]);
                const T dh = dyt[k] + dh_next(static_cast<Eigen::Index>(bi),
                                              static_cast<Eigen::Index>(k));
                const T d_o = dh * tc;
                const T dc = dh * og * (T(1) - tc * tc) + dcn[k];
                const T cp = cprev ? cprev[k] : T(0);
                d[k] = dc * gg * ig * (T(1) - ig);
                d[u + k] = dc * cp * fg * (T(1) - fg);
                d[2 * u + k] = dc * ig * (T(1) - gg * gg);
                d[3 * u + k] = d_o * og * (T(1) - og);
                dcn[k] = dc * fg;
            }
        }
        CMapR<T> dzt(dz.data() + t * n * 4 * u, en, 4 * eu);
        dh_next.noalias() = dzt * wh.transpose();
        if (t > 0) {
            CMapR<T> hprev(hidden_.data() + (t - 1) * n * u, en, eu);
            gwh.noalias() += hprev.transpose() * dzt;
        }
    }

    const auto rows = static_cast<Eigen::Index>(steps * n);
    const auto ec = static_cast<Eigen::Index>(input_size_);
    CMapR<T> dzm(dz.data(), rows, 4 * eu);
    CMapR<T> xm(x_.data.data(), rows, ec);
    MapR<T> gwx(w_input.grad.data(), ec, 4 * eu);
    gwx.noalias() += xm.transpose() * dzm;
    // Plain loop: Eigen's vectorised column sums depend on pointer alignment.
    for (std::size_t r = 0; r < steps * n; ++r) {
        const T *src = dz.data() + r * 4 * u;
        for (std::size_t k = 0; k < 4 * u; ++k) {
            bias.grad[k] += src[k];
        }
    }
    CMapR<T> wx(w_input.value.data(), ec, 4 * eu);
    MapR<T> dxm(dx.data.data(), rows, ec);
    dxm.noalias() = dzm * wx.transpose();
    return dx;
}

template <typename T>
ParamList<T> Lstm<T>::params() {
    return {&w_input, &w_recurrent, &bias};
}

template <typename T>
std::vector<std::vector<T>> lstm_forward(Lstm<T> &lstm, const std::vector<std::vector<T>> &seq) {
    SequenceBatch<T> x(seq.size(), 1, lstm.input_size());
    for (std::size_t s = 0; s < seq.size(); ++s) {
        if (seq[s].size() != lstm.input_size()) {
            throw DimensionMismatch("lstm_forward: step " + std::to_string(s) + " has dimension " +
                                    std::to_string(seq[s].size()));
        }
        std::ranges::copy(seq[s], x.at(s, 0));
    }
    const SequenceBatch<T> y = lstm.forward(x);
    std::vector<std::vector<T>> out(seq.size());
    for (std::size_t s = 0; s < seq.size(); ++s) {
        out[s].assign(y.at(s, 0), y.at(s, 0) + lstm.units());
    }
    return out;
}

template class Lstm<float>;
template class Lstm<double>;
template std::vector<std::vector<float>> lstm_forward(Lstm<float> &,
                                                      const std::vector<std::vector<float>> &);
template std::vector<std::vector<double>> lstm_forward(Lstm<double> &,
                                                       const std::vector<std::vector<double>> &);

} // namespace sqdunwrap
