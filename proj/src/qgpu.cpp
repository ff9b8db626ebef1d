#include "sqdunwrap/qgpu.hpp"

#include <queue>
#include <vector>

#include "sqdunwrap/errors.hpp"

namespace sqdunwrap {

namespace {

void require_min_dims(const ImageGrid &w, const char *what) {
    if (w.height() < 2 || w.width() < 2) {
        throw InvalidInput(std::string(what) + ": image must be at least 2x2");
    }
}

struct FrontierEntry {
    double quality;
    std::size_t index;
};

/// Max-heap on quality, lowest index first on ties.
struct FrontierOrder {
    bool operator()(const FrontierEntry &a, const FrontierEntry &b) const {
        if (a.quality != b.quality) {
            return a.quality < b.quality;
        }
        return a.index > b.index;
    }
};

} // namespace

QualityMap quality_map(const WrappedImage &w) {
    require_min_dims(w, "quality_map");
    const std::size_t h = w.height();
    const std::size_t wd = w.width();
    // Wrapped forward differences; the last row/column reuses its neighbour.
    std::vector<double> dx(h * wd);
    std::vector<double> dy(h * wd);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < wd; ++x) {
            const std::size_t xs = x + 1 < wd ? x : x - 1;
            const std::size_t ys = y + 1 < h ? y : y - 1;
            dx[y * wd + x] = wrap_scalar(w(y, xs + 1) - w(y, xs));
            dy[y * wd + x] = wrap_scalar(w(ys + 1, x) - w(ys, x));
        }
    }
    QualityMap q(h, wd, 0.0);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < wd; ++x) {
            double sx = 0.0;
            double sxx = 0.0;
            double sy = 0.0;
            double syy = 0.0;
            double count = 0.0;
            for (std::size_t yy = y == 0 ? 0 : y - 1; yy <= std::min(h - 1, y + 1); ++yy) {
                for (std::size_t xx = x == 0 ? 0 : x - 1; xx <= std::min(wd - 1, x + 1); ++xx) {
                    const double a = dx[yy * wd + xx];
                    const double b = dy[yy * wd + xx];
                    sx += a;
                    sxx += a * a;
                    sy += b;
                    syy += b * b;
                    count += 1.0;
                }
            }
            const double var_x = std::max(0.0, sxx / count - (sx / count) * (sx / count));
            const double var_y = std::max(0.0, syy / count - (sy / count) * (sy / count));
            q(y, x) = -(var_x + var_y);
        }
    }
    return q;
}

PhaseImage qgpu_unwrap(const WrappedImage &w) { return qgpu_unwrap(w, quality_map(w)); }

PhaseImage qgpu_unwrap(const WrappedImage &w, const QualityMap &quality) {
    require_min_dims(w, "qgpu_unwrap");
    if (!quality.same_shape(w)) {
        throw DimensionMismatch("qgpu_unwrap: quality map shape differs from image");
    }
    const std::size_t h = w.height();
    const std::size_t wd = w.width();
    const std::size_t n = h * wd;
    const auto qv = quality.values();
    const auto wv = w.values();

    std::vector<double> out(n, 0.0);
    std::vector<char> done(n, 0);

    std::size_t seed = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (qv[i] > qv[seed]) {
            seed = i;
        }
    }

    std::priority_queue<FrontierEntry, std::vector<FrontierEntry>, FrontierOrder> frontier;
    const auto push_neighbours = [&](std::size_t i) {
        const std::size_t y = i / wd;
        const std::size_t x = i % wd;
        if (y > 0 && !done[i - wd]) {
            frontier.push({qv[i - wd], i - wd});
        }
        if (y + 1 < h && !done[i + wd]) {
            frontier.push({qv[i + wd], i + wd});
        }
        if (x > 0 && !done[i - 1]) {
            frontier.push({qv[i - 1], i - 1});
        }
        if (x + 1 < wd && !done[i + 1]) {
            frontier.push({qv[i + 1], i + 1});
        }
    };

    out[seed] = wv[seed];
    done[seed] = 1;
    push_neighbours(seed);
    std::size_t assigned = 1;

    while (!frontier.empty()) {
        const FrontierEntry top = frontier.top();
        frontier.pop();
        const std::size_t i = top.index;
        if (done[i]) {
            continue;
        }
        const std::size_t y = i / wd;
        const std::size_t x = i % wd;
        std::size_t best = n;
        const auto consider = [&](std::size_t j) {
            if (!done[j]) {
                return;
            }
            if (best == n || qv[j] > qv[best] || (qv[j] == qv[best] && j < best)) {
                best = j;
            }
        };
        if (y > 0) {
            consider(i - wd);
        }
        if (y + 1 < h) {
            consider(i + wd);
        }
        if (x > 0) {
            consider(i - 1);
        }
        if (x + 1 < wd) {
            consider(i + 1);
        }
        out[i] = out[best] + wrap_scalar(wv[i] - wv[best]);
        done[i] = 1;
        ++assigned;
        push_neighbours(i);
    }
    if (assigned != n) {
        throw std::logic_error("qgpu_unwrap: frontier emptied before every pixel was visited");
    }
    return PhaseImage(h, wd, std::move(out));
}

} // namespace sqdunwrap
