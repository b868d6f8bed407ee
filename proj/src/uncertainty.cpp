#include "latomo/uncertainty.hpp"

#include <algorithm>

#include "latomo/error.hpp"
#include "latomo/parallel.hpp"
#include "latomo/radon.hpp"

namespace latomo {

namespace {

void minmax_normalize(std::vector<float>& b) {
    const auto [lo, hi] = std::minmax_element(b.begin(), b.end());
    const double min = *lo, range = static_cast<double>(*hi) - *lo;
    // A flat back-projection sits at its own maximum everywhere.
    if (range <= 0.0) {
        std::fill(b.begin(), b.end(), 1.0f);
        return;
    }
    for (auto& v : b) v = static_cast<float>((v - min) / range);
}

}  // namespace

PerTiltBackprojection per_tilt_backprojection(const TiltSeries& y, const AngleSpec& spec,
                                              int depth) {
    if (y.n_tilts() != spec.count()) throw ValidationError("tilt count does not match angle spec");
    const Dims dims{depth, y.height(), y.width()};
    ProjectionGeometry geom(dims, spec);
    PerTiltBackprojection out{dims, {}};
    out.tilts.reserve(static_cast<std::size_t>(y.n_tilts()));
    for (int i = 0; i < y.n_tilts(); ++i) {
        auto b = geom.adjoint_single(y.frame(i), i, /*clamp_edges=*/true);
        minmax_normalize(b);
        out.tilts.push_back(std::move(b));
    }
    return out;
}

double max_variance(int n_tilts) {
    if (n_tilts < 2) throw ValidationError("variance needs at least two tilts");
    return (n_tilts + 1.0) / (4.0 * n_tilts);
}

double normalized_variance(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) throw ValidationError("variance needs at least two tilts");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    return std::clamp(var / max_variance(static_cast<int>(n)), 0.0, 1.0);
}

UncertaintyMap uncertainty_from_backprojections(const PerTiltBackprojection& stack) {
    const std::size_t T = stack.tilts.size();
    if (T < 2) throw ValidationError("uncertainty needs at least two tilts, got " + std::to_string(T));
    const std::size_t n = stack.dims.count();
    for (const auto& b : stack.tilts) {
        if (b.size() != n) throw ValidationError("back-projection stack has inconsistent sizes");
    }
    std::vector<float> u(n);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> vals(T);
        for (std::size_t v = begin; v < end; ++v) {
            for (std::size_t i = 0; i < T; ++i) vals[i] = stack.tilts[i][v];
            u[v] = static_cast<float>(normalized_variance(vals));
        }
    });
    return UncertaintyMap(stack.dims, std::move(u));
}

UncertaintyMap compute_uncertainty(const TiltSeries& y, const AngleSpec& spec, int depth) {
    if (y.n_tilts() < 2) {
        throw ValidationError("uncertainty needs at least two tilts, got " +
                              std::to_string(y.n_tilts()));
    }
    return uncertainty_from_backprojections(per_tilt_backprojection(y, spec, depth));
}

}  // namespace latomo
