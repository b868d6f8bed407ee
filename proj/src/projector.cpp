#include "latomo/projector.hpp"

#include <cmath>
#include <random>

#include "latomo/error.hpp"

namespace latomo {

namespace {

double norm2(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

void check_shapes(const Volume& x, const TiltSeries& y, const AngleSpec& spec) {
    spec.validate();
    if (y.n_tilts() != spec.count()) {
        throw ValidationError("tilt count does not match angle spec");
    }
    if (x.dims().height != y.height() || x.dims().width != y.width()) {
        throw ValidationError("volume " + x.dims().str() + " does not match detector " +
                              std::to_string(y.height()) + "x" + std::to_string(y.width()));
    }
}

}  // namespace

void ProjectorConfig::validate() const {
    if (n_steps < 1) throw ValidationError("projector n_steps must be >= 1");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw ValidationError("projector lambda must be positive and finite");
    }
}

namespace detail {

std::vector<double> descend(const ProjectionGeometry& geom, std::vector<float>& x,
                            std::span<const float> y, int n_steps, double lambda) {
    std::vector<double> residuals;
    residuals.reserve(static_cast<std::size_t>(n_steps) + 1);
    std::vector<float> r(y.size());
    auto residual_of = [&](const std::vector<float>& cur) {
        const auto ax = geom.forward(cur);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - ax[i];
        return norm2(r);
    };
    residuals.push_back(residual_of(x));
    // Round-off jitter around a converged iterate does not count as growth.
    const double slack = 1e-7 * norm2(y);
    int growth = 0;
    for (int k = 0; k < n_steps; ++k) {
        const auto grad = geom.adjoint(r);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = static_cast<float>(x[i] + lambda * grad[i]);
        }
        const double res = residual_of(x);
        if (!std::isfinite(res)) throw DivergenceError("non-finite residual", k + 1);
        growth = res > residuals.back() * (1.0 + 1e-9) + slack ? growth + 1 : 0;
        residuals.push_back(res);
        if (growth >= 3) throw DivergenceError("projector residual grew for 3 steps", k + 1);
    }
    return residuals;
}

}  // namespace detail

Volume consistency_gradient(const Volume& x, const TiltSeries& y, const AngleSpec& spec) {
    check_shapes(x, y, spec);
    ProjectionGeometry geom(x.dims(), spec);
    auto r = geom.forward(x.values());
    const auto yv = y.values();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = yv[i] - r[i];
    return Volume(x.dims(), geom.adjoint(r));
}

Volume project(const Volume& x, const TiltSeries& y, const AngleSpec& spec,
               const ProjectorConfig& cfg, DescentTrace* trace) {
    cfg.validate();
    check_shapes(x, y, spec);
    ProjectionGeometry geom(x.dims(), spec);
    std::vector<float> cur(x.values().begin(), x.values().end());
    auto residuals = detail::descend(geom, cur, y.values(), cfg.n_steps, cfg.lambda);
    if (trace) trace->residuals = std::move(residuals);
    return Volume(x.dims(), std::move(cur));
}

SartResult sart(const TiltSeries& y, const AngleSpec& spec, int depth, int iters,
                std::optional<double> lambda, const std::optional<Volume>& x0) {
    if (iters < 1) throw ValidationError("sart iterations must be >= 1");
    const Dims dims{depth, y.height(), y.width()};
    dims.validate();
    const Volume start = x0 ? *x0 : Volume::zeros(dims);
    if (start.dims() != dims) throw ValidationError("sart: x0 dims do not match tilt series");
    ProjectorConfig cfg{iters, lambda ? *lambda : 1.0 / estimate_lipschitz(dims, spec)};
    DescentTrace trace;
    Volume out = project(start, y, spec, cfg, &trace);
    return {std::move(out), std::move(trace.residuals)};
}

double estimate_lipschitz(Dims dims, const AngleSpec& spec, int iterations, double tolerance) {
    ProjectionGeometry geom(dims, spec);
    std::mt19937_64 rng(0x5eed'1a3bULL);
    std::uniform_real_distribution<double> uni(0.5, 1.5);
    std::vector<float> v(dims.count());
    for (auto& e : v) e = static_cast<float>(uni(rng));
    double n = norm2(v);
    for (auto& e : v) e = static_cast<float>(e / n);
    double estimate = 0.0;
    for (int k = 0; k < iterations; ++k) {
        auto w = geom.adjoint(geom.forward(v));
        const double next = norm2(w);
        if (next == 0.0) return 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(w[i] / next);
        const bool converged = k > 0 && std::abs(next - estimate) <= tolerance * next;
        estimate = next;
        if (converged) break;
    }
    return estimate;
}

ProjectorConfig default_projector_config(Dims dims, const AngleSpec& spec, int n_steps) {
    const double L = estimate_lipschitz(dims, spec);
    if (!(L > 0.0)) throw ValidationError("projection operator is identically zero");
    return {n_steps, 1.0 / L};
}

}  // namespace latomo
