#pragma once

#include <optional>
#include <vector>

#include "latomo/radon.hpp"
#include "latomo/types.hpp"

namespace latomo {

/// Gradient steps x <- x + lambda * A^T (y - A x) per projector call.
struct ProjectorConfig {
    int n_steps = 5;
    double lambda = 0.0;

    void validate() const;
};

/// Residual norms ||y - A x||, one per iterate including the start and end.
struct DescentTrace {
    std::vector<double> residuals;
};

/// A^T (y - A x).
Volume consistency_gradient(const Volume& x, const TiltSeries& y, const AngleSpec& spec);

/// Runs cfg.n_steps descent steps on ||y - A x||^2. Throws DivergenceError if
/// the residual grows for three consecutive steps.
Volume project(const Volume& x, const TiltSeries& y, const AngleSpec& spec,
               const ProjectorConfig& cfg, DescentTrace* trace = nullptr);

struct SartResult {
    Volume volume;
    std::vector<double> residuals;
};

/// Gradient-descent reconstruction from x0 (zeros when absent). A lambda of
/// std::nullopt selects 1/L from power iteration. Shares project()'s loop.
SartResult sart(const TiltSeries& y, const AngleSpec& spec, int depth, int iters,
                std::optional<double> lambda = std::nullopt,
                const std::optional<Volume>& x0 = std::nullopt);

/// Power-iteration estimate of ||A^T A||.
double estimate_lipschitz(Dims dims, const AngleSpec& spec, int iterations = 20,
                          double tolerance = 1e-3);

/// n_steps with lambda = 1/L.
ProjectorConfig default_projector_config(Dims dims, const AngleSpec& spec, int n_steps = 5);

namespace detail {

/// In-place descent on a raw iterate. Returns the residual after each step
/// (residuals[0] is the starting residual).
std::vector<double> descend(const ProjectionGeometry& geom, std::vector<float>& x,
                            std::span<const float> y, int n_steps, double lambda);

}  // namespace detail

}  // namespace latomo
