#pragma once

#include <span>
#include <vector>

#include "latomo/types.hpp"

namespace latomo {

/// Single-tilt back-projections b_i, each min-max normalised to [0, 1] over
/// the whole volume. A constant b_i normalises to all zeros.
struct PerTiltBackprojection {
    Dims dims;
    std::vector<std::vector<float>> tilts;
};

PerTiltBackprojection per_tilt_backprojection(const TiltSeries& y, const AngleSpec& spec,
                                              int depth);

/// Var_max = (T + 1) / (4T).
double max_variance(int n_tilts);

/// Population variance of the values divided by Var_max, clamped to [0, 1].
double normalized_variance(std::span<const double> values);

/// u(v) from a prepared stack; needs at least two tilts.
UncertaintyMap uncertainty_from_backprojections(const PerTiltBackprojection& stack);

/// Cross-tilt disagreement weights. Throws ValidationError for T < 2.
UncertaintyMap compute_uncertainty(const TiltSeries& y, const AngleSpec& spec, int depth);

}  // namespace latomo
