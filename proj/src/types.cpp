#include "latomo/types.hpp"

#include <cmath>
#include <limits>

#include "latomo/error.hpp"

namespace latomo {

namespace {

// 2^31 voxels; the payload must also be addressable as 32-bit floats.
constexpr std::size_t kMaxVoxels = std::size_t{1} << 31;

void require_finite(std::span<const float> values, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw ValidationError(std::string(what) + ": non-finite value at index " +
                                  std::to_string(i));
        }
    }
}

}  // namespace

void Dims::validate() const {
    if (depth <= 0 || height <= 0 || width <= 0) {
        throw ValidationError("dimensions must be positive, got " + str());
    }
    const double total = static_cast<double>(depth) * height * width;
    if (total > static_cast<double>(kMaxVoxels)) {
        throw ValidationError("dimensions overflow voxel limit: " + str());
    }
}

std::string Dims::str() const {
    return std::to_string(depth) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

Volume::Volume(Dims dims, std::vector<float> voxels) : dims_(dims), voxels_(std::move(voxels)) {
    dims_.validate();
    if (voxels_.size() != dims_.count()) {
        throw ValidationError("volume of dims " + dims_.str() + " needs " +
                              std::to_string(dims_.count()) + " voxels, got " +
                              std::to_string(voxels_.size()));
    }
    require_finite(voxels_, "volume");
}

Volume Volume::zeros(Dims dims) { return filled(dims, 0.0f); }

Volume Volume::filled(Dims dims, float value) {
    dims.validate();
    return Volume(dims, std::vector<float>(dims.count(), value));
}

void AngleSpec::validate() const {
    if (!std::isfinite(range_deg) || !std::isfinite(step_deg) || !std::isfinite(center_deg)) {
        throw ValidationError("angle spec fields must be finite");
    }
    if (step_deg <= 0.0) {
        throw ValidationError("angle step must be positive, got " + std::to_string(step_deg));
    }
    if (range_deg < 0.0) {
        throw ValidationError("angle range must be nonnegative, got " + std::to_string(range_deg));
    }
    if (range_deg / step_deg > 1e6) {
        throw ValidationError("angle spec yields too many tilts");
    }
}

int AngleSpec::count() const {
    validate();
    // Relative slack absorbs representation error in e.g. 0.3 / 0.1.
    const double ratio = range_deg / step_deg;
    return static_cast<int>(std::floor(ratio + 1e-9 * std::max(1.0, ratio))) + 1;
}

std::vector<double> angle_list(const AngleSpec& spec) {
    const int n = spec.count();
    std::vector<double> angles(static_cast<std::size_t>(n));
    const double first = spec.center_deg - spec.range_deg / 2.0;
    for (int i = 0; i < n; ++i) {
        angles[static_cast<std::size_t>(i)] = first + i * spec.step_deg;
    }
    return angles;
}

TiltSeries::TiltSeries(AngleSpec angles, int height, int width, std::vector<float> frames)
    : angles_(angles), n_tilts_(angles.count()), height_(height), width_(width),
      frames_(std::move(frames)) {
    if (height_ <= 0 || width_ <= 0) {
        throw ValidationError("tilt frame dimensions must be positive");
    }
    const std::size_t expected = static_cast<std::size_t>(n_tilts_) * frame_size();
    if (frames_.size() != expected) {
        throw ValidationError("tilt series with " + std::to_string(n_tilts_) + " frames of " +
                              std::to_string(height_) + "x" + std::to_string(width_) +
                              " needs " + std::to_string(expected) + " values, got " +
                              std::to_string(frames_.size()));
    }
    require_finite(frames_, "tilt series");
}

UncertaintyMap::UncertaintyMap(Dims dims, std::vector<float> weights)
    : dims_(dims), weights_(std::move(weights)) {
    dims_.validate();
    if (weights_.size() != dims_.count()) {
        throw ValidationError("uncertainty map size does not match dims " + dims_.str());
    }
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        if (!(weights_[i] >= 0.0f && weights_[i] <= 1.0f)) {
            throw ValidationError("uncertainty weight outside [0,1] at index " +
                                  std::to_string(i));
        }
    }
}

UncertaintyMap UncertaintyMap::constant(Dims dims, float value) {
    dims.validate();
    return UncertaintyMap(dims, std::vector<float>(dims.count(), value));
}

}  // namespace latomo
