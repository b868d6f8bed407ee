#pragma once

#include <span>
#include <string>
#include <vector>

#include "latomo/types.hpp"

namespace latomo {

/// Single-axis parallel-beam geometry. Tilting rotates the depth x width
/// plane about the height axis; each height row is an independent 2D problem
/// and maps to the same detector row. Detector width equals volume width with
/// unit pixel spacing, centred on the rotation axis.
class ProjectionGeometry {
public:
    ProjectionGeometry(Dims volume, const AngleSpec& spec);

    const Dims& volume() const noexcept { return volume_; }
    const AngleSpec& spec() const noexcept { return spec_; }
    int n_tilts() const noexcept { return static_cast<int>(cos_.size()); }
    std::size_t sinogram_size() const noexcept {
        return cos_.size() * static_cast<std::size_t>(volume_.height) *
               static_cast<std::size_t>(volume_.width);
    }

    /// A x on raw buffers. x has volume().count() values.
    std::vector<float> forward(std::span<const float> x) const;
    /// A^T y on raw buffers. y has sinogram_size() values.
    std::vector<float> adjoint(std::span<const float> y) const;
    /// A^T restricted to a single tilt; frame has height*width values.
    /// With clamp_edges the detector is extended by its edge values, so every
    /// voxel receives the interpolated frame value at its projected position.
    std::vector<float> adjoint_single(std::span<const float> frame, int tilt,
                                      bool clamp_edges) const;

private:
    Dims volume_;
    AngleSpec spec_;
    std::vector<double> cos_;
    std::vector<double> sin_;
};

enum class FbpFilter { ramp, ramp_hann, none };

TiltSeries forward_project(const Volume& x, const AngleSpec& spec);

/// Exact adjoint of forward_project. The tilt series does not determine the
/// depth, so it is passed explicitly.
Volume back_project(const TiltSeries& y, const AngleSpec& spec, int depth);

/// Filtered back-projection: per-row frequency-domain filtering (zero padded
/// to the next power of two >= 2W) followed by back-projection scaled by pi/(2T).
Volume fbp(const TiltSeries& y, const AngleSpec& spec, int depth, FbpFilter filter);

/// Applies the FBP detector-row filter to every row of every frame.
std::vector<float> filter_sinogram(std::span<const float> frames, int width, FbpFilter filter);

FbpFilter parse_filter(const std::string& name);

}  // namespace latomo
