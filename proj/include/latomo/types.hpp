#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace latomo {

/// Grid extents. Axis 0 is depth (slice index), axis 1 is height (the tilt
/// axis), axis 2 is width.
struct Dims {
    int depth = 0;
    int height = 0;
    int width = 0;

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(depth) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(width);
    }
    std::size_t index(int d, int h, int w) const noexcept {
        return (static_cast<std::size_t>(d) * static_cast<std::size_t>(height) +
                static_cast<std::size_t>(h)) *
                   static_cast<std::size_t>(width) +
               static_cast<std::size_t>(w);
    }
    bool operator==(const Dims&) const = default;

    /// Throws ValidationError unless all extents are positive and the voxel
    /// count fits comfortably in memory-addressable range.
    void validate() const;
    std::string str() const;
};

/// Dense 3D scalar grid, depth-major then row-major. Immutable once built.
class Volume {
public:
    Volume() = default;
    /// Throws ValidationError on size mismatch or any non-finite value.
    Volume(Dims dims, std::vector<float> voxels);

    static Volume zeros(Dims dims);
    static Volume filled(Dims dims, float value);

    const Dims& dims() const noexcept { return dims_; }
    std::size_t size() const noexcept { return voxels_.size(); }
    std::span<const float> values() const noexcept { return voxels_; }
    float at(int d, int h, int w) const noexcept { return voxels_[dims_.index(d, h, w)]; }
    float operator[](std::size_t i) const noexcept { return voxels_[i]; }

    /// Moves the storage out, leaving the volume empty.
    std::vector<float> release() && { return std::move(voxels_); }

    bool operator==(const Volume&) const = default;

private:
    Dims dims_{};
    std::vector<float> voxels_;
};

/// Tilt geometry: total span, increment and center, all in degrees.
struct AngleSpec {
    double range_deg = 0.0;
    double step_deg = 1.0;
    double center_deg = 0.0;

    void validate() const;
    /// Number of tilts, floor(range / step) + 1.
    int count() const;
    bool operator==(const AngleSpec&) const = default;
};

/// Derived tilt angles in degrees, strictly increasing, never past center + range/2.
std::vector<double> angle_list(const AngleSpec& spec);

/// Stack of projections, one per tilt angle. Frames are height x width,
/// stored tilt-major then row-major.
class TiltSeries {
public:
    TiltSeries() = default;
    TiltSeries(AngleSpec angles, int height, int width, std::vector<float> frames);

    const AngleSpec& angles() const noexcept { return angles_; }
    int n_tilts() const noexcept { return n_tilts_; }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t frame_size() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }
    std::span<const float> values() const noexcept { return frames_; }
    std::span<const float> frame(int i) const noexcept {
        return std::span<const float>(frames_).subspan(static_cast<std::size_t>(i) * frame_size(),
                                                       frame_size());
    }
    float at(int tilt, int h, int w) const noexcept {
        return frames_[static_cast<std::size_t>(tilt) * frame_size() +
                       static_cast<std::size_t>(h) * static_cast<std::size_t>(width_) +
                       static_cast<std::size_t>(w)];
    }

    bool operator==(const TiltSeries&) const = default;

private:
    AngleSpec angles_{};
    int n_tilts_ = 0;
    int height_ = 0;
    int width_ = 0;
    std::vector<float> frames_;
};

/// Per-voxel weights in [0, 1].
class UncertaintyMap {
public:
    UncertaintyMap() = default;
    UncertaintyMap(Dims dims, std::vector<float> weights);

    static UncertaintyMap constant(Dims dims, float value);

    const Dims& dims() const noexcept { return dims_; }
    std::span<const float> values() const noexcept { return weights_; }
    float operator[](std::size_t i) const noexcept { return weights_[i]; }
    Volume as_volume() const { return Volume(dims_, weights_); }

private:
    Dims dims_{};
    std::vector<float> weights_;
};

}  // namespace latomo
