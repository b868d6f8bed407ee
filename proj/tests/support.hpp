#pragma once

// Helpers and independent reference implementations shared by the unit and
// acceptance tests. Nothing here calls into the library's numeric kernels
// unless the name says so.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "latomo/types.hpp"

namespace testing {

latomo::Volume random_volume(latomo::Dims dims, std::uint64_t seed, float lo = -1.0f,
                             float hi = 1.0f);
latomo::TiltSeries random_tilts(const latomo::AngleSpec& spec, int height, int width,
                                std::uint64_t seed);
std::vector<float> random_floats(std::size_t n, std::uint64_t seed, float lo = -1.0f,
                                 float hi = 1.0f);

double dot(std::span<const float> a, std::span<const float> b);
double norm(std::span<const float> a);
double max_abs_diff(std::span<const float> a, std::span<const float> b);

/// Solid ellipsoid with a smooth (cosine) edge, values in [0, 1].
latomo::Volume soft_ellipsoid(latomo::Dims dims, double rd, double rh, double rw,
                              double value = 1.0);

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

namespace oracle {

/// Dense system matrix of the linear-splat projector written with hat
/// functions: entry (tilt, h, j) x (d, h, w) = max(0, 1 - |u - j|) with
/// u = -(d - cd) sin + (w - cw) cos + cw. Row-major, rows = sinogram entries.
std::vector<double> hat_matrix(latomo::Dims dims, const std::vector<double>& angles_deg);

/// Dense matrix assembled by calling forward_project on every basis voxel.
std::vector<double> basis_matrix(latomo::Dims dims, const latomo::AngleSpec& spec);

std::vector<double> matvec(const std::vector<double>& m, std::size_t rows, std::span<const float> x);

/// Largest eigenvalue of A^T A by many power iterations in double.
double spectral_norm_sq(const std::vector<double>& a, std::size_t rows, std::size_t cols);

/// Detector-row filter evaluated with a naive O(P^2) DFT of the padded row.
std::vector<double> ramp_filter_row(std::span<const float> row, bool hann);

/// Order statistic interpolation using nth_element rather than a full sort.
double quantile(std::span<const float> values, double p);

/// Population variance by two passes in long double.
double population_variance(std::span<const double> values);

/// Direct 3D SSIM: the full Gaussian window is evaluated at every valid voxel.
double ssim(const latomo::Volume& a, const latomo::Volume& b, double peak);

/// 6-connected components of voxels above zero; returns component sizes.
std::vector<std::size_t> component_sizes(const latomo::Volume& v);

}  // namespace oracle

}  // namespace testing
