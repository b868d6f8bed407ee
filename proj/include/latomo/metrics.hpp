#pragma once

#include <span>
#include <string>

#include "latomo/types.hpp"

namespace latomo {

/// Quantile by full sort with linear interpolation at position p * (n - 1).
double quantile(std::span<const float> values, double p);

struct AffineMap {
    double scale = 1.0;
    double offset = 0.0;
};

/// The map a * x + b sending recon's (Q1, Q3) onto reference's (Q1, Q3).
/// Throws ValidationError when recon's Q3 equals its Q1.
AffineMap quartile_alignment(const Volume& recon, const Volume& reference);
/// Returns recon unchanged when the map is within float rounding of the identity.
Volume align_quartiles(const Volume& recon, const Volume& reference);

double rmse(const Volume& a, const Volume& b);
/// 20 log10(peak / rmse); +infinity when rmse is zero.
double psnr(double rmse_value, double peak);
/// Mean 3D SSIM with a 7x7x7 Gaussian window (sigma 1.5), computed over the
/// voxels where the window fits. Axes shorter than 7 shrink the window to the
/// largest odd size that fits. c1 = (0.01 peak)^2, c2 = (0.03 peak)^2.
double ssim(const Volume& a, const Volume& b, double peak);

struct MetricReport {
    double rmse = 0.0;
    double psnr = 0.0;  // +infinity when rmse == 0
    double ssim = 0.0;
    bool aligned = false;

    /// key=value per line.
    std::string to_text() const;
    static std::string manifest_header();
    std::string manifest_row(const std::string& recon_name, const std::string& reference_name) const;
};

/// Optional quartile alignment, then RMSE, PSNR and SSIM with peak equal to
/// the reference's dynamic range.
MetricReport evaluate(const Volume& recon, const Volume& reference, bool align);

}  // namespace latomo
