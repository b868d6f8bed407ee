#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "latomo/types.hpp"

namespace latomo {

/// Composite HAADF contrast map I = k (1 - exp(-C * R(S^gamma))) with
/// optional additive Gaussian noise.
struct ContrastParams {
    double attenuation = 0.02;  // C
    double gamma = 0.8;
    double k = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;

    void validate() const;
    bool operator==(const ContrastParams&) const = default;
};

/// Maps a FIB-SEM-like density volume to a HAADF tilt series.
TiltSeries synthesize_haadf(const Volume& s, const AngleSpec& spec, const ContrastParams& params);

/// Draws (range, step) uniformly from the configured intervals, quantised to 0.5 degrees.
class AcquisitionSampler {
public:
    struct Interval {
        double lo;
        double hi;
    };

    explicit AcquisitionSampler(std::uint64_t seed, Interval range = {6.0, 14.0},
                                Interval step = {1.0, 3.0});

    AngleSpec next();

private:
    Interval range_;
    Interval step_;
    std::mt19937_64 rng_;
};

/// Next acquisition from the sampler's stream.
AngleSpec sample_acquisition(AcquisitionSampler& sampler);

/// Solid or shelled ellipsoid, rotated about the depth axis by yaw_rad.
/// Centre and semi-axes are in voxels, (depth, height, width).
struct Ellipsoid {
    double center[3];
    double semi_axes[3];
    double yaw_rad = 0.0;
    double intensity = 1.0;
    /// Shell thickness in voxels; 0 renders a filled body of `intensity`.
    double shell = 0.0;
    /// Interior value of a shelled ellipsoid.
    double fill = 0.0;
};

/// Renders ellipsoids with 2x2x2 supersampled edges, combining by maximum.
/// Values are clamped to [0, 1].
Volume render_ellipsoids(Dims dims, std::span<const Ellipsoid> objects);

/// Randomised mitochondrion-like (membrane shell + dimmer matrix + cristae
/// bands) and synapse-like (small dense vesicle) objects.
struct PhantomSpec {
    Dims dims{40, 128, 128};
    int min_shells = 2;
    int max_shells = 3;
    int min_blobs = 2;
    int max_blobs = 6;
    /// Semi-axis ranges as fractions of the in-plane extent.
    double shell_size_lo = 0.30;
    double shell_size_hi = 0.40;
    double blob_size_lo = 0.03;
    double blob_size_hi = 0.07;
    double membrane_thickness = 2.0;
    double membrane_intensity = 1.0;
    double matrix_intensity = 0.45;
    double blob_intensity = 0.8;
    std::uint64_t seed = 0;

    void validate() const;
};

Volume generate_phantom(const PhantomSpec& spec);

/// Histogram over [lo, hi) with equal-width bins.
struct Histogram {
    double lo = 0.0;
    double hi = 1.0;
    std::vector<double> counts;

    static Histogram of(std::span<const float> values, double lo, double hi, int bins);
    /// Counts divided by their sum. Throws ValidationError when empty.
    std::vector<double> normalized() const;
};

/// Half the L1 distance between normalised histograms (0 = identical, 1 = disjoint).
double histogram_distance(const Histogram& a, const Histogram& b);

struct ContrastGrid {
    std::vector<double> attenuation;
    std::vector<double> gamma;
    std::vector<double> k;
};

struct ContrastFit {
    ContrastParams params;
    double distance;
};

/// Grid search minimising the histogram distance between the synthetic tilts
/// of sim_vol and real_hist (binned on real_hist's range).
ContrastFit fit_contrast(const Histogram& real_hist, const Volume& sim_vol, const AngleSpec& spec,
                         const ContrastGrid& grid);

/// One line of the dataset manifest.
struct ManifestRecord {
    std::string volume_file;
    std::string tilt_file;
    AngleSpec angles;
    ContrastParams params;
    std::uint64_t seed = 0;
};

std::string format_manifest_record(const ManifestRecord& rec);
ManifestRecord parse_manifest_record(const std::string& line);

/// Writes n samples (phantom TDVOL1 + HAADF TDTLT1) and manifest.txt into dir.
/// Sample i uses phantom seed base.seed + i and one acquisition draw.
std::vector<ManifestRecord> write_dataset(const std::filesystem::path& dir, int n,
                                          const PhantomSpec& base, const ContrastParams& params,
                                          std::uint64_t seed);

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);

}  // namespace latomo
