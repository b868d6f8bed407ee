#include "latomo/radon.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>

#include "latomo/error.hpp"
#include "latomo/parallel.hpp"

namespace latomo {

namespace {

void check_series(const TiltSeries& y, const AngleSpec& spec) {
    spec.validate();
    if (y.n_tilts() != spec.count()) {
        throw ValidationError("tilt series has " + std::to_string(y.n_tilts()) +
                              " frames but angle spec yields " + std::to_string(spec.count()));
    }
}

// Detector coordinate of voxel (d, w) at one angle, in pixels.
struct Splat {
    int index;
    double frac;
};

inline Splat splat(double rel_d, double rel_w, double c, double s, double centre_w) {
    const double u = -rel_d * s + rel_w * c + centre_w;
    const double base = std::floor(u);
    return {static_cast<int>(base), u - base};
}

// FFTW planning is not thread-safe.
std::mutex g_fftw_mutex;

struct FftwDeleter {
    void operator()(void* p) const { fftw_free(p); }
};

class RowFilter {
public:
    RowFilter(int width, FbpFilter kind) : width_(width) {
        padded_ = 1;
        while (padded_ < 2 * width) padded_ <<= 1;
        bins_ = padded_ / 2 + 1;
        real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * padded_)));
        spectrum_.reset(
            static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins_)));
        {
            std::lock_guard lock(g_fftw_mutex);
            forward_ = fftw_plan_dft_r2c_1d(padded_, real_.get(), spectrum_.get(), FFTW_ESTIMATE);
            inverse_ = fftw_plan_dft_c2r_1d(padded_, spectrum_.get(), real_.get(), FFTW_ESTIMATE);
        }
        build_response(kind);
    }
    ~RowFilter() {
        std::lock_guard lock(g_fftw_mutex);
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }
    RowFilter(const RowFilter&) = delete;
    RowFilter& operator=(const RowFilter&) = delete;

    void apply(std::span<const float> in, std::span<float> out) {
        for (int i = 0; i < padded_; ++i) real_.get()[i] = i < width_ ? in[i] : 0.0;
        fftw_execute(forward_);
        for (int k = 0; k < bins_; ++k) {
            spectrum_.get()[k][0] *= response_[k];
            spectrum_.get()[k][1] *= response_[k];
        }
        fftw_execute(inverse_);
        const double norm = 1.0 / padded_;
        for (int i = 0; i < width_; ++i) out[i] = static_cast<float>(real_.get()[i] * norm);
    }

private:
    // Ramp built from the band-limited spatial kernel (h[0] = 1/4,
    // h[n odd] = -1/(pi n)^2) so the DC term is not zeroed outright.
    void build_response(FbpFilter kind) {
        for (int i = 0; i < padded_; ++i) {
            const int n = i <= padded_ / 2 ? i : i - padded_;
            double h = 0.0;
            if (n == 0) {
                h = 0.25;
            } else if (n % 2 != 0) {
                h = -1.0 / (std::numbers::pi * n * std::numbers::pi * n);
            }
            real_.get()[i] = h;
        }
        fftw_execute(forward_);
        response_.resize(static_cast<std::size_t>(bins_));
        for (int k = 0; k < bins_; ++k) {
            double r = 2.0 * spectrum_.get()[k][0];
            if (kind == FbpFilter::ramp_hann) {
                const double freq = static_cast<double>(k) / padded_;
                r *= 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * freq));
            }
            response_[static_cast<std::size_t>(k)] = r;
        }
    }

    int width_;
    int padded_;
    int bins_;
    std::unique_ptr<double, FftwDeleter> real_;
    std::unique_ptr<fftw_complex, FftwDeleter> spectrum_;
    fftw_plan forward_{};
    fftw_plan inverse_{};
    std::vector<double> response_;
};

}  // namespace

ProjectionGeometry::ProjectionGeometry(Dims volume, const AngleSpec& spec)
    : volume_(volume), spec_(spec) {
    volume_.validate();
    const auto angles = angle_list(spec);
    cos_.reserve(angles.size());
    sin_.reserve(angles.size());
    for (double deg : angles) {
        const double rad = deg * std::numbers::pi / 180.0;
        cos_.push_back(std::cos(rad));
        sin_.push_back(std::sin(rad));
    }
    if (static_cast<double>(angles.size()) * volume_.height * volume_.width > 4.0e9) {
        throw ValidationError("sinogram size overflows");
    }
}

std::vector<float> ProjectionGeometry::forward(std::span<const float> x) const {
    const int D = volume_.depth, H = volume_.height, W = volume_.width;
    const std::size_t T = cos_.size();
    if (x.size() != volume_.count()) throw ValidationError("forward: volume size mismatch");
    std::vector<float> y(sinogram_size(), 0.0f);
    const double cd = (D - 1) / 2.0, cw = (W - 1) / 2.0;
    parallel_for(static_cast<std::size_t>(H), [&](std::size_t h0, std::size_t h1) {
        std::vector<double> acc(static_cast<std::size_t>(W));
        for (std::size_t h = h0; h < h1; ++h) {
            for (std::size_t a = 0; a < T; ++a) {
                std::fill(acc.begin(), acc.end(), 0.0);
                const double c = cos_[a], s = sin_[a];
                for (int d = 0; d < D; ++d) {
                    const float* src = &x[volume_.index(d, static_cast<int>(h), 0)];
                    for (int w = 0; w < W; ++w) {
                        const double v = src[w];
                        if (v == 0.0) continue;
                        const Splat sp = splat(d - cd, w - cw, c, s, cw);
                        if (sp.index >= 0 && sp.index < W) acc[sp.index] += (1.0 - sp.frac) * v;
                        if (sp.index + 1 >= 0 && sp.index + 1 < W)
                            acc[sp.index + 1] += sp.frac * v;
                    }
                }
                float* dst = &y[(a * static_cast<std::size_t>(H) + h) * static_cast<std::size_t>(W)];
                for (int w = 0; w < W; ++w) dst[w] = static_cast<float>(acc[w]);
            }
        }
    });
    return y;
}

std::vector<float> ProjectionGeometry::adjoint(std::span<const float> y) const {
    const int D = volume_.depth, H = volume_.height, W = volume_.width;
    const std::size_t T = cos_.size();
    if (y.size() != sinogram_size()) throw ValidationError("adjoint: sinogram size mismatch");
    std::vector<float> x(volume_.count(), 0.0f);
    const double cd = (D - 1) / 2.0, cw = (W - 1) / 2.0;
    parallel_for(static_cast<std::size_t>(H), [&](std::size_t h0, std::size_t h1) {
        for (std::size_t h = h0; h < h1; ++h) {
            for (int d = 0; d < D; ++d) {
                for (int w = 0; w < W; ++w) {
                    double sum = 0.0;
                    for (std::size_t a = 0; a < T; ++a) {
                        const float* row =
                            &y[(a * static_cast<std::size_t>(H) + h) * static_cast<std::size_t>(W)];
                        const Splat sp = splat(d - cd, w - cw, cos_[a], sin_[a], cw);
                        if (sp.index >= 0 && sp.index < W) sum += (1.0 - sp.frac) * row[sp.index];
                        if (sp.index + 1 >= 0 && sp.index + 1 < W)
                            sum += sp.frac * row[sp.index + 1];
                    }
                    x[volume_.index(d, static_cast<int>(h), w)] = static_cast<float>(sum);
                }
            }
        }
    });
    return x;
}

std::vector<float> ProjectionGeometry::adjoint_single(std::span<const float> frame, int tilt,
                                                      bool clamp_edges) const {
    const int D = volume_.depth, H = volume_.height, W = volume_.width;
    if (frame.size() != static_cast<std::size_t>(H) * static_cast<std::size_t>(W)) {
        throw ValidationError("adjoint_single: frame size mismatch");
    }
    if (tilt < 0 || tilt >= n_tilts()) throw ValidationError("adjoint_single: tilt out of range");
    std::vector<float> x(volume_.count(), 0.0f);
    const double cd = (D - 1) / 2.0, cw = (W - 1) / 2.0;
    const double c = cos_[static_cast<std::size_t>(tilt)], s = sin_[static_cast<std::size_t>(tilt)];
    parallel_for(static_cast<std::size_t>(H), [&](std::size_t h0, std::size_t h1) {
        for (std::size_t h = h0; h < h1; ++h) {
            const float* row = &frame[h * static_cast<std::size_t>(W)];
            for (int d = 0; d < D; ++d) {
                for (int w = 0; w < W; ++w) {
                    Splat sp = splat(d - cd, w - cw, c, s, cw);
                    double v = 0.0;
                    if (clamp_edges) {
                        if (sp.index < 0) {
                            v = row[0];
                        } else if (sp.index >= W - 1) {
                            v = row[W - 1];
                        } else {
                            v = (1.0 - sp.frac) * row[sp.index] + sp.frac * row[sp.index + 1];
                        }
                    } else {
                        if (sp.index >= 0 && sp.index < W) v += (1.0 - sp.frac) * row[sp.index];
                        if (sp.index + 1 >= 0 && sp.index + 1 < W) v += sp.frac * row[sp.index + 1];
                    }
                    x[volume_.index(d, static_cast<int>(h), w)] = static_cast<float>(v);
                }
            }
        }
    });
    return x;
}

TiltSeries forward_project(const Volume& x, const AngleSpec& spec) {
    if (x.size() == 0) throw ValidationError("forward_project: empty volume");
    ProjectionGeometry geom(x.dims(), spec);
    return TiltSeries(spec, x.dims().height, x.dims().width, geom.forward(x.values()));
}

Volume back_project(const TiltSeries& y, const AngleSpec& spec, int depth) {
    check_series(y, spec);
    const Dims dims{depth, y.height(), y.width()};
    ProjectionGeometry geom(dims, spec);
    return Volume(dims, geom.adjoint(y.values()));
}

std::vector<float> filter_sinogram(std::span<const float> frames, int width, FbpFilter filter) {
    std::vector<float> out(frames.begin(), frames.end());
    if (filter == FbpFilter::none) return out;
    if (width < 2) {
        throw ValidationError("FBP filter needs frames at least 2 pixels wide, got " +
                              std::to_string(width));
    }
    RowFilter rf(width, filter);
    const std::size_t n_rows = frames.size() / static_cast<std::size_t>(width);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const std::size_t off = r * static_cast<std::size_t>(width);
        rf.apply(frames.subspan(off, static_cast<std::size_t>(width)),
                 std::span<float>(out).subspan(off, static_cast<std::size_t>(width)));
    }
    return out;
}

Volume fbp(const TiltSeries& y, const AngleSpec& spec, int depth, FbpFilter filter) {
    check_series(y, spec);
    const Dims dims{depth, y.height(), y.width()};
    ProjectionGeometry geom(dims, spec);
    const auto filtered = filter_sinogram(y.values(), y.width(), filter);
    auto x = geom.adjoint(filtered);
    const double scale = std::numbers::pi / (2.0 * y.n_tilts());
    for (auto& v : x) v = static_cast<float>(v * scale);
    return Volume(dims, std::move(x));
}

FbpFilter parse_filter(const std::string& name) {
    if (name == "ramp") return FbpFilter::ramp;
    if (name == "ramp_hann" || name == "hann") return FbpFilter::ramp_hann;
    if (name == "none") return FbpFilter::none;
    throw ValidationError("unknown FBP filter '" + name + "'");
}

}  // namespace latomo
