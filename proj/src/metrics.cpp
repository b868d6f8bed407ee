#include "latomo/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <vector>

#include "latomo/error.hpp"

namespace latomo {

namespace {

void require_same_dims(const Volume& a, const Volume& b) {
    if (a.dims() != b.dims()) {
        throw ValidationError("volume dims differ: " + a.dims().str() + " vs " + b.dims().str());
    }
}

double interpolate_sorted(const std::vector<float>& sorted, double p) {
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (static_cast<double>(sorted[hi]) - sorted[lo]);
}

struct Quartiles {
    double q1;
    double q3;
};

Quartiles quartiles(std::span<const float> values) {
    if (values.empty()) throw ValidationError("quartiles of an empty volume");
    std::vector<float> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return {interpolate_sorted(sorted, 0.25), interpolate_sorted(sorted, 0.75)};
}

// Separable weighted window sum over the valid region.
std::vector<double> window_filter(const std::vector<double>& in, Dims dims,
                                  const std::vector<double> (&kernels)[3], Dims& out_dims) {
    std::vector<double> cur = in;
    Dims cd = dims;
    for (int axis = 0; axis < 3; ++axis) {
        const auto& k = kernels[axis];
        const int taps = static_cast<int>(k.size());
        Dims nd = cd;
        int* ext = axis == 0 ? &nd.depth : axis == 1 ? &nd.height : &nd.width;
        *ext -= taps - 1;
        std::vector<double> next(nd.count());
        for (int d = 0; d < nd.depth; ++d)
            for (int h = 0; h < nd.height; ++h)
                for (int w = 0; w < nd.width; ++w) {
                    double acc = 0.0;
                    for (int j = 0; j < taps; ++j) {
                        const int sd = d + (axis == 0 ? j : 0);
                        const int sh = h + (axis == 1 ? j : 0);
                        const int sw = w + (axis == 2 ? j : 0);
                        acc += k[static_cast<std::size_t>(j)] * cur[cd.index(sd, sh, sw)];
                    }
                    next[nd.index(d, h, w)] = acc;
                }
        cur.swap(next);
        cd = nd;
    }
    out_dims = cd;
    return cur;
}

std::vector<double> gaussian_taps(int extent) {
    const int radius = std::min(3, (extent - 1) / 2);
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * i * i / (1.5 * 1.5));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (auto& v : k) v /= sum;
    return k;
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

double quantile(std::span<const float> values, double p) {
    if (values.empty()) throw ValidationError("quantile of an empty set");
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile probability outside [0, 1]");
    std::vector<float> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    return interpolate_sorted(sorted, p);
}

AffineMap quartile_alignment(const Volume& recon, const Volume& reference) {
    const Quartiles r = quartiles(recon.values());
    const Quartiles g = quartiles(reference.values());
    if (!(r.q3 > r.q1)) {
        throw ValidationError("reconstruction has a degenerate histogram (Q3 == Q1)");
    }
    const double scale = (g.q3 - g.q1) / (r.q3 - r.q1);
    return {scale, g.q1 - scale * r.q1};
}

Volume align_quartiles(const Volume& recon, const Volume& reference) {
    const AffineMap m = quartile_alignment(recon, reference);
    // A map within float rounding of the identity would only add rounding noise.
    const double tol = 4.0 * std::numeric_limits<float>::epsilon();
    const Quartiles g = quartiles(reference.values());
    if (std::abs(m.scale - 1.0) <= tol &&
        std::abs(m.offset) <= tol * std::max(std::abs(g.q1), std::abs(g.q3))) {
        return recon;
    }
    const auto v = recon.values();
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = static_cast<float>(m.scale * v[i] + m.offset);
    }
    return Volume(recon.dims(), std::move(out));
}

double rmse(const Volume& a, const Volume& b) {
    require_same_dims(a, b);
    const auto av = a.values();
    const auto bv = b.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = static_cast<double>(av[i]) - bv[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(av.size()));
}

double psnr(double rmse_value, double peak) {
    if (rmse_value == 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(peak / rmse_value);
}

namespace {

std::vector<double> widen(std::span<const float> v) { return {v.begin(), v.end()}; }

double rmse_of(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(sum / static_cast<double>(a.size()));
}

double ssim_of(const std::vector<double>& x, const std::vector<double>& y, Dims dims, double peak) {
    if (!(peak > 0.0)) throw ValidationError("SSIM peak must be positive");
    const std::vector<double> kernels[3] = {gaussian_taps(dims.depth), gaussian_taps(dims.height),
                                            gaussian_taps(dims.width)};
    const std::size_t n = dims.count();
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    Dims od;
    const auto mx = window_filter(x, dims, kernels, od);
    const auto my = window_filter(y, dims, kernels, od);
    const auto mxx = window_filter(xx, dims, kernels, od);
    const auto myy = window_filter(yy, dims, kernels, od);
    const auto mxy = window_filter(xy, dims, kernels, od);
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = mxx[i] - mx[i] * mx[i];
        const double vy = myy[i] - my[i] * my[i];
        const double cov = mxy[i] - mx[i] * my[i];
        total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

}  // namespace

double ssim(const Volume& a, const Volume& b, double peak) {
    require_same_dims(a, b);
    return ssim_of(widen(a.values()), widen(b.values()), a.dims(), peak);
}

MetricReport evaluate(const Volume& recon, const Volume& reference, bool align) {
    require_same_dims(recon, reference);
    const auto rv = reference.values();
    const auto [lo, hi] = std::minmax_element(rv.begin(), rv.end());
    const double peak = static_cast<double>(*hi) - *lo;
    if (!(peak > 0.0)) throw ValidationError("reference volume is constant");
    // The aligned candidate stays in double so the metrics see no extra rounding.
    std::vector<double> candidate = widen(recon.values());
    if (align) {
        const AffineMap m = quartile_alignment(recon, reference);
        for (auto& v : candidate) v = m.scale * v + m.offset;
    }
    const std::vector<double> ref = widen(rv);
    MetricReport r;
    r.aligned = align;
    r.rmse = rmse_of(candidate, ref);
    r.psnr = psnr(r.rmse, peak);
    r.ssim = ssim_of(candidate, ref, recon.dims(), peak);
    return r;
}

std::string MetricReport::to_text() const {
    return "rmse=" + fmt(rmse) + "\npsnr=" + fmt(psnr) + "\nssim=" + fmt(ssim) +
           "\naligned=" + (aligned ? "1" : "0") + "\n";
}

std::string MetricReport::manifest_header() { return "recon,reference,rmse,psnr,ssim,aligned"; }

std::string MetricReport::manifest_row(const std::string& recon_name,
                                       const std::string& reference_name) const {
    return recon_name + "," + reference_name + "," + fmt(rmse) + "," + fmt(psnr) + "," +
           fmt(ssim) + "," + (aligned ? "1" : "0");
}

}  // namespace latomo
