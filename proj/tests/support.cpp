#include "support.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <queue>
#include <stdexcept>

#include "latomo/radon.hpp"

namespace testing {

using latomo::Dims;
using latomo::Volume;

std::vector<float> random_floats(std::size_t n, std::uint64_t seed, float lo, float hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<float> out(n);
    for (auto& v : out) v = dist(rng);
    return out;
}

Volume random_volume(Dims dims, std::uint64_t seed, float lo, float hi) {
    return Volume(dims, random_floats(dims.count(), seed, lo, hi));
}

latomo::TiltSeries random_tilts(const latomo::AngleSpec& spec, int height, int width,
                                std::uint64_t seed) {
    const std::size_t n = static_cast<std::size_t>(spec.count()) * height * width;
    return latomo::TiltSeries(spec, height, width, random_floats(n, seed));
}

double dot(std::span<const float> a, std::span<const float> b) {
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(s);
}

double norm(std::span<const float> a) { return std::sqrt(dot(a, a)); }

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    }
    return m;
}

Volume soft_ellipsoid(Dims dims, double rd, double rh, double rw, double value) {
    std::vector<float> v(dims.count());
    const double cd = (dims.depth - 1) / 2.0, ch = (dims.height - 1) / 2.0,
                 cw = (dims.width - 1) / 2.0;
    for (int d = 0; d < dims.depth; ++d)
        for (int h = 0; h < dims.height; ++h)
            for (int w = 0; w < dims.width; ++w) {
                const double r = std::sqrt(std::pow((d - cd) / rd, 2) + std::pow((h - ch) / rh, 2) +
                                           std::pow((w - cw) / rw, 2));
                // Unit plateau inside r = 0.7, cosine roll-off to zero at r = 1.
                double f = 0.0;
                if (r <= 0.7) {
                    f = 1.0;
                } else if (r < 1.0) {
                    f = 0.5 * (1.0 + std::cos(std::numbers::pi * (r - 0.7) / 0.3));
                }
                v[dims.index(d, h, w)] = static_cast<float>(value * f);
            }
    return Volume(dims, std::move(v));
}

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("latomo_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace oracle {

std::vector<double> hat_matrix(Dims dims, const std::vector<double>& angles_deg) {
    const int D = dims.depth, H = dims.height, W = dims.width;
    const std::size_t rows = angles_deg.size() * H * W;
    const std::size_t cols = dims.count();
    std::vector<double> m(rows * cols, 0.0);
    const double cd = (D - 1) / 2.0, cw = (W - 1) / 2.0;
    for (std::size_t a = 0; a < angles_deg.size(); ++a) {
        const double phi = angles_deg[a] * std::numbers::pi / 180.0;
        for (int h = 0; h < H; ++h)
            for (int j = 0; j < W; ++j) {
                const std::size_t row = (a * H + h) * W + j;
                for (int d = 0; d < D; ++d)
                    for (int w = 0; w < W; ++w) {
                        const double u = -(d - cd) * std::sin(phi) + (w - cw) * std::cos(phi) + cw;
                        const double weight = std::max(0.0, 1.0 - std::abs(u - j));
                        m[row * cols + dims.index(d, h, w)] = weight;
                    }
            }
    }
    return m;
}

std::vector<double> basis_matrix(Dims dims, const latomo::AngleSpec& spec) {
    const std::size_t cols = dims.count();
    const std::size_t rows = static_cast<std::size_t>(spec.count()) * dims.height * dims.width;
    std::vector<double> m(rows * cols, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
        std::vector<float> e(cols, 0.0f);
        e[c] = 1.0f;
        const auto y = latomo::forward_project(Volume(dims, std::move(e)), spec);
        const auto yv = y.values();
        for (std::size_t r = 0; r < rows; ++r) m[r * cols + c] = yv[r];
    }
    return m;
}

std::vector<double> matvec(const std::vector<double>& m, std::size_t rows, std::span<const float> x) {
    const std::size_t cols = x.size();
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c] * x[c];
        out[r] = s;
    }
    return out;
}

double spectral_norm_sq(const std::vector<double>& a, std::size_t rows, std::size_t cols) {
    std::vector<double> v(cols, 1.0), av(rows), w(cols);
    double lambda = 0.0;
    for (int it = 0; it < 2000; ++it) {
        double nv = 0.0;
        for (double x : v) nv += x * x;
        nv = std::sqrt(nv);
        for (double& x : v) x /= nv;
        for (std::size_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < cols; ++c) s += a[r * cols + c] * v[c];
            av[r] = s;
        }
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) w[c] += a[r * cols + c] * av[r];
        double next = 0.0;
        for (std::size_t c = 0; c < cols; ++c) next += w[c] * v[c];
        v = w;
        if (it > 10 && std::abs(next - lambda) <= 1e-12 * next) return next;
        lambda = next;
    }
    return lambda;
}

std::vector<double> ramp_filter_row(std::span<const float> row, bool hann) {
    const int W = static_cast<int>(row.size());
    int P = 1;
    while (P < 2 * W) P *= 2;
    // Spatial band-limited ramp kernel and its DFT.
    std::vector<double> kernel(P, 0.0);
    for (int i = 0; i < P; ++i) {
        const int n = i <= P / 2 ? i : i - P;
        if (n == 0) {
            kernel[i] = 0.25;
        } else if (n % 2 != 0) {
            kernel[i] = -1.0 / std::pow(std::numbers::pi * n, 2);
        }
    }
    using cd = std::complex<double>;
    auto dft = [P](const std::vector<cd>& in, int sign) {
        std::vector<cd> out(P);
        for (int k = 0; k < P; ++k) {
            cd s = 0;
            for (int n = 0; n < P; ++n) {
                s += in[n] * std::polar(1.0, sign * 2.0 * std::numbers::pi * k * n / P);
            }
            out[k] = s;
        }
        return out;
    };
    std::vector<cd> kin(kernel.begin(), kernel.end());
    const auto kf = dft(kin, -1);
    std::vector<cd> xin(P, 0.0);
    for (int i = 0; i < W; ++i) xin[i] = row[i];
    auto xf = dft(xin, -1);
    for (int k = 0; k < P; ++k) {
        double r = 2.0 * kf[k].real();
        if (hann) {
            const int f = k <= P / 2 ? k : P - k;
            r *= 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * f / P));
        }
        xf[k] *= r;
    }
    const auto back = dft(xf, +1);
    std::vector<double> out(W);
    for (int i = 0; i < W; ++i) out[i] = back[i].real() / P;
    return out;
}

double quantile(std::span<const float> values, double p) {
    std::vector<float> v(values.begin(), values.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    std::nth_element(v.begin(), v.begin() + lo, v.end());
    const double a = v[lo];
    if (lo + 1 >= v.size()) return a;
    const double b = *std::min_element(v.begin() + lo + 1, v.end());
    return a + (pos - lo) * (b - a);
}

double population_variance(std::span<const double> values) {
    long double mean = 0;
    for (double v : values) mean += v;
    mean /= values.size();
    long double s = 0;
    for (double v : values) s += (v - mean) * (v - mean);
    return static_cast<double>(s / values.size());
}

double ssim(const Volume& a, const Volume& b, double peak) {
    const Dims dims = a.dims();
    auto radius = [](int extent) { return std::min(3, (extent - 1) / 2); };
    const int rd = radius(dims.depth), rh = radius(dims.height), rw = radius(dims.width);
    auto taps = [](int r) {
        std::vector<double> k;
        double s = 0;
        for (int i = -r; i <= r; ++i) {
            k.push_back(std::exp(-i * i / (2.0 * 1.5 * 1.5)));
            s += k.back();
        }
        for (double& v : k) v /= s;
        return k;
    };
    const auto kd = taps(rd), kh = taps(rh), kw = taps(rw);
    const double c1 = std::pow(0.01 * peak, 2), c2 = std::pow(0.03 * peak, 2);
    double total = 0;
    std::size_t count = 0;
    for (int d = rd; d < dims.depth - rd; ++d)
        for (int h = rh; h < dims.height - rh; ++h)
            for (int w = rw; w < dims.width - rw; ++w) {
                double mx = 0, my = 0;
                for (int i = -rd; i <= rd; ++i)
                    for (int j = -rh; j <= rh; ++j)
                        for (int k = -rw; k <= rw; ++k) {
                            const double g = kd[i + rd] * kh[j + rh] * kw[k + rw];
                            mx += g * a.at(d + i, h + j, w + k);
                            my += g * b.at(d + i, h + j, w + k);
                        }
                double vx = 0, vy = 0, cov = 0;
                for (int i = -rd; i <= rd; ++i)
                    for (int j = -rh; j <= rh; ++j)
                        for (int k = -rw; k <= rw; ++k) {
                            const double g = kd[i + rd] * kh[j + rh] * kw[k + rw];
                            const double ex = a.at(d + i, h + j, w + k) - mx;
                            const double ey = b.at(d + i, h + j, w + k) - my;
                            vx += g * ex * ex;
                            vy += g * ey * ey;
                            cov += g * ex * ey;
                        }
                total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                         ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
    return total / static_cast<double>(count);
}

std::vector<std::size_t> component_sizes(const Volume& v) {
    const Dims dims = v.dims();
    std::vector<char> seen(dims.count(), 0);
    std::vector<std::size_t> sizes;
    for (int d = 0; d < dims.depth; ++d)
        for (int h = 0; h < dims.height; ++h)
            for (int w = 0; w < dims.width; ++w) {
                const std::size_t start = dims.index(d, h, w);
                if (seen[start] || !(v[start] > 0.0f)) continue;
                std::queue<std::array<int, 3>> q;
                q.push({d, h, w});
                seen[start] = 1;
                std::size_t size = 0;
                while (!q.empty()) {
                    const auto [cd, ch, cw] = q.front();
                    q.pop();
                    ++size;
                    const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                          {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
                    for (const auto& o : nb) {
                        const int nd = cd + o[0], nh = ch + o[1], nw = cw + o[2];
                        if (nd < 0 || nh < 0 || nw < 0 || nd >= dims.depth || nh >= dims.height ||
                            nw >= dims.width)
                            continue;
                        const std::size_t idx = dims.index(nd, nh, nw);
                        if (seen[idx] || !(v[idx] > 0.0f)) continue;
                        seen[idx] = 1;
                        q.push({nd, nh, nw});
                    }
                }
                sizes.push_back(size);
            }
    return sizes;
}

}  // namespace oracle

}  // namespace testing
