#include "latomo/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "latomo/error.hpp"
#include "latomo/io.hpp"
#include "latomo/parallel.hpp"
#include "latomo/radon.hpp"

namespace latomo {

void ContrastParams::validate() const {
    if (!(attenuation > 0.0) || !(gamma > 0.0) || !(k > 0.0) || !std::isfinite(attenuation) ||
        !std::isfinite(gamma) || !std::isfinite(k)) {
        throw ValidationError("contrast parameters C, gamma and k must be positive and finite");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw ValidationError("noise sigma must be nonnegative");
    }
}

namespace {

std::vector<float> powered(std::span<const float> s, double gamma) {
    std::vector<float> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        out[i] = s[i] == 0.0f ? 0.0f : static_cast<float>(std::pow(static_cast<double>(s[i]), gamma));
    }
    return out;
}

void require_nonnegative(const Volume& s) {
    const auto v = s.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 0.0f) {
            throw ValidationError("HAADF synthesis needs nonnegative voxels; voxel " +
                                  std::to_string(i) + " is " + std::to_string(v[i]));
        }
    }
}

}  // namespace

TiltSeries synthesize_haadf(const Volume& s, const AngleSpec& spec, const ContrastParams& params) {
    params.validate();
    require_nonnegative(s);
    ProjectionGeometry geom(s.dims(), spec);
    auto frames = geom.forward(powered(s.values(), params.gamma));
    // Saturated pixels would round up to k in float; keep them strictly below.
    float ceiling = static_cast<float>(params.k);
    while (static_cast<double>(ceiling) >= params.k) ceiling = std::nextafter(ceiling, 0.0f);
    for (auto& v : frames) {
        v = std::min(ceiling, static_cast<float>(params.k * -std::expm1(-params.attenuation * v)));
    }
    if (params.noise_sigma > 0.0) {
        std::mt19937_64 rng(params.noise_seed);
        std::normal_distribution<double> normal(0.0, params.noise_sigma);
        for (auto& v : frames) v = static_cast<float>(v + normal(rng));
    }
    return TiltSeries(spec, s.dims().height, s.dims().width, std::move(frames));
}

AcquisitionSampler::AcquisitionSampler(std::uint64_t seed, Interval range, Interval step)
    : range_(range), step_(step), rng_(seed) {
    if (!(range.lo >= 0.0) || !(range.hi >= range.lo) || !(step.lo > 0.0) ||
        !(step.hi >= step.lo)) {
        throw ValidationError("invalid acquisition intervals");
    }
}

AngleSpec AcquisitionSampler::next() {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](Interval iv) {
        const double v = iv.lo + (iv.hi - iv.lo) * unit(rng_);
        return std::clamp(std::round(v * 2.0) / 2.0, iv.lo, iv.hi);
    };
    const double range = draw(range_);
    const double step = draw(step_);
    return AngleSpec{range, step, 0.0};
}

AngleSpec sample_acquisition(AcquisitionSampler& sampler) { return sampler.next(); }

namespace {

// Value of one ellipsoid at a point, or -1 outside.
double ellipsoid_value(const Ellipsoid& e, double d, double h, double w) {
    const double c = std::cos(e.yaw_rad), s = std::sin(e.yaw_rad);
    const double dd = d - e.center[0];
    const double dh = h - e.center[1];
    const double dw = w - e.center[2];
    const double ah = c * dh + s * dw;
    const double aw = -s * dh + c * dw;
    const double r2 = (dd / e.semi_axes[0]) * (dd / e.semi_axes[0]) +
                      (ah / e.semi_axes[1]) * (ah / e.semi_axes[1]) +
                      (aw / e.semi_axes[2]) * (aw / e.semi_axes[2]);
    if (r2 > 1.0) return -1.0;
    if (e.shell <= 0.0) return e.intensity;
    const double min_axis = std::min({e.semi_axes[0], e.semi_axes[1], e.semi_axes[2]});
    const double inner = std::max(0.0, 1.0 - e.shell / min_axis);
    return std::sqrt(r2) >= inner ? e.intensity : e.fill;
}

}  // namespace

Volume render_ellipsoids(Dims dims, std::span<const Ellipsoid> objects) {
    dims.validate();
    std::vector<float> out(dims.count(), 0.0f);
    constexpr double kSub[2] = {-0.25, 0.25};
    for (const auto& e : objects) {
        if (!(e.semi_axes[0] > 0.0 && e.semi_axes[1] > 0.0 && e.semi_axes[2] > 0.0)) {
            throw ValidationError("ellipsoid semi-axes must be positive");
        }
        const double reach_plane = std::max(e.semi_axes[1], e.semi_axes[2]) + 1.0;
        const int d0 = std::max(0, static_cast<int>(std::floor(e.center[0] - e.semi_axes[0] - 1)));
        const int d1 = std::min(dims.depth - 1, static_cast<int>(std::ceil(e.center[0] + e.semi_axes[0] + 1)));
        const int h0 = std::max(0, static_cast<int>(std::floor(e.center[1] - reach_plane)));
        const int h1 = std::min(dims.height - 1, static_cast<int>(std::ceil(e.center[1] + reach_plane)));
        const int w0 = std::max(0, static_cast<int>(std::floor(e.center[2] - reach_plane)));
        const int w1 = std::min(dims.width - 1, static_cast<int>(std::ceil(e.center[2] + reach_plane)));
        if (d0 > d1 || h0 > h1 || w0 > w1) continue;
        parallel_for(static_cast<std::size_t>(d1 - d0 + 1), [&](std::size_t b, std::size_t en) {
            for (std::size_t di = b; di < en; ++di) {
                const int d = d0 + static_cast<int>(di);
                for (int h = h0; h <= h1; ++h) {
                    for (int w = w0; w <= w1; ++w) {
                        double acc = 0.0;
                        int inside = 0;
                        for (double sd : kSub)
                            for (double sh : kSub)
                                for (double sw : kSub) {
                                    const double v = ellipsoid_value(e, d + sd, h + sh, w + sw);
                                    if (v >= 0.0) {
                                        acc += v;
                                        ++inside;
                                    }
                                }
                        if (inside == 0) continue;
                        const float v = static_cast<float>(acc / 8.0);
                        float& dst = out[dims.index(d, h, w)];
                        dst = std::max(dst, v);
                    }
                }
            }
        });
    }
    for (auto& v : out) v = std::clamp(v, 0.0f, 1.0f);
    return Volume(dims, std::move(out));
}

void PhantomSpec::validate() const {
    dims.validate();
    if (min_shells < 0 || max_shells < min_shells || min_blobs < 0 || max_blobs < min_blobs) {
        throw ValidationError("phantom object counts must satisfy 0 <= min <= max");
    }
    if (!(shell_size_lo > 0.0) || shell_size_hi < shell_size_lo || !(blob_size_lo > 0.0) ||
        blob_size_hi < blob_size_lo) {
        throw ValidationError("phantom size ranges must be positive and ordered");
    }
    for (double v : {membrane_intensity, matrix_intensity, blob_intensity}) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("phantom intensities must lie in [0, 1]");
    }
    if (!(membrane_thickness > 0.0)) throw ValidationError("membrane thickness must be positive");
}

Volume generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    auto count = [&](int lo, int hi) {
        return lo + static_cast<int>(std::floor(unit(rng) * (hi - lo + 1 - 1e-12)));
    };

    const Dims& dims = spec.dims;
    const double plane = std::min(dims.height, dims.width);
    std::vector<Ellipsoid> objects;

    const int n_shells = count(spec.min_shells, spec.max_shells);
    for (int i = 0; i < n_shells; ++i) {
        Ellipsoid m{};
        m.semi_axes[1] = uniform(spec.shell_size_lo, spec.shell_size_hi) * plane;
        m.semi_axes[2] = m.semi_axes[1] * uniform(0.65, 0.95);
        m.semi_axes[0] = std::max(1.5, uniform(0.38, 0.48) * dims.depth);
        m.center[0] = (dims.depth - 1) / 2.0 + uniform(-0.1, 0.1) * dims.depth;
        m.center[1] = uniform(0.25, 0.75) * (dims.height - 1);
        m.center[2] = uniform(0.25, 0.75) * (dims.width - 1);
        m.yaw_rad = uniform(0.0, std::numbers::pi);
        m.intensity = spec.membrane_intensity;
        m.shell = spec.membrane_thickness;
        m.fill = spec.matrix_intensity;
        objects.push_back(m);

        // Cristae: thin plates across the short in-plane axis.
        const int n_cristae = count(2, 4);
        for (int c = 0; c < n_cristae; ++c) {
            Ellipsoid plate = m;
            const double offset = ((c + 0.5) / n_cristae - 0.5) * 1.4 * m.semi_axes[1];
            const double cy = std::cos(m.yaw_rad), sy = std::sin(m.yaw_rad);
            plate.center[1] = m.center[1] + cy * offset;
            plate.center[2] = m.center[2] + sy * offset;
            plate.semi_axes[0] = 0.7 * m.semi_axes[0];
            plate.semi_axes[1] = std::max(0.8, 0.5 * spec.membrane_thickness);
            plate.semi_axes[2] = 0.75 * m.semi_axes[2] *
                                 std::sqrt(std::max(0.0, 1.0 - std::pow(offset / m.semi_axes[1], 2)));
            if (plate.semi_axes[2] < 1.0) continue;
            plate.intensity = 0.5 * (spec.membrane_intensity + spec.matrix_intensity);
            plate.shell = 0.0;
            objects.push_back(plate);
        }
    }

    const int n_blobs = count(spec.min_blobs, spec.max_blobs);
    for (int i = 0; i < n_blobs; ++i) {
        Ellipsoid b{};
        const double r = uniform(spec.blob_size_lo, spec.blob_size_hi) * plane;
        b.semi_axes[0] = std::min(r, 0.3 * dims.depth + 0.5);
        b.semi_axes[1] = r * uniform(0.8, 1.2);
        b.semi_axes[2] = r * uniform(0.8, 1.2);
        b.center[0] = uniform(0.3, 0.7) * (dims.depth - 1);
        b.center[1] = uniform(0.1, 0.9) * (dims.height - 1);
        b.center[2] = uniform(0.1, 0.9) * (dims.width - 1);
        b.yaw_rad = uniform(0.0, std::numbers::pi);
        b.intensity = spec.blob_intensity;
        objects.push_back(b);
    }
    return render_ellipsoids(dims, objects);
}

Histogram Histogram::of(std::span<const float> values, double lo, double hi, int bins) {
    if (!(hi > lo) || bins < 1) throw ValidationError("histogram needs hi > lo and bins >= 1");
    Histogram hist{lo, hi, std::vector<double>(static_cast<std::size_t>(bins), 0.0)};
    const double scale = bins / (hi - lo);
    for (float v : values) {
        const int b = std::clamp(static_cast<int>(std::floor((v - lo) * scale)), 0, bins - 1);
        hist.counts[static_cast<std::size_t>(b)] += 1.0;
    }
    return hist;
}

std::vector<double> Histogram::normalized() const {
    double total = 0.0;
    for (double c : counts) {
        if (c < 0.0 || !std::isfinite(c)) throw ValidationError("histogram counts must be nonnegative");
        total += c;
    }
    if (counts.empty() || !(total > 0.0) || !(hi > lo)) {
        throw ValidationError("degenerate histogram (no bins, no mass or empty range)");
    }
    std::vector<double> out(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) out[i] = counts[i] / total;
    return out;
}

double histogram_distance(const Histogram& a, const Histogram& b) {
    if (a.counts.size() != b.counts.size()) throw ValidationError("histogram bin counts differ");
    const auto pa = a.normalized();
    const auto pb = b.normalized();
    double d = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) d += std::abs(pa[i] - pb[i]);
    return 0.5 * d;
}

ContrastFit fit_contrast(const Histogram& real_hist, const Volume& sim_vol, const AngleSpec& spec,
                         const ContrastGrid& grid) {
    (void)real_hist.normalized();
    if (grid.attenuation.empty() || grid.gamma.empty() || grid.k.empty()) {
        throw ValidationError("contrast grid must have at least one value per parameter");
    }
    require_nonnegative(sim_vol);
    const auto sv = sim_vol.values();
    if (std::all_of(sv.begin(), sv.end(), [](float v) { return v == 0.0f; })) {
        throw ValidationError("simulation volume is all zero; contrast fit is uninformative");
    }
    ProjectionGeometry geom(sim_vol.dims(), spec);
    const int bins = static_cast<int>(real_hist.counts.size());
    ContrastFit best{{}, std::numeric_limits<double>::infinity()};
    std::vector<float> frames;
    for (double gamma : grid.gamma) {
        const auto line_integrals = geom.forward(powered(sv, gamma));
        frames.resize(line_integrals.size());
        for (double att : grid.attenuation) {
            for (double k : grid.k) {
                ContrastParams p{att, gamma, k, 0.0, 0};
                p.validate();
                for (std::size_t i = 0; i < frames.size(); ++i) {
                    frames[i] = static_cast<float>(k * -std::expm1(-att * line_integrals[i]));
                }
                const double d = histogram_distance(
                    real_hist, Histogram::of(frames, real_hist.lo, real_hist.hi, bins));
                if (d < best.distance) best = {p, d};
            }
        }
    }
    return best;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double to_double(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError("manifest record lacks '" + key + "'");
    double v = 0.0;
    const auto& s = it->second;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ValidationError("manifest field '" + key + "' is not a number: " + s);
    }
    return v;
}

std::uint64_t to_u64(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ValidationError("manifest record lacks '" + key + "'");
    std::uint64_t v = 0;
    const auto& s = it->second;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ValidationError("manifest field '" + key + "' is not an integer: " + s);
    }
    return v;
}

}  // namespace

std::string format_manifest_record(const ManifestRecord& r) {
    std::string out;
    out += "volume=" + r.volume_file;
    out += " tilts=" + r.tilt_file;
    out += " range=" + fmt(r.angles.range_deg);
    out += " step=" + fmt(r.angles.step_deg);
    out += " center=" + fmt(r.angles.center_deg);
    out += " C=" + fmt(r.params.attenuation);
    out += " gamma=" + fmt(r.params.gamma);
    out += " k=" + fmt(r.params.k);
    out += " noise_sigma=" + fmt(r.params.noise_sigma);
    out += " noise_seed=" + std::to_string(r.params.noise_seed);
    out += " seed=" + std::to_string(r.seed);
    return out;
}

ManifestRecord parse_manifest_record(const std::string& line) {
    std::map<std::string, std::string> kv;
    std::istringstream in(line);
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw ValidationError("manifest token without '=': " + token);
        kv[token.substr(0, eq)] = token.substr(eq + 1);
    }
    ManifestRecord r;
    if (!kv.count("volume") || !kv.count("tilts")) {
        throw ValidationError("manifest record lacks volume/tilts");
    }
    r.volume_file = kv["volume"];
    r.tilt_file = kv["tilts"];
    r.angles = {to_double(kv, "range"), to_double(kv, "step"), to_double(kv, "center")};
    r.angles.validate();
    r.params = {to_double(kv, "C"), to_double(kv, "gamma"), to_double(kv, "k"),
                to_double(kv, "noise_sigma"), to_u64(kv, "noise_seed")};
    r.seed = to_u64(kv, "seed");
    return r;
}

std::vector<ManifestRecord> write_dataset(const std::filesystem::path& dir, int n,
                                          const PhantomSpec& base, const ContrastParams& params,
                                          std::uint64_t seed) {
    if (n < 1) throw ValidationError("dataset needs at least one sample");
    params.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw RuntimeError("cannot create dataset directory " + dir.string() + ": " + ec.message());
    AcquisitionSampler sampler(seed);
    std::vector<ManifestRecord> records;
    for (int i = 0; i < n; ++i) {
        PhantomSpec ps = base;
        ps.seed = base.seed + static_cast<std::uint64_t>(i);
        const Volume vol = generate_phantom(ps);
        const AngleSpec angles = sampler.next();
        ContrastParams p = params;
        p.noise_seed = params.noise_seed + static_cast<std::uint64_t>(i);
        const TiltSeries tilts = synthesize_haadf(vol, angles, p);
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%04d", i);
        ManifestRecord rec{std::string(name) + ".tdvol", std::string(name) + ".tdtlt", angles, p,
                           ps.seed};
        save_volume(vol, dir / rec.volume_file, {{"kind", "phantom"}});
        save_tilts(tilts, dir / rec.tilt_file,
                   {{"kind", "haadf"}, {"depth", std::to_string(vol.dims().depth)}});
        records.push_back(rec);
    }
    std::ofstream out(dir / "manifest.txt");
    if (!out) throw RuntimeError("cannot write manifest in " + dir.string());
    out << "# TDMANIFEST1\n";
    for (const auto& r : records) out << format_manifest_record(r) << "\n";
    if (!out) throw RuntimeError("failed writing manifest in " + dir.string());
    return records;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeError("cannot open manifest " + path.string());
    std::vector<ManifestRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        out.push_back(parse_manifest_record(line));
    }
    return out;
}

}  // namespace latomo
