#include "latomo/sampler.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "latomo/error.hpp"
#include "latomo/radon.hpp"
#include "latomo/uncertainty.hpp"

namespace latomo {

ScheduleKind parse_schedule_kind(const std::string& name) {
    if (name == "cosine") return ScheduleKind::cosine;
    if (name == "linear") return ScheduleKind::linear;
    throw ValidationError("unknown schedule '" + name + "'");
}

NoiseSchedule::NoiseSchedule(int n_steps, ScheduleKind kind) : kind_(kind) {
    if (n_steps < 2) throw ValidationError("schedule needs at least 2 steps");
    times_.resize(static_cast<std::size_t>(n_steps));
    alphas_.resize(times_.size());
    betas_.resize(times_.size());
    for (int k = 0; k < n_steps; ++k) {
        const double t = k == n_steps - 1 ? 0.0 : 1.0 - static_cast<double>(k) / (n_steps - 1);
        const auto c = at(kind, t);
        times_[static_cast<std::size_t>(k)] = t;
        alphas_[static_cast<std::size_t>(k)] = c.alpha;
        betas_[static_cast<std::size_t>(k)] = c.beta;
    }
}

ScheduleCoefficients NoiseSchedule::at(ScheduleKind kind, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("schedule time must lie in [0, 1]");
    if (kind == ScheduleKind::cosine) {
        const double angle = std::numbers::pi * t / 2.0;
        return {t == 1.0 ? 0.0 : std::cos(angle), std::sin(angle)};
    }
    const double alpha = 1.0 - t;
    return {alpha, std::sqrt(std::max(0.0, 1.0 - alpha * alpha))};
}

NoiseSchedule make_schedule(int n_steps, ScheduleKind kind) { return NoiseSchedule(n_steps, kind); }

ScheduleCoefficients effective_coefficients(ScheduleCoefficients raw) {
    if (raw.alpha >= kAlphaFloor) return raw;
    return {kAlphaFloor, std::sqrt(1.0 - kAlphaFloor * kAlphaFloor)};
}

namespace {

void require_same_dims(const Volume& a, const Volume& b, const char* what) {
    if (a.dims() != b.dims()) {
        throw ValidationError(std::string(what) + ": dims " + a.dims().str() + " vs " +
                              b.dims().str());
    }
}

void require_finite(const std::vector<float>& v, int step, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw RuntimeError(std::string(what) + " became non-finite at step " +
                               std::to_string(step) + " (voxel " + std::to_string(i) + ")");
        }
    }
}

// Re-raises a denoiser failure tagged with the step index, keeping its category.
template <typename F>
Volume call_denoiser(int step, F&& f) {
    try {
        return f();
    } catch (const ProtocolError& e) {
        throw ProtocolError("denoiser failed at step " + std::to_string(step) + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError("denoiser failed at step " + std::to_string(step) + ": " + e.what());
    } catch (const Error& e) {
        throw RuntimeError("denoiser failed at step " + std::to_string(step) + ": " + e.what());
    }
}

// State shared by the three sampling loops.
struct SamplerSetup {
    Dims dims;
    Volume condition;
    ProjectionGeometry geom;
    ProjectorConfig projector;
};

SamplerSetup prepare(const TiltSeries& y, const AngleSpec& spec, int depth,
                     const GuidanceConfig& cfg, bool needs_projector) {
    cfg.validate();
    if (y.n_tilts() != spec.count()) throw ValidationError("tilt count does not match angle spec");
    const Dims dims{depth, y.height(), y.width()};
    dims.validate();
    ProjectorConfig projector = cfg.projector;
    if (needs_projector) {
        if (projector.lambda == 0.0) projector.lambda = 1.0 / estimate_lipschitz(dims, spec);
        projector.validate();
    }
    return {dims, fbp(y, spec, depth, FbpFilter::ramp_hann), ProjectionGeometry(dims, spec),
            projector};
}

// Mixed noise estimate at schedule index k (1-based step number step).
Volume mixed_noise(Denoiser& denoiser, const Volume& x_t, const Volume& condition,
                   const AngleSpec& spec, const GuidanceConfig& cfg, std::size_t k, int step) {
    const double t = cfg.schedule.times()[k];
    const auto c = effective_coefficients({cfg.schedule.alphas()[k], cfg.schedule.betas()[k]});
    DenoiseRequest uncond{x_t, nullptr, t, c.alpha, c.beta, spec.range_deg, spec.step_deg};
    DenoiseRequest cond{x_t, &condition, t, c.alpha, c.beta, spec.range_deg, spec.step_deg};
    Volume eps_u = call_denoiser(step, [&] { return denoiser.predict_noise(uncond); });
    Volume eps_c = call_denoiser(step, [&] { return denoiser.predict_noise(cond); });
    require_same_dims(eps_u, x_t, "unconditional noise estimate");
    require_same_dims(eps_c, x_t, "conditional noise estimate");
    return cfg_mix(eps_u, eps_c, cfg.cfg_scale);
}

enum class Fusion { weighted, none, full_projection };

Volume run(const TiltSeries& y, const AngleSpec& spec, int depth, Denoiser& denoiser,
           const GuidanceConfig& cfg, Fusion fusion) {
    const auto start_time = std::chrono::steady_clock::now();
    SamplerSetup setup = prepare(y, spec, depth, cfg, fusion != Fusion::none);
    const Dims dims = setup.dims;

    std::optional<UncertaintyMap> u;
    if (fusion == Fusion::weighted) {
        if (cfg.uncertainty_override) {
            if (cfg.uncertainty_override->dims() != dims) {
                throw ValidationError("uncertainty override dims do not match the volume");
            }
            u = *cfg.uncertainty_override;
        } else if (cfg.use_uncertainty) {
            u = compute_uncertainty(y, spec, depth);
        } else {
            u = UncertaintyMap::constant(dims, 0.0f);
        }
    }

    Volume x_t(dims, initial_noise(dims, cfg.seed));
    const auto yv = y.values();
    const std::size_t n_points = static_cast<std::size_t>(cfg.schedule.n_steps());
    const int total = static_cast<int>(n_points) - 1;
    for (std::size_t k = 0; k + 1 < n_points; ++k) {
        const int step = static_cast<int>(k) + 1;
        const Volume eps = mixed_noise(denoiser, x_t, setup.condition, spec, cfg, k, step);
        const auto cur = effective_coefficients({cfg.schedule.alphas()[k], cfg.schedule.betas()[k]});
        const auto prev =
            effective_coefficients({cfg.schedule.alphas()[k + 1], cfg.schedule.betas()[k + 1]});

        const auto xv = x_t.values();
        const auto ev = eps.values();
        std::vector<float> x0(xv.size());
        for (std::size_t i = 0; i < x0.size(); ++i) {
            x0[i] = static_cast<float>((xv[i] - cur.beta * ev[i]) / cur.alpha);
        }
        require_finite(x0, step, "clean estimate");

        double residual = std::nan("");
        std::vector<float> blended;
        if (fusion == Fusion::none) {
            blended = std::move(x0);
        } else {
            std::vector<float> projected = x0;
            try {
                const auto res = detail::descend(setup.geom, projected, yv, setup.projector.n_steps,
                                                 setup.projector.lambda);
                residual = res.back();
            } catch (const DivergenceError& e) {
                throw DivergenceError("projector diverged at diffusion step " +
                                          std::to_string(step) + ": " + e.what(),
                                      e.iteration());
            }
            if (fusion == Fusion::full_projection) {
                blended = std::move(projected);
            } else {
                blended.resize(x0.size());
                for (std::size_t i = 0; i < x0.size(); ++i) {
                    const float w = (*u)[i];
                    blended[i] = w * x0[i] + (1.0f - w) * projected[i];
                }
            }
        }

        std::vector<float> next(blended.size());
        for (std::size_t i = 0; i < next.size(); ++i) {
            next[i] = static_cast<float>(prev.alpha * blended[i] + prev.beta * ev[i]);
        }
        require_finite(next, step, "iterate");
        x_t = Volume(dims, std::move(next));

        if (cfg.on_step) {
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
            cfg.on_step({step, total, cfg.schedule.times()[k], residual, elapsed});
        }
    }
    return x_t;
}

}  // namespace

void GuidanceConfig::validate() const {
    if (!std::isfinite(cfg_scale)) throw ValidationError("cfg scale must be finite");
}

std::vector<float> initial_noise(Dims dims, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<float> out(dims.count());
    for (auto& v : out) v = static_cast<float>(normal(rng));
    return out;
}

DdimStep ddim_step(const Volume& x_t, const Volume& eps, double alpha_t, double beta_t,
                   double alpha_prev, double beta_prev) {
    require_same_dims(x_t, eps, "ddim_step");
    if (alpha_t == 0.0) throw ValidationError("ddim_step: alpha_t is zero");
    const auto xv = x_t.values();
    const auto ev = eps.values();
    std::vector<float> x0(xv.size()), prev(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double clean = (xv[i] - beta_t * ev[i]) / alpha_t;
        x0[i] = static_cast<float>(clean);
        prev[i] = static_cast<float>(alpha_prev * x0[i] + beta_prev * ev[i]);
    }
    return {Volume(x_t.dims(), std::move(x0)), Volume(x_t.dims(), std::move(prev))};
}

Volume cfg_mix(const Volume& eps_uncond, const Volume& eps_cond, double s) {
    require_same_dims(eps_uncond, eps_cond, "cfg_mix");
    if (!std::isfinite(s)) throw ValidationError("cfg scale must be finite");
    const auto u = eps_uncond.values();
    const auto c = eps_cond.values();
    std::vector<float> out(u.size());
    if (s == 1.0) {
        out.assign(c.begin(), c.end());
    } else if (s == 0.0) {
        out.assign(u.begin(), u.end());
    } else {
        for (std::size_t i = 0; i < u.size(); ++i) {
            out[i] = static_cast<float>((1.0 - s) * u[i] + s * c[i]);
        }
    }
    return Volume(eps_uncond.dims(), std::move(out));
}

Volume guided_sample(const TiltSeries& y, const AngleSpec& spec, int depth, Denoiser& denoiser,
                     const GuidanceConfig& cfg) {
    return run(y, spec, depth, denoiser, cfg, Fusion::weighted);
}

Volume unprojected_sample(const TiltSeries& y, const AngleSpec& spec, int depth,
                          Denoiser& denoiser, const GuidanceConfig& cfg) {
    return run(y, spec, depth, denoiser, cfg, Fusion::none);
}

Volume projected_sample(const TiltSeries& y, const AngleSpec& spec, int depth,
                        Denoiser& denoiser, const GuidanceConfig& cfg) {
    return run(y, spec, depth, denoiser, cfg, Fusion::full_projection);
}

}  // namespace latomo
