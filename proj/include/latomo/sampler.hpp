#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latomo/denoiser.hpp"
#include "latomo/projector.hpp"
#include "latomo/types.hpp"

namespace latomo {

enum class ScheduleKind { linear, cosine };

ScheduleKind parse_schedule_kind(const std::string& name);

struct ScheduleCoefficients {
    double alpha;
    double beta;
};

/// Variance-preserving schedule sampled at n time points
/// t_1 = 1 > t_2 > ... > t_n = 0. Each of the n - 1 transitions is one
/// denoising step.
class NoiseSchedule {
public:
    NoiseSchedule(int n_steps, ScheduleKind kind);

    int n_steps() const noexcept { return static_cast<int>(times_.size()); }
    ScheduleKind kind() const noexcept { return kind_; }
    std::span<const double> times() const noexcept { return times_; }
    std::span<const double> alphas() const noexcept { return alphas_; }
    std::span<const double> betas() const noexcept { return betas_; }

    /// Raw (alpha, beta) at time t in [0, 1]; cosine gives (cos(pi t/2), sin(pi t/2)).
    static ScheduleCoefficients at(ScheduleKind kind, double t);

private:
    ScheduleKind kind_;
    std::vector<double> times_;
    std::vector<double> alphas_;
    std::vector<double> betas_;
};

NoiseSchedule make_schedule(int n_steps, ScheduleKind kind);

/// alpha is floored here before dividing by it; beta is recomputed to keep
/// alpha^2 + beta^2 = 1.
inline constexpr double kAlphaFloor = 1e-3;
ScheduleCoefficients effective_coefficients(ScheduleCoefficients raw);

struct DdimStep {
    Volume x_t0;
    Volume x_prev;
};

/// x_t0 = (x_t - beta_t eps) / alpha_t;  x_prev = alpha_prev x_t0 + beta_prev eps.
DdimStep ddim_step(const Volume& x_t, const Volume& eps, double alpha_t, double beta_t,
                   double alpha_prev, double beta_prev);

/// (1 - s) eps_uncond + s eps_cond.
Volume cfg_mix(const Volume& eps_uncond, const Volume& eps_cond, double s);

struct StepProgress {
    int step;          // 1-based
    int total_steps;
    double t;
    double residual;   // ||y - A P(x_t0)|| after projection
    double elapsed_s;
};

struct GuidanceConfig {
    double cfg_scale = 1.5;
    /// A lambda of 0 selects 1/L from power iteration.
    ProjectorConfig projector{};
    NoiseSchedule schedule = make_schedule(50, ScheduleKind::cosine);
    std::uint64_t seed = 0;
    /// When set, replaces the map computed from the tilts.
    std::optional<UncertaintyMap> uncertainty_override;
    /// false forces u = 0 (fully projected); required for a single tilt.
    bool use_uncertainty = true;
    std::function<void(const StepProgress&)> on_step;

    void validate() const;
};

/// x_N ~ N(0, I) drawn from seed.
std::vector<float> initial_noise(Dims dims, std::uint64_t seed);

/// Projector-guided, uncertainty-fused DDIM reconstruction. Each step queries
/// the denoiser without and with the FBP conditioning volume, mixes the two
/// estimates, projects the clean estimate onto the tilts and fuses
/// u * x_t0 + (1 - u) * P(x_t0) before re-noising.
Volume guided_sample(const TiltSeries& y, const AngleSpec& spec, int depth, Denoiser& denoiser,
                     const GuidanceConfig& cfg);

/// Plain conditional DDIM without the projector (reference path for u = 1).
Volume unprojected_sample(const TiltSeries& y, const AngleSpec& spec, int depth,
                          Denoiser& denoiser, const GuidanceConfig& cfg);

/// DDIM with the projector applied to every clean estimate (reference path for u = 0).
Volume projected_sample(const TiltSeries& y, const AngleSpec& spec, int depth,
                        Denoiser& denoiser, const GuidanceConfig& cfg);

}  // namespace latomo
