#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "latomo/types.hpp"

namespace latomo {

/// One noise-prediction query. condition == nullptr is the unconditional
/// (all-zeros) branch. alpha and beta are the scheduler coefficients the
/// sampler uses at t; built-in denoisers read them, the external bridge only
/// forwards t.
struct DenoiseRequest {
    const Volume& x_t;
    const Volume* condition = nullptr;
    double t = 0.0;
    double alpha = 1.0;
    double beta = 0.0;
    double theta_deg = 0.0;
    double dtheta_deg = 0.0;

    void validate() const;
};

/// Noise predictor N([x_t | C]; t, theta, dtheta).
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual Volume predict_noise(const DenoiseRequest& req) = 0;
    virtual std::string name() const = 0;
};

/// Always predicts zero noise.
class ZeroDenoiser final : public Denoiser {
public:
    Volume predict_noise(const DenoiseRequest& req) override;
    std::string name() const override { return "zero"; }
};

/// eps = (x_t - alpha * gt) / beta; the exact inversion for a known target.
class OracleDenoiser final : public Denoiser {
public:
    explicit OracleDenoiser(Volume ground_truth);
    Volume predict_noise(const DenoiseRequest& req) override;
    std::string name() const override { return "oracle"; }

private:
    Volume gt_;
};

/// eps = (x_t - alpha * G_sigma(x_t)) / beta: a Gaussian blur stands in for
/// the clean estimate.
class SmoothingDenoiser final : public Denoiser {
public:
    explicit SmoothingDenoiser(double sigma);
    Volume predict_noise(const DenoiseRequest& req) override;
    std::string name() const override { return "smoothing"; }
    double sigma() const noexcept { return sigma_; }

private:
    double sigma_;
};

/// Separable 3D Gaussian blur (radius ceil(3 sigma)); the kernel is
/// renormalised where it hangs over the boundary.
std::vector<float> gaussian_blur(std::span<const float> x, Dims dims, double sigma);

class Subprocess;
class ExternalSession;
ExternalSession open_external_session(const std::vector<std::string>& argv, Dims shape,
                                      double timeout_s);

/// Connection to an external denoiser process speaking TDNZ0001 over its
/// stdin/stdout. Single owner; requests are strictly alternating.
class ExternalSession {
public:
    ExternalSession(const std::vector<std::string>& argv, Dims shape, double timeout_s);
    ~ExternalSession();
    ExternalSession(ExternalSession&&) noexcept;
    ExternalSession& operator=(ExternalSession&&) noexcept;

    const Dims& shape() const noexcept { return shape_; }
    Volume predict(const DenoiseRequest& req);
    /// Sends bye and waits for the peer to exit. Returns its exit status.
    int close();
    std::uint64_t bytes_received() const noexcept { return offset_; }

private:
    friend ExternalSession open_external_session(const std::vector<std::string>&, Dims, double);

    std::unique_ptr<Subprocess> proc_;
    Dims shape_;
    double timeout_s_;
    std::uint64_t offset_ = 0;
};

/// Spawns the process and performs the hello handshake. Throws RuntimeError
/// on spawn failure and ProtocolError on timeout, bad framing or a declared
/// shape different from `shape`.
ExternalSession open_external_session(const std::vector<std::string>& argv, Dims shape,
                                      double timeout_s = 60.0);

class ExternalDenoiser final : public Denoiser {
public:
    explicit ExternalDenoiser(ExternalSession session) : session_(std::move(session)) {}
    Volume predict_noise(const DenoiseRequest& req) override { return session_.predict(req); }
    std::string name() const override { return "external"; }
    ExternalSession& session() noexcept { return session_; }

private:
    ExternalSession session_;
};

}  // namespace latomo
