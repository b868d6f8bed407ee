#include "latomo/denoiser.hpp"

#include <chrono>
#include <cmath>

#include "latomo/error.hpp"
#include "latomo/parallel.hpp"
#include "latomo/wire.hpp"
#include "subprocess.hpp"

namespace latomo {

namespace {

void require_noise_level(const DenoiseRequest& req) {
    if (!(req.beta > 0.0)) {
        throw ValidationError("noise level beta(t) is zero at t=" + std::to_string(req.t) +
                              "; the noise estimate is undefined");
    }
}

std::vector<float> kernel_1d(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> k(static_cast<std::size_t>(2 * radius + 1));
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<std::size_t>(i + radius)] =
            static_cast<float>(std::exp(-0.5 * (i * i) / (sigma * sigma)));
    }
    return k;
}

// Blurs along one axis with stride/extent describing it inside the buffer.
void blur_axis(std::vector<float>& data, Dims dims, int axis, const std::vector<float>& k) {
    const int radius = static_cast<int>(k.size() / 2);
    const int n = axis == 0 ? dims.depth : axis == 1 ? dims.height : dims.width;
    if (n == 1) return;
    const std::size_t stride = axis == 0 ? static_cast<std::size_t>(dims.height) * dims.width
                               : axis == 1 ? static_cast<std::size_t>(dims.width)
                                           : 1;
    const std::size_t lines = dims.count() / static_cast<std::size_t>(n);
    std::vector<float> out(data.size());
    parallel_for(lines, [&](std::size_t l0, std::size_t l1) {
        for (std::size_t line = l0; line < l1; ++line) {
            // Base offset of this line: decompose over the other two axes.
            std::size_t base = 0;
            if (axis == 0) {
                base = line;
            } else if (axis == 1) {
                const std::size_t d = line / dims.width, w = line % dims.width;
                base = d * static_cast<std::size_t>(dims.height) * dims.width + w;
            } else {
                base = line * static_cast<std::size_t>(dims.width);
            }
            for (int i = 0; i < n; ++i) {
                double acc = 0.0, wsum = 0.0;
                for (int j = std::max(0, i - radius); j <= std::min(n - 1, i + radius); ++j) {
                    const double wgt = k[static_cast<std::size_t>(j - i + radius)];
                    acc += wgt * data[base + static_cast<std::size_t>(j) * stride];
                    wsum += wgt;
                }
                out[base + static_cast<std::size_t>(i) * stride] = static_cast<float>(acc / wsum);
            }
        }
    });
    data.swap(out);
}

}  // namespace

void DenoiseRequest::validate() const {
    if (condition && condition->dims() != x_t.dims()) {
        throw ValidationError("condition dims " + condition->dims().str() +
                              " do not match x_t dims " + x_t.dims().str());
    }
    if (!std::isfinite(t) || !std::isfinite(alpha) || !std::isfinite(beta)) {
        throw ValidationError("non-finite diffusion time or coefficients");
    }
    if (t < 0.0 || t > 1.0) throw ValidationError("diffusion time outside [0, 1]");
}

Volume ZeroDenoiser::predict_noise(const DenoiseRequest& req) {
    req.validate();
    return Volume::zeros(req.x_t.dims());
}

OracleDenoiser::OracleDenoiser(Volume ground_truth) : gt_(std::move(ground_truth)) {}

Volume OracleDenoiser::predict_noise(const DenoiseRequest& req) {
    req.validate();
    if (req.x_t.dims() != gt_.dims()) {
        throw ValidationError("oracle ground truth dims " + gt_.dims().str() +
                              " do not match request dims " + req.x_t.dims().str());
    }
    require_noise_level(req);
    const auto x = req.x_t.values();
    const auto g = gt_.values();
    std::vector<float> eps(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        eps[i] = static_cast<float>((x[i] - req.alpha * g[i]) / req.beta);
    }
    return Volume(req.x_t.dims(), std::move(eps));
}

SmoothingDenoiser::SmoothingDenoiser(double sigma) : sigma_(sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw ValidationError("smoothing sigma must be positive");
    }
}

Volume SmoothingDenoiser::predict_noise(const DenoiseRequest& req) {
    req.validate();
    require_noise_level(req);
    const auto x = req.x_t.values();
    const auto blurred = gaussian_blur(x, req.x_t.dims(), sigma_);
    std::vector<float> eps(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        eps[i] = static_cast<float>((x[i] - req.alpha * blurred[i]) / req.beta);
    }
    return Volume(req.x_t.dims(), std::move(eps));
}

std::vector<float> gaussian_blur(std::span<const float> x, Dims dims, double sigma) {
    if (x.size() != dims.count()) throw ValidationError("gaussian_blur: size mismatch");
    const auto k = kernel_1d(sigma);
    std::vector<float> data(x.begin(), x.end());
    for (int axis = 0; axis < 3; ++axis) blur_axis(data, dims, axis, k);
    return data;
}

ExternalSession::ExternalSession(const std::vector<std::string>& argv, Dims shape,
                                 double timeout_s)
    : proc_(std::make_unique<Subprocess>(argv)), shape_(shape), timeout_s_(timeout_s) {
    shape_.validate();
    if (!(timeout_s > 0.0)) throw ValidationError("session timeout must be positive");
}

ExternalSession::~ExternalSession() {
    if (proc_ && proc_->running()) {
        try {
            close();
        } catch (const Error&) {
            // Destructor: the child is reaped by ~Subprocess regardless.
        }
    }
}

ExternalSession::ExternalSession(ExternalSession&&) noexcept = default;
ExternalSession& ExternalSession::operator=(ExternalSession&&) noexcept = default;

namespace {

std::chrono::milliseconds to_ms(double seconds) {
    return std::chrono::milliseconds(static_cast<long long>(seconds * 1000.0));
}

void send(Subprocess& proc, const wire::Message& msg, double timeout_s) {
    const auto bytes = wire::encode(msg);
    proc.write_all(bytes.data(), bytes.size(), to_ms(timeout_s));
}

wire::Message receive(Subprocess& proc, double timeout_s, std::uint64_t& offset) {
    const auto deadline = to_ms(timeout_s);
    auto reader = [&](std::uint8_t* dst, std::size_t n) { proc.read_exact(dst, n, deadline); };
    wire::Message msg = wire::read_message(reader, wire::Direction::response, offset);
    if (msg.header.kind == wire::Kind::error) {
        throw ProtocolError("denoiser reported error: " + msg.header.message, offset);
    }
    return msg;
}

void check_shape(const wire::Header& h, const Dims& expected, std::uint64_t offset) {
    const Dims got{h.depth, h.height, h.width};
    if (got != expected) {
        throw ProtocolError("denoiser declared shape " + got.str() + ", expected " +
                                expected.str(),
                            offset);
    }
}

}  // namespace

Volume ExternalSession::predict(const DenoiseRequest& req) {
    req.validate();
    if (!proc_ || !proc_->running()) throw ProtocolError("denoiser session is closed");
    if (req.x_t.dims() != shape_) {
        throw ValidationError("request dims " + req.x_t.dims().str() +
                              " do not match session shape " + shape_.str());
    }
    wire::Message msg;
    msg.header.kind = wire::Kind::predict;
    msg.header.t = req.t;
    msg.header.theta_deg = req.theta_deg;
    msg.header.dtheta_deg = req.dtheta_deg;
    msg.header.has_condition = req.condition != nullptr;
    msg.header.depth = shape_.depth;
    msg.header.height = shape_.height;
    msg.header.width = shape_.width;
    const auto x = req.x_t.values();
    msg.payload.assign(x.begin(), x.end());
    if (req.condition) {
        const auto c = req.condition->values();
        msg.payload.insert(msg.payload.end(), c.begin(), c.end());
    }
    send(*proc_, msg, timeout_s_);
    const std::uint64_t at = offset_;
    wire::Message resp = receive(*proc_, timeout_s_, offset_);
    if (resp.header.kind == wire::Kind::error) {
        throw ProtocolError("denoiser reported an error: " + resp.header.message, at);
    }
    if (resp.header.kind != wire::Kind::predict) {
        throw ProtocolError("expected predict response, got " +
                                std::string(wire::kind_name(resp.header.kind)),
                            at);
    }
    check_shape(resp.header, shape_, at);
    for (std::size_t i = 0; i < resp.payload.size(); ++i) {
        if (!std::isfinite(resp.payload[i])) {
            throw ProtocolError("non-finite noise estimate at element " + std::to_string(i), at);
        }
    }
    return Volume(shape_, std::move(resp.payload));
}

int ExternalSession::close() {
    if (!proc_ || !proc_->running()) return -1;
    try {
        wire::Message bye;
        bye.header.kind = wire::Kind::bye;
        send(*proc_, bye, timeout_s_);
    } catch (const ProtocolError&) {
        // Peer already gone; fall through to reaping it.
    }
    proc_->close_stdin();
    return proc_->wait(to_ms(std::min(timeout_s_, 5.0)));
}

ExternalSession open_external_session(const std::vector<std::string>& argv, Dims shape,
                                      double timeout_s) {
    ExternalSession session(argv, shape, timeout_s);
    wire::Message hello;
    hello.header.kind = wire::Kind::hello;
    hello.header.depth = shape.depth;
    hello.header.height = shape.height;
    hello.header.width = shape.width;
    send(*session.proc_, hello, timeout_s);
    const std::uint64_t at = session.offset_;
    wire::Message resp = receive(*session.proc_, timeout_s, session.offset_);
    if (resp.header.kind == wire::Kind::error) {
        throw ProtocolError("denoiser refused the handshake: " + resp.header.message, at);
    }
    if (resp.header.kind != wire::Kind::hello) {
        throw ProtocolError("expected hello response, got " +
                                std::string(wire::kind_name(resp.header.kind)),
                            at);
    }
    check_shape(resp.header, shape, at);
    return session;
}

}  // namespace latomo
