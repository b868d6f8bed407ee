#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "latomo/denoiser.hpp"
#include "latomo/error.hpp"
#include "latomo/radon.hpp"
#include "latomo/sampler.hpp"
#include "support.hpp"

using namespace latomo;
using testing::random_volume;

namespace {

std::vector<std::string> stub(const std::string& mode, const std::string& shape = "",
                              const std::string& log = "") {
    std::vector<std::string> argv{STUB_DENOISER_PATH, mode};
    if (!shape.empty() || !log.empty()) argv.push_back(shape.empty() ? "auto" : shape);
    if (!log.empty()) argv.push_back(log);
    return argv;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

}  // namespace

TEST_SUITE("denoiser") {

TEST_CASE("zero denoiser returns zeros") {
    const Volume x = random_volume({3, 4, 5}, 1);
    ZeroDenoiser z;
    const auto e = z.predict_noise({x, nullptr, 0.5, 0.7, 0.71});
    for (float v : e.values()) CHECK(v == 0.0f);
    CHECK(z.predict_noise({x, nullptr, 0.0, 1.0, 0.0}) == Volume::zeros(x.dims()));
}

TEST_CASE("oracle denoiser inverts exactly and rejects t = 0") {
    const Dims d{4, 4, 4};
    const Volume gt = random_volume(d, 2), x = random_volume(d, 3);
    OracleDenoiser o(gt);
    for (double t : {1.0, 0.7, 0.3, 0.01}) {
        const auto c = effective_coefficients(NoiseSchedule::at(ScheduleKind::cosine, t));
        const auto eps = o.predict_noise({x, nullptr, t, c.alpha, c.beta});
        const auto st = ddim_step(x, eps, c.alpha, c.beta, 1.0, 0.0);
        CHECK(testing::max_abs_diff(st.x_t0.values(), gt.values()) < 1e-6 / std::min(1.0, c.alpha));
    }
    CHECK_THROWS_AS(o.predict_noise({gt, nullptr, 0.0, 1.0, 0.0}), ValidationError);
    OracleDenoiser wrong(Volume::zeros({4, 4, 3}));
    CHECK_THROWS_AS(wrong.predict_noise({x, nullptr, 0.5, 0.7, 0.7}), ValidationError);
}

TEST_CASE("smoothing with a tiny sigma approaches (1 - alpha)/beta x") {
    const Dims d{5, 6, 7};
    const Volume x = random_volume(d, 4);
    SmoothingDenoiser s(1e-3);
    const double a = 0.6, b = 0.8;
    const auto e = s.predict_noise({x, nullptr, 0.4, a, b});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(e[i] - (1 - a) / b * x[i]) < 1e-3);
    CHECK_THROWS_AS(SmoothingDenoiser(0.0), ValidationError);
    CHECK_THROWS_AS(s.predict_noise({x, nullptr, 0.0, 1.0, 0.0}), ValidationError);
}

TEST_CASE("smoothing uses a Gaussian blur of the input") {
    // Large enough that no window reaching the impulse overhangs the boundary.
    const Dims d{15, 15, 15};
    std::vector<float> v(d.count(), 0.0f);
    v[d.index(7, 7, 7)] = 1.0f;
    const auto blurred = gaussian_blur(v, d, 1.0);
    // Separable unit-sum kernel of radius 3: the centre is g(0)^3.
    double s = 0.0;
    for (int i = -3; i <= 3; ++i) s += std::exp(-0.5 * i * i);
    const double g0 = 1.0 / s, g1 = std::exp(-0.5) / s;
    CHECK(blurred[d.index(7, 7, 7)] == doctest::Approx(g0 * g0 * g0).epsilon(1e-6));
    CHECK(blurred[d.index(8, 7, 7)] == doctest::Approx(g1 * g0 * g0).epsilon(1e-6));
    double mass = 0.0;
    for (float x : blurred) mass += x;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    // Boundary renormalisation keeps constants constant.
    const auto flat = gaussian_blur(std::vector<float>(d.count(), 2.5f), d, 2.0);
    for (float x : flat) CHECK(x == doctest::Approx(2.5f).epsilon(1e-6));
}

TEST_CASE("built-in denoisers are deterministic") {
    const Volume x = random_volume({4, 5, 6}, 5);
    SmoothingDenoiser s(1.3);
    DenoiseRequest r{x, nullptr, 0.3, 0.8, 0.6};
    CHECK(s.predict_noise(r) == s.predict_noise(r));
}

TEST_CASE("requests validate their condition shape") {
    const Volume x = random_volume({4, 5, 6}, 5);
    const Volume c = Volume::zeros({4, 5, 5});
    ZeroDenoiser z;
    CHECK_THROWS_AS(z.predict_noise({x, &c, 0.5, 0.7, 0.7}), ValidationError);
    CHECK_THROWS_AS(z.predict_noise({x, nullptr, 1.5, 0.7, 0.7}), ValidationError);
}

TEST_CASE("external session: handshake at the paper's patch shape") {
    const Dims shape{40, 128, 128};
    auto session = open_external_session(stub("echo"), shape, 10.0);
    CHECK(session.shape() == shape);
    CHECK(session.close() == 0);
}

TEST_CASE("external session: predictions round-trip and the empty condition has no payload") {
    testing::TempDir tmp;
    const Dims shape{2, 3, 4};
    const auto log = tmp / "log.txt";
    auto session = open_external_session(stub("sum", "", log.string()), shape, 10.0);
    const Volume x = random_volume(shape, 6), c = random_volume(shape, 7);
    const auto e1 = session.predict({x, nullptr, 0.75, 0.1, 0.2, 10.0, 1.0});
    CHECK(e1 == x);
    const auto e2 = session.predict({x, &c, 0.25, 0.1, 0.2, 8.0, 2.0});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(e2[i] == x[i] + c[i]);
    CHECK(session.bytes_received() > 0);
    CHECK(session.close() == 0);
    const auto lines = read_lines(log);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "kind=predict t=0.75 theta_deg=10 dtheta_deg=1 has_condition=0 floats=24");
    CHECK(lines[1] == "kind=predict t=0.25 theta_deg=8 dtheta_deg=2 has_condition=1 floats=48");
    CHECK(lines[2].rfind("kind=bye", 0) == 0);
}

TEST_CASE("external session: declared shape mismatch") {
    CHECK_THROWS_AS(open_external_session(stub("wrongshape"), {4, 4, 4}, 10.0), ProtocolError);
    CHECK_THROWS_AS(open_external_session(stub("echo", "5x4x4"), {4, 4, 4}, 10.0), ProtocolError);
}

TEST_CASE("external session: garbage magic names the offset") {
    try {
        open_external_session(stub("garbage"), {4, 4, 4}, 10.0);
        FAIL("expected a protocol error");
    } catch (const ProtocolError& e) {
        CHECK(e.offset() == 0);
        CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
    }
}

TEST_CASE("external session: timeouts, peer errors and bad replies") {
    CHECK_THROWS_AS(open_external_session(stub("hang"), {2, 2, 2}, 0.3), ProtocolError);
    CHECK_THROWS_AS(open_external_session(stub("die"), {2, 2, 2}, 5.0), ProtocolError);
    const Volume x = random_volume({2, 2, 2}, 8);
    for (const char* mode : {"error", "badresponse", "nan"}) {
        auto session = open_external_session(stub(mode), {2, 2, 2}, 5.0);
        CHECK_THROWS_AS(session.predict({x, nullptr, 0.5, 0.7, 0.7}), ProtocolError);
    }
    try {
        auto session = open_external_session(stub("error"), {2, 2, 2}, 5.0);
        session.predict({x, nullptr, 0.5, 0.7, 0.7});
    } catch (const ProtocolError& e) {
        CHECK(std::string(e.what()).find("model exploded") != std::string::npos);
    }
}

TEST_CASE("external session: spawn failure and request shape checks") {
    CHECK_THROWS_AS(open_external_session({"/nonexistent/denoiser"}, {2, 2, 2}, 5.0), Error);
    auto session = open_external_session(stub("echo"), {2, 2, 2}, 5.0);
    const Volume wrong = Volume::zeros({2, 2, 3});
    CHECK_THROWS_AS(session.predict({wrong, nullptr, 0.5, 0.7, 0.7}), ValidationError);
    CHECK(session.close() == 0);
    CHECK_THROWS_AS(session.predict({Volume::zeros({2, 2, 2}), nullptr, 0.5, 0.7, 0.7}), ProtocolError);
}

TEST_CASE("external denoiser drives a full reconstruction") {
    const Dims d{4, 3, 8};
    const AngleSpec s{6.0, 2.0, 0.0};
    const auto y = forward_project(random_volume(d, 9, 0.0f, 1.0f), s);
    ExternalDenoiser den(open_external_session(stub("zero"), d, 10.0));
    GuidanceConfig cfg;
    cfg.schedule = make_schedule(4, ScheduleKind::cosine);
    const auto a = guided_sample(y, s, 4, den, cfg);
    ZeroDenoiser z;
    const auto b = guided_sample(y, s, 4, z, cfg);
    CHECK(a == b);
    CHECK(den.session().close() == 0);
}

}
