#include <doctest.h>

#include <cmath>
#include <limits>

#include "latomo/error.hpp"
#include "latomo/metrics.hpp"
#include "support.hpp"

using namespace latomo;

namespace {

Volume affine(const Volume& v, double a, double b) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(a * v[i] + b);
    return Volume(v.dims(), std::move(out));
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("quantiles use linear interpolation at p (n - 1)") {
    const std::vector<float> v{4, 1, 3, 2};
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 4.0);
    CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
    CHECK(quantile(v, 0.75) == doctest::Approx(3.25));
    const auto r = testing::random_floats(1001, 31);
    for (double p : {0.1, 0.25, 0.5, 0.75, 0.9})
        CHECK(quantile(r, p) == doctest::Approx(testing::oracle::quantile(r, p)).epsilon(1e-12));
    CHECK_THROWS_AS(quantile(std::vector<float>{}, 0.5), ValidationError);
    CHECK_THROWS_AS(quantile(v, 1.5), ValidationError);
}

TEST_CASE("quartile alignment inverts an affine map") {
    const Volume ref = testing::random_volume({6, 7, 8}, 32, 0.0f, 1.0f);
    const auto aligned = align_quartiles(affine(ref, 2.0, 1.0), ref);
    CHECK(testing::max_abs_diff(aligned.values(), ref.values()) < 1e-6);
    const auto id = quartile_alignment(ref, ref);
    CHECK(id.scale == 1.0);
    CHECK(id.offset == 0.0);
}

TEST_CASE("aligned quartiles match the reference") {
    const Volume ref = testing::random_volume({6, 7, 8}, 33, 0.0f, 1.0f);
    const Volume rec = testing::random_volume({6, 7, 8}, 34, -3.0f, 5.0f);
    const auto a = align_quartiles(rec, ref);
    using testing::oracle::quantile;
    CHECK(std::abs(quantile(a.values(), 0.25) - quantile(ref.values(), 0.25)) < 1e-6);
    CHECK(std::abs(quantile(a.values(), 0.75) - quantile(ref.values(), 0.75)) < 1e-6);
    const auto twice = align_quartiles(a, ref);
    CHECK(testing::max_abs_diff(twice.values(), a.values()) < 1e-9);
}

TEST_CASE("degenerate reconstructions cannot be aligned") {
    const Volume ref = testing::random_volume({4, 4, 4}, 35);
    CHECK_THROWS_AS(align_quartiles(Volume::filled({4, 4, 4}, 2.0f), ref), ValidationError);
}

TEST_CASE("aligned evaluation is invariant to positive affine maps") {
    const Volume ref = testing::random_volume({8, 9, 10}, 36, 0.0f, 1.0f);
    const Volume rec = testing::random_volume({8, 9, 10}, 37, 0.0f, 1.0f);
    const auto base = evaluate(rec, ref, true);
    for (auto [a, b] : {std::pair{3.0, -2.0}, std::pair{0.5, 0.25}, std::pair{1.0, 0.5}}) {
        const auto r = evaluate(affine(rec, a, b), ref, true);
        CHECK(std::abs(r.rmse - base.rmse) < 1e-6);
        CHECK(std::abs(r.psnr - base.psnr) < 1e-6);
        CHECK(std::abs(r.ssim - base.ssim) < 1e-6);
    }
}

TEST_CASE("identity and offset cases") {
    Volume ref = testing::random_volume({8, 8, 8}, 38, 0.0f, 1.0f);
    // Pin the dynamic range to exactly 1.
    auto v = std::vector<float>(ref.values().begin(), ref.values().end());
    v[0] = 0.0f;
    v[1] = 1.0f;
    ref = Volume(ref.dims(), v);
    const auto same = evaluate(ref, ref, false);
    CHECK(same.rmse == 0.0);
    CHECK(same.psnr == std::numeric_limits<double>::infinity());
    CHECK(same.ssim == 1.0);
    const auto aligned_same = evaluate(ref, ref, true);
    CHECK(aligned_same.rmse == 0.0);
    CHECK(aligned_same.ssim == 1.0);

    for (auto& x : v) x += 0.1f;
    const Volume off(ref.dims(), v);
    const auto r = evaluate(off, ref, false);
    CHECK(r.rmse == doctest::Approx(0.1).epsilon(1e-5));
    CHECK(r.psnr == doctest::Approx(20.0).epsilon(1e-5));
    CHECK(evaluate(off, ref, true).rmse < 1e-6);
    CHECK(psnr(0.0, 1.0) == std::numeric_limits<double>::infinity());
    CHECK(psnr(0.01, 1.0) == doctest::Approx(40.0));
}

TEST_CASE("SSIM is symmetric and matches a direct window oracle") {
    const Volume a = testing::random_volume({9, 10, 11}, 39, 0.0f, 1.0f);
    std::vector<float> noisy(a.values().begin(), a.values().end());
    const auto n = testing::random_floats(noisy.size(), 40, -0.2f, 0.2f);
    for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] += n[i];
    const Volume b(a.dims(), noisy);
    const double s = ssim(a, b, 1.0);
    CHECK(s == doctest::Approx(ssim(b, a, 1.0)).epsilon(1e-12));
    CHECK(s < 1.0);
    CHECK(s == doctest::Approx(testing::oracle::ssim(a, b, 1.0)).epsilon(1e-9));
    // A short axis shrinks the window.
    const Volume c = testing::random_volume({3, 12, 12}, 41, 0.0f, 1.0f);
    const Volume d = testing::random_volume({3, 12, 12}, 42, 0.0f, 1.0f);
    CHECK(ssim(c, d, 1.0) == doctest::Approx(testing::oracle::ssim(c, d, 1.0)).epsilon(1e-9));
}

TEST_CASE("evaluation errors") {
    const Volume a = testing::random_volume({4, 4, 4}, 43);
    CHECK_THROWS_AS(evaluate(a, testing::random_volume({4, 4, 5}, 43), false), ValidationError);
    CHECK_THROWS_AS(evaluate(a, Volume::filled({4, 4, 4}, 1.0f), false), ValidationError);
    CHECK_THROWS_AS(ssim(a, a, 0.0), ValidationError);
}

TEST_CASE("report formats") {
    MetricReport r{0.5, 6.0205999132796242, 0.25, true};
    CHECK(r.to_text() == "rmse=0.5\npsnr=6.020599913279624\nssim=0.25\naligned=1\n");
    CHECK(MetricReport::manifest_header() == "recon,reference,rmse,psnr,ssim,aligned");
    CHECK(r.manifest_row("a", "b") == "a,b,0.5,6.020599913279624,0.25,1");
    MetricReport inf{0.0, std::numeric_limits<double>::infinity(), 1.0, false};
    CHECK(inf.to_text().find("psnr=inf") != std::string::npos);
}

}
