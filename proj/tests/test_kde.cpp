#include <doctest.h>

#include <cmath>
#include <vector>

#include "ceg/errors.hpp"
#include "ceg/kde.hpp"
#include "ceg/rng.hpp"
#include "helpers.hpp"

using namespace ceg;
using namespace ceg::kde;

TEST_CASE("knn bandwidths by brute-force oracle") {
    const std::vector<std::vector<double>> samples{{0.0}, {1.0}, {3.0}};
    const auto sigmas = knn_bandwidths(samples, 1);
    CHECK(sigmas[0] == doctest::Approx(kBandwidthScale * 1.0));
    CHECK(sigmas[1] == doctest::Approx(kBandwidthScale * 1.0));
    CHECK(sigmas[2] == doctest::Approx(kBandwidthScale * 2.0));
}

TEST_CASE("duplicate points fall back to the bandwidth floor") {
    const std::vector<std::vector<double>> samples{{0.5}, {0.5}, {2.0}};
    const auto sigmas = knn_bandwidths(samples, 1);
    CHECK(sigmas[0] == kBandwidthFloor);
    CHECK(sigmas[1] == kBandwidthFloor);
}

TEST_CASE("scaling samples scales pre-floor bandwidths") {
    Rng rng(3);
    std::vector<std::vector<double>> samples;
    for (int i = 0; i < 30; ++i) samples.push_back({rng.uniform(), rng.normal()});
    const double c = 3.5;
    auto scaled = samples;
    for (auto& s : scaled)
        for (double& v : s) v *= c;
    const auto a = knn_bandwidths(samples, 5);
    const auto b = knn_bandwidths(scaled, 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(b[i] == doctest::Approx(c * a[i]).epsilon(1e-12));
    }
}

TEST_CASE("knn bandwidths reject k out of range") {
    const std::vector<std::vector<double>> samples{{0.0}, {1.0}};
    CHECK_THROWS_AS((void)knn_bandwidths(samples, 2), ValidationError);
    CHECK_THROWS_AS((void)knn_bandwidths(samples, 0), ValidationError);
}

TEST_CASE("reflection doubles the boundary kernel value") {
    const auto cloud = SampleCloud::with_bandwidths({{0.0}}, {1.0});
    const double f0 = cond_pdf_kde(std::vector<double>{0.0}, cloud);
    CHECK(f0 == doctest::Approx(2.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-12));
    CHECK(f0 == doctest::Approx(0.7978846).epsilon(1e-6));
}

TEST_CASE("density far from every sample is negligible") {
    const auto cloud = SampleCloud::with_bandwidths({{1.0}, {2.0}}, {0.5, 0.5});
    CHECK(cond_pdf_kde(std::vector<double>{20.0}, cloud) < 1e-20);
}

TEST_CASE("negative query dt is rejected") {
    const auto cloud = SampleCloud::with_bandwidths({{1.0}}, {1.0});
    CHECK_THROWS_AS((void)cond_pdf_kde(std::vector<double>{-0.1}, cloud), ValidationError);
    CHECK_THROWS_AS((void)cdf_time_kde(-0.1, cloud), ValidationError);
}

TEST_CASE("time-only density integrates to one") {
    Rng rng(11);
    std::vector<std::vector<double>> samples;
    for (int i = 0; i < 200; ++i) samples.push_back({rng.exponential(1.0)});
    const auto cloud = SampleCloud::self_tuned(samples);
    const double mass = testutil::simpson(
        [&](double t) { return cond_pdf_kde(std::vector<double>{t}, cloud); }, 0.0, 60.0,
        40000);
    CHECK(mass > 0.999);
    CHECK(mass < 1.0 + 1e-3);
}

TEST_CASE("cdf oracle for a single sample") {
    const auto cloud = SampleCloud::with_bandwidths({{1.0}}, {1.0});
    const double f = cdf_time_kde(1.0, cloud);
    // Phi(0) - Phi(-1) + Phi(2) - Phi(1)
    CHECK(f == doctest::Approx(0.477250).epsilon(1e-5));
}

TEST_CASE("cdf endpoints and monotonicity") {
    Rng rng(13);
    std::vector<std::vector<double>> samples;
    for (int i = 0; i < 50; ++i) samples.push_back({rng.exponential(0.7)});
    const auto cloud = SampleCloud::self_tuned(samples);
    CHECK(cdf_time_kde(0.0, cloud) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(cdf_time_kde(200.0, cloud) == doctest::Approx(1.0).epsilon(1e-6));
    double prev = 0.0;
    for (double t = 0.0; t <= 10.0; t += 0.05) {
        const double f = cdf_time_kde(t, cloud);
        CHECK(f >= prev - 1e-14);
        prev = f;
    }
}

TEST_CASE("pdf equals the numerical derivative of the cdf") {
    Rng rng(17);
    std::vector<std::vector<double>> samples;
    for (int i = 0; i < 100; ++i) samples.push_back({rng.exponential(1.0)});
    const auto cloud = SampleCloud::self_tuned(samples);
    const double h = 1e-4;
    for (double t : {0.2, 0.7, 1.3, 2.9}) {
        const double deriv = (cdf_time_kde(t + h, cloud) - cdf_time_kde(t - h, cloud)) /
                             (2.0 * h);
        const double pdf = cond_pdf_kde(std::vector<double>{t}, cloud);
        CHECK(std::abs(pdf - deriv) < 1e-5);
    }
}

TEST_CASE("kde recovers the exponential density") {
    Rng rng(19);
    const int n = 2000;
    std::vector<std::vector<double>> samples;
    for (int i = 0; i < n; ++i) samples.push_back({rng.exponential(1.0)});
    const auto cloud = SampleCloud::self_tuned(samples); // k = ceil(sqrt(L))
    double mae = 0.0;
    const int grid = 100;
    for (int g = 0; g < grid; ++g) {
        const double t = 5.0 * g / (grid - 1);
        const double est = cond_pdf_kde(std::vector<double>{t}, cloud);
        mae += std::abs(est - std::exp(-t));
    }
    mae /= grid;
    CHECK(mae < 0.02);
}

TEST_CASE("disabling reflection degrades the boundary estimate") {
    Rng rng(23);
    std::vector<std::vector<double>> samples;
    for (int i = 0; i < 2000; ++i) samples.push_back({rng.exponential(1.0)});
    auto reflected = SampleCloud::self_tuned(samples);
    auto plain = reflected;
    plain.reflect = false;
    const double f_ref = cond_pdf_kde(std::vector<double>{0.0}, reflected);
    const double f_plain = cond_pdf_kde(std::vector<double>{0.0}, plain);
    CHECK(f_ref / f_plain >= 1.8);
    CHECK(std::abs(f_ref - 1.0) < 0.15); // true density at 0 is 1
}

TEST_CASE("self-tuned cloud standardizes marks but keeps the time origin") {
    Rng rng(29);
    std::vector<std::vector<double>> samples;
    for (int i = 0; i < 100; ++i) {
        samples.push_back({rng.exponential(1.0), 100.0 + 5.0 * rng.normal()});
    }
    const auto cloud = SampleCloud::self_tuned(samples);
    CHECK(cloud.shift[0] == 0.0);
    CHECK(cloud.shift[1] == doctest::Approx(100.0).epsilon(0.05));
    CHECK(cloud.scale[1] == doctest::Approx(5.0).epsilon(0.3));
    // Joint density at a representative point is finite and positive.
    const double f = cond_pdf_kde(std::vector<double>{1.0, 100.0}, cloud);
    CHECK(f > 0.0);
    CHECK(std::isfinite(f));
}
