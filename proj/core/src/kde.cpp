#include "ceg/kde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ceg/errors.hpp"

namespace ceg::kde {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014327;
} // namespace

double normal_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

std::vector<double> knn_bandwidths(const std::vector<std::vector<double>>& samples, int k,
                                   double floor, double scale) {
    const std::size_t n = samples.size();
    if (k < 1 || static_cast<std::size_t>(k) >= n) {
        throw ValidationError("knn_bandwidths: need 1 <= k < L (k=" + std::to_string(k) +
                              ", L=" + std::to_string(n) + ")");
    }
    std::vector<double> sigmas(n);
    std::vector<double> dists(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t w = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == j) continue;
            double d2 = 0.0;
            for (std::size_t d = 0; d < samples[j].size(); ++d) {
                const double diff = samples[j][d] - samples[i][d];
                d2 += diff * diff;
            }
            dists[w++] = d2;
        }
        std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
        sigmas[j] = std::max(scale * std::sqrt(dists[k - 1]), floor);
    }
    return sigmas;
}

SampleCloud SampleCloud::with_bandwidths(std::vector<std::vector<double>> samples,
                                         std::vector<double> sigmas) {
    if (samples.size() != sigmas.size()) {
        throw ValidationError("SampleCloud: sample/bandwidth count mismatch");
    }
    SampleCloud cloud;
    const std::size_t dim = samples.empty() ? 1 : samples.front().size();
    cloud.samples = std::move(samples);
    cloud.sigmas = std::move(sigmas);
    cloud.shift.assign(dim, 0.0);
    cloud.scale.assign(dim, 1.0);
    return cloud;
}

SampleCloud SampleCloud::self_tuned(std::vector<std::vector<double>> samples, int k,
                                    double floor) {
    const std::size_t n = samples.size();
    if (n < 2) throw ValidationError("SampleCloud::self_tuned: need at least 2 samples");
    const std::size_t dim = samples.front().size();
    if (k <= 0) k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    k = std::min<int>(k, static_cast<int>(n) - 1);

    SampleCloud cloud;
    cloud.k = k;
    cloud.shift.assign(dim, 0.0);
    cloud.scale.assign(dim, 1.0);
    for (std::size_t d = 0; d < dim; ++d) {
        double mean = 0.0;
        for (const auto& s : samples) mean += s[d];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& s : samples) var += (s[d] - mean) * (s[d] - mean);
        var /= static_cast<double>(n);
        const double sd = std::sqrt(var);
        // Time axis keeps shift 0 so the reflection boundary stays at 0.
        if (d > 0) cloud.shift[d] = mean;
        cloud.scale[d] = sd > 1e-12 ? sd : 1.0;
    }
    for (auto& s : samples) {
        for (std::size_t d = 0; d < dim; ++d) s[d] = (s[d] - cloud.shift[d]) / cloud.scale[d];
    }
    cloud.sigmas = knn_bandwidths(samples, k, floor);
    cloud.samples = std::move(samples); // stored in standardized coordinates
    return cloud;
}

double cond_pdf_kde(std::span<const double> query, const SampleCloud& cloud) {
    if (query.empty() || query[0] < 0.0) {
        throw ValidationError("cond_pdf_kde: query dt must be >= 0");
    }
    const std::size_t n = cloud.size();
    if (n == 0) return 0.0;
    const std::size_t dim = query.size();

    std::vector<double> q(dim);
    for (std::size_t d = 0; d < dim; ++d) q[d] = (query[d] - cloud.shift[d]) / cloud.scale[d];

    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double sigma = cloud.sigmas[j];
        const auto& s = cloud.samples[j];
        double kernel = normal_pdf((q[0] - s[0]) / sigma);
        if (cloud.reflect) kernel += normal_pdf((q[0] + s[0]) / sigma);
        kernel /= sigma;
        for (std::size_t d = 1; d < dim; ++d) {
            kernel *= normal_pdf((q[d] - s[d]) / sigma) / sigma;
        }
        total += kernel;
    }
    double density = total / static_cast<double>(n);
    for (std::size_t d = 0; d < dim; ++d) density /= cloud.scale[d];
    return density;
}

double cdf_time_kde(double t_query, const SampleCloud& cloud) {
    if (t_query < 0.0) throw ValidationError("cdf_time_kde: t must be >= 0");
    const std::size_t n = cloud.size();
    if (n == 0) return 0.0;
    const double t = t_query / cloud.scale[0];

    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double sigma = cloud.sigmas[j];
        const double s0 = cloud.samples[j][0];
        double f = normal_cdf((t - s0) / sigma) - normal_cdf(-s0 / sigma);
        if (cloud.reflect) f += normal_cdf((t + s0) / sigma) - normal_cdf(s0 / sigma);
        total += f;
    }
    return std::clamp(total / static_cast<double>(n), 0.0, 1.0);
}

} // namespace ceg::kde
