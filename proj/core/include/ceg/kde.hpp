#pragma once

#include <span>
#include <vector>

namespace ceg::kde {

inline constexpr double kBandwidthFloor = 1e-4;

// Raw k-th neighbor distances underestimate a good kernel width by a wide
// margin (they scale like k/L, not like the n^(-1/5) smoothing optimum);
// a fixed calibration factor keeps the adaptive shape while bringing the
// overall scale close to the MAE-optimal choice on smooth targets.
inline constexpr double kBandwidthScale = 5.0;

// Per-sample bandwidths: distance from each sample to its k-th nearest
// other sample (Euclidean over all coordinates), times scale, floored.
// Requires k >= 1 and k < L. Density queries want the calibrated scale;
// the training loss uses the raw distances (scale 1) so the generator is
// not pushed to deconvolve a wide kernel.
std::vector<double> knn_bandwidths(const std::vector<std::vector<double>>& samples, int k,
                                   double floor = kBandwidthFloor,
                                   double scale = kBandwidthScale);

// A generated next-event cloud with per-sample Gaussian bandwidths. The
// kernel is a product Gaussian; the time coordinate (index 0) uses the
// reflected kernel v*(x) = v(x - x~) + v(-x - x~) so no mass leaks below
// the dt = 0 boundary.
//
// Coordinates may be standardized per dimension: the time axis is scaled
// only (the boundary must stay at 0), marks are shifted and scaled;
// densities are Jacobian-corrected back to the original units.
struct SampleCloud {
    std::vector<std::vector<double>> samples; // L rows of (dt, mark...)
    std::vector<double> sigmas;               // one scalar per sample
    std::vector<double> shift;                // shift[0] == 0 always
    std::vector<double> scale;
    int k = 0;
    bool reflect = true;

    std::size_t size() const { return samples.size(); }
    std::size_t dim() const { return samples.empty() ? 0 : samples.front().size(); }

    // Explicit bandwidths, identity standardization.
    static SampleCloud with_bandwidths(std::vector<std::vector<double>> samples,
                                       std::vector<double> sigmas);
    // Self-tuned: standardize per dimension, then kNN bandwidths with the
    // given k (k <= 0 picks ceil(sqrt(L))). Requires L >= 2.
    static SampleCloud self_tuned(std::vector<std::vector<double>> samples, int k = 0,
                                  double floor = kBandwidthFloor);
};

// (1/L) sum_j reflected-time x plain-mark product Gaussian at the query
// (dt, mark...). Query dt must be >= 0.
double cond_pdf_kde(std::span<const double> query, const SampleCloud& cloud);

// Closed-form time-marginal CDF of the reflected mixture; monotone, F(0)=0,
// F(inf)=1.
double cdf_time_kde(double t_query, const SampleCloud& cloud);

// Standard normal pdf / cdf helpers shared with the evaluators.
double normal_pdf(double x);
double normal_cdf(double x);

} // namespace ceg::kde
