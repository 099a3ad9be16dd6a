#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "ceg/event.hpp"
#include "ceg/rng.hpp"

namespace ceg::classical {

// lambda(t) = mu + sum_i beta * exp(-beta (t - t_i))
struct SelfExciting {
    double mu = 0.1;
    double beta = 0.1;
};

// lambda(t) = exp(mu t - alpha N_t)
struct SelfCorrecting {
    double mu = 1.0;
    double alpha = 1.0;
};

struct Box {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
    double area() const { return (x1 - x0) * (y1 - y0); }
};

// lambda(t, s) = mu + sum_i C e^{-beta(t-t_i)} / (2 pi sqrt|Sigma| (t-t_i))
//               * exp(-(s - s_i - a)^T Sigma^{-1} (s - s_i - a) / (2(t-t_i)))
// with Sigma = diag(sigma_x^2, sigma_y^2); background mu uniform over the
// domain box.
struct Etas {
    double mu = 0.1;
    double C = 0.2;
    double beta = 1.0;
    double sigma_x = 0.1;
    double sigma_y = 0.1;
    double a_x = 0.0;
    double a_y = 0.0;
    Box domain;
};

// Homogeneous Poisson; useful as a constant-intensity reference.
struct ConstantRate {
    double rate = 1.0;
};

using ClassicalModel = std::variant<SelfExciting, SelfCorrecting, Etas, ConstantRate>;

void validate_params(const ClassicalModel& model);
int model_mark_dim(const ClassicalModel& model);

// Exact conditional intensity at (t, mark) given the history prefix
// (events with time <= t; events at exactly t contribute, i.e. the
// right-continuous value). Throws if t precedes the last history event.
double intensity(const ClassicalModel& model, double t, std::span<const double> mark,
                 std::span<const Event> history);

// Time-marginal (ground) intensity: marks integrated out. Equals
// intensity() for time-only models; for ETAS the spatial kernel mass is
// the untruncated Gaussian integral C e^{-beta(t-t_i)}.
double ground_intensity(const ClassicalModel& model, double t, std::span<const Event> history);

// Closed-form integral of the ground intensity over (a, b] given the
// history of events at times <= a.
double compensator(const ClassicalModel& model, double a, double b,
                   std::span<const Event> history);

// Eq.-(3) style log-likelihood: sum of log intensities at events minus the
// compensator over [0, T).
double exact_loglik(const ClassicalModel& model, const EventSequence& seq);

// Conditional density of the next event at (t, mark) given history:
// lambda * exp(-compensator from the last event time to t).
double ground_truth_cond_pdf(const ClassicalModel& model, double t, std::span<const double> mark,
                             std::span<const Event> history);
// Time-marginal conditional density f(t | H).
double ground_truth_cond_pdf_time(const ClassicalModel& model, double t,
                                  std::span<const Event> history);

struct ThinningOptions {
    // Fixed candidate-rate upper bound. When absent, an adaptive bound is
    // used: SelfExciting mu + beta (n + 10); SelfCorrecting a lookahead
    // window bound exp(mu (t + w) - alpha n); ETAS the current ground
    // intensity (non-increasing between events).
    std::optional<double> lambda_bar;
    std::size_t max_events = 1000000;
};

// Thinning simulation per the candidate-gap / accept-reject scheme:
// candidate times via exponential(lambda_bar) gaps, accept iff
// D * lambda_bar <= lambda. Deterministic given the rng stream. Throws
// NumericError "upper bound violated at t=..." if the running intensity
// exceeds the bound.
EventSequence thinning_simulate(const ClassicalModel& model, double horizon, Rng rng,
                                const ThinningOptions& options = {});

// Unit-exponential residuals (compensator increments between consecutive
// events, plus the final censored increment omitted). Basis of the
// time-rescaling tests.
std::vector<double> rescaled_residuals(const ClassicalModel& model, const EventSequence& seq);

struct EtasFitConfig {
    double lr = 1e-2;
    int steps = 500;
    double fd_eps = 1e-5;
    int log_every = 25;
};

struct EtasFitResult {
    Etas params;
    std::vector<double> loglik_history; // checkpoints every log_every steps
};

// MLE by Adam ascent on exact_loglik over log-reparametrized positive
// parameters (gradients via central differences).
EtasFitResult fit_etas(const Dataset& data, const Etas& init, const EtasFitConfig& cfg = {});

} // namespace ceg::classical
