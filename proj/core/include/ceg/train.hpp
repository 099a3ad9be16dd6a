#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ceg/autodiff.hpp"
#include "ceg/event.hpp"
#include "ceg/nets.hpp"
#include "ceg/rng.hpp"

namespace ceg::train {

enum class Method { kKde, kCvae };

struct TrainConfig {
    Method method = Method::kKde;
    int epochs = 50;
    double lr = 1e-3;
    int batch_size = 32;       // sequences per step
    int sample_count = 100;    // L: generated samples per event (KDE)
    int knn_k = 0;             // 0 = ceil(sqrt(L))
    std::uint64_t seed = 0;
    double clip_norm = 5.0;    // global gradient norm
    double sigma_obs = 0.1;    // CVAE reconstruction std, standardized units
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0; // negative mean log-lik / negative ELBO per event
    double heldout = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
};

// Closed-form KL between diagonal Gaussians, summed over dimensions.
double gaussian_kl(std::span<const double> mu_q, std::span<const double> logvar_q,
                   std::span<const double> mu_p, std::span<const double> logvar_p);

// Single-sample ELBO for one event given its history embedding and the
// reparametrization noise: -KL(q || p) + log N(x; g(z, h), sigma_obs^2 I)
// in standardized coordinates with the Jacobian back to raw units.
double elbo_value(const CvaeNets& nets, const CegModel& model, double gap,
                  std::span<const double> mark, std::span<const double> h,
                  std::span<const double> eps, double sigma_obs);

struct KdeLossOptions {
    int sample_count = 100;
    int knn_k = 0;
    // When set, per-event bandwidth vectors override the self-tuned kNN
    // computation (used by finite-difference gradient checks, where the
    // bandwidths must be held constant).
    const std::vector<std::vector<double>>* frozen_sigmas = nullptr;
};

// Tape construction for one sequence: sum over events of -log f_kde(x_i|H),
// gradients flowing through the generated sample positions (bandwidths are
// stop-gradient constants). The density is evaluated in log space by
// log-sum-exp, so events far from the cloud keep a usable gradient.
// `bound` must come from bind_params on model.params.
ad::Var build_kde_sequence_loss(ad::Tape& tape, const std::vector<ad::Var>& bound,
                                const CegModel& model, const EventSequence& seq,
                                const KdeLossOptions& options, Rng rng);

// Sum over events of -ELBO.
ad::Var build_cvae_sequence_loss(ad::Tape& tape, const std::vector<ad::Var>& bound_model,
                                 const std::vector<ad::Var>& bound_cvae, const CegModel& model,
                                 const CvaeNets& nets, const EventSequence& seq,
                                 double sigma_obs, Rng rng);

// Negative mean log-likelihood per event under the KDE objective (no
// gradients); the rng stream must match the training convention for
// comparable values.
double kde_loss(const CegModel& model, const Dataset& data, const KdeLossOptions& options,
                Rng rng);

// Mean per-event ELBO over a dataset (single eps sample per event).
double elbo_mean(const CegModel& model, const CvaeNets& nets, const Dataset& data,
                 double sigma_obs, Rng rng);

// Fills model.standardize from the training split (gap scale and mark
// moments).
void fit_standardization(CegModel& model, const Dataset& data);

// Algorithm: per mini-batch of sequences, generate clouds, estimate each
// event's conditional PDF by self-tuned reflected KDE, and ascend the mean
// log-likelihood with Adam. Deterministic given cfg.seed.
TrainResult train_nonparametric(CegModel& model, const Dataset& train_data,
                                const Dataset& heldout, const TrainConfig& cfg);

// Variational path: reparametrized ELBO ascent over generator, encoder,
// prior, and history encoder jointly. Sets model.sample_z_from_prior.
TrainResult train_variational(CegModel& model, CvaeNets& nets, const Dataset& train_data,
                              const Dataset& heldout, const TrainConfig& cfg);

// CSV: epoch, train loss, held-out loss/ELBO, wall seconds.
void write_training_log(const std::string& path, const std::vector<EpochLog>& log);

} // namespace ceg::train
