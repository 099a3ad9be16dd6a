#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ceg/autodiff.hpp"
#include "ceg/event.hpp"
#include "ceg/rng.hpp"

namespace ceg {

// Named parameter arrays with matching gradient buffers.
struct ParamStore {
    std::vector<std::string> names;
    std::vector<ad::Array> values;
    std::vector<ad::Array> grads;

    ad::Array& add(const std::string& name, std::size_t rows, std::size_t cols);
    int index_of(const std::string& name) const; // -1 if absent
    std::size_t count() const { return values.size(); }
    void zero_grads();
    double grad_norm() const;
    void scale_grads(double c);
};

// Per-dimension standardization applied to LSTM inputs and generator
// outputs. Time is scaled only (the gap support boundary at 0 must stay
// at 0); marks are shifted and scaled.
struct Standardization {
    double gap_scale = 1.0;
    std::vector<double> mark_mean;
    std::vector<double> mark_std;
};

// Generator g + history encoder psi.
//
// Generator: MLP (noise_dim + hidden_dim) -> gen_hidden -> gen_hidden ->
// (1 + mark_dim), softplus hidden activations, linear output, softplus on
// the time head so generated gaps stay positive. Encoder: single-cell LSTM over (gap, mark) features, hidden
// size hidden_dim, h0 = 0.
struct CegModel {
    int noise_dim = 16;
    int hidden_dim = 64;
    int mark_dim = 0;
    int gen_hidden = 32;
    double dt_floor = 1e-6;
    // After variational training, generation samples z from the prior net
    // instead of N(0, I).
    bool sample_z_from_prior = false;
    Standardization standardize;
    std::optional<MarkBounds> mark_bounds;
    ParamStore params;
};

struct LstmState {
    std::vector<double> h;
    std::vector<double> c;
};

// Encoder / prior nets for variational training. Both map to
// (mu, log diag Sigma), each of length noise_dim.
struct CvaeNets {
    int noise_dim = 16;
    int hidden = 64;
    ParamStore params;
};

// Adam with bias correction. The caller owns the loss sign convention
// (the trainers minimize negative log-likelihood / negative ELBO).
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<ad::Array> m;
    std::vector<ad::Array> v;

    static AdamState for_params(const ParamStore& params, double lr);
};

// Glorot-uniform MLP weights; LSTM forget-gate bias 1.
CegModel init_ceg_model(int noise_dim, int hidden_dim, int mark_dim, std::uint64_t seed);
CvaeNets init_cvae_nets(int noise_dim, int hidden_dim, int mark_dim, std::uint64_t seed);

// Generator forward in raw units: dt = max(softplus(time head) * gap_scale,
// dt_floor); marks de-standardized and clamped to mark_bounds if declared.
struct GeneratedEvent {
    double dt = 0.0;
    std::vector<double> mark;
};
GeneratedEvent generator_forward(const CegModel& model, std::span<const double> z,
                                 std::span<const double> h);

// Pre-softplus time-head output for one noise draw with zero history; the
// trainers use it to moment-match the initial gap distribution to the data.
double generator_time_preact(const CegModel& model, std::span<const double> z);

LstmState lstm_zero_state(const CegModel& model);
// One LSTM cell update on an event encoded as (inter-event gap, mark).
LstmState lstm_step(const CegModel& model, double gap, std::span<const double> mark,
                    const LstmState& state);
// Folds lstm_step over a strictly increasing event prefix; empty prefix
// returns the zero state.
LstmState encode_history(const CegModel& model, std::span<const Event> prefix);

// (mu, logvar) heads of the encoder / prior nets.
struct GaussianParams {
    std::vector<double> mu;
    std::vector<double> logvar;
};
GaussianParams encoder_forward(const CvaeNets& nets, const CegModel& model, double gap,
                               std::span<const double> mark, std::span<const double> h);
GaussianParams prior_forward(const CvaeNets& nets, std::span<const double> h);

// z = mu + exp(logvar / 2) .* eps
std::vector<double> reparam_sample(const GaussianParams& gp, std::span<const double> eps);

// In-place Adam update of every parameter from its gradient buffer.
// Throws NumericError naming the parameter on non-finite gradients.
void adam_step(ParamStore& params, AdamState& state);

// --- Tape-building blocks shared by the trainers. ---

// Leaf vars for every parameter, in store order.
std::vector<ad::Var> bind_params(ad::Tape& tape, const ParamStore& params);
// Accumulates tape gradients of bound parameter leaves back into the store.
void accumulate_grads(const ad::Tape& tape, const std::vector<ad::Var>& bound,
                      ParamStore& params);

// Batched generator forward on the tape: Z is (L x noise_dim), h a hidden
// vector var; returns the (L x (1 + mark_dim)) output with the ReLU time
// head applied, columns in standardized units.
ad::Var generator_forward_tape(ad::Tape& tape, const std::vector<ad::Var>& p,
                               const CegModel& model, ad::Var z_matrix, ad::Var h);
// Single LSTM step on the tape over standardized features x (1 + mark_dim).
std::pair<ad::Var, ad::Var> lstm_step_tape(ad::Tape& tape, const std::vector<ad::Var>& p,
                                           const CegModel& model, ad::Var x, ad::Var h,
                                           ad::Var c);
// MLP with softplus hidden layer for the CVAE heads; returns (mu, logvar).
std::pair<ad::Var, ad::Var> encoder_forward_tape(ad::Tape& tape, const std::vector<ad::Var>& p,
                                                 const CvaeNets& nets, ad::Var x, ad::Var h);
std::pair<ad::Var, ad::Var> prior_forward_tape(ad::Tape& tape, const std::vector<ad::Var>& p,
                                               const CvaeNets& nets, ad::Var h);

// Standardized LSTM input features for an event gap/mark.
std::vector<double> event_features(const CegModel& model, double gap,
                                   std::span<const double> mark);

} // namespace ceg
