#include "ceg/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "ceg/dataset_io.hpp"
#include "ceg/errors.hpp"
#include "ceg/kde.hpp"

namespace ceg::train {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

double log_jacobian(const CegModel& model) {
    double lj = std::log(model.standardize.gap_scale);
    for (double s : model.standardize.mark_std) lj += std::log(s);
    return lj;
}

std::vector<double> sequence_gaps(const EventSequence& seq) {
    std::vector<double> gaps(seq.events.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        gaps[i] = seq.events[i].time - prev;
        prev = seq.events[i].time;
    }
    return gaps;
}

int effective_k(int knn_k, int sample_count) {
    if (knn_k > 0) return std::min(knn_k, sample_count - 1);
    return std::min(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(sample_count)))),
                    sample_count - 1);
}

} // namespace

double gaussian_kl(std::span<const double> mu_q, std::span<const double> logvar_q,
                   std::span<const double> mu_p, std::span<const double> logvar_p) {
    if (mu_q.size() != logvar_q.size() || mu_q.size() != mu_p.size() ||
        mu_q.size() != logvar_p.size()) {
        throw ValidationError("gaussian_kl: length mismatch");
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < mu_q.size(); ++i) {
        const double dmu = mu_q[i] - mu_p[i];
        kl += std::exp(logvar_q[i] - logvar_p[i]) + dmu * dmu * std::exp(-logvar_p[i]) - 1.0 +
              logvar_p[i] - logvar_q[i];
    }
    return 0.5 * kl;
}

double elbo_value(const CvaeNets& nets, const CegModel& model, double gap,
                  std::span<const double> mark, std::span<const double> h,
                  std::span<const double> eps, double sigma_obs) {
    const GaussianParams q = encoder_forward(nets, model, gap, mark, h);
    const GaussianParams p = prior_forward(nets, h);
    const double kl = gaussian_kl(q.mu, q.logvar, p.mu, p.logvar);

    const auto z = reparam_sample(q, eps);
    // Decode, then compare in standardized coordinates.
    const GeneratedEvent decoded = generator_forward(model, z, h);
    const auto x_std = event_features(model, gap, mark);
    std::vector<double> y_std(x_std.size());
    y_std[0] = decoded.dt / model.standardize.gap_scale;
    for (int d = 0; d < model.mark_dim; ++d) {
        y_std[1 + d] =
            (decoded.mark[d] - model.standardize.mark_mean[d]) / model.standardize.mark_std[d];
    }
    const double dim = static_cast<double>(x_std.size());
    double recon = -0.5 * dim * (kLog2Pi + 2.0 * std::log(sigma_obs));
    for (std::size_t d = 0; d < x_std.size(); ++d) {
        const double diff = x_std[d] - y_std[d];
        recon -= diff * diff / (2.0 * sigma_obs * sigma_obs);
    }
    recon -= log_jacobian(model);
    return recon - kl;
}

ad::Var build_kde_sequence_loss(ad::Tape& tape, const std::vector<ad::Var>& bound,
                                const CegModel& model, const EventSequence& seq,
                                const KdeLossOptions& options, Rng rng) {
    if (seq.empty()) throw ValidationError("kde loss: sequence must be non-empty");
    const int L = options.sample_count;
    if (L < 2 && !options.frozen_sigmas) throw ValidationError("kde loss: L must be >= 2");
    if (L < 1) throw ValidationError("kde loss: L must be >= 1");
    const int k = effective_k(options.knn_k, L);
    const int dm = model.mark_dim;
    const double lj = log_jacobian(model);

    ad::Var h = tape.leaf(ad::Array(model.hidden_dim, 1));
    ad::Var c = tape.leaf(ad::Array(model.hidden_dim, 1));
    ad::Var loss = tape.leaf(ad::Array::scalar(0.0));

    const auto gaps = sequence_gaps(seq);
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        // Generated cloud for this history.
        ad::Array z(L, model.noise_dim);
        for (double& v : z.data) v = rng.normal();
        ad::Var y = generator_forward_tape(tape, bound, model, tape.leaf(std::move(z)), h);

        // Bandwidths from the current sample values (stop-gradient).
        std::vector<double> sigmas;
        if (options.frozen_sigmas) {
            sigmas = (*options.frozen_sigmas)[i];
        } else {
            const ad::Array& yv = tape.value(y);
            std::vector<std::vector<double>> pts(L, std::vector<double>(1 + dm));
            for (int l = 0; l < L; ++l)
                for (int d = 0; d <= dm; ++d) pts[l][d] = yv(l, d);
            // Raw kNN distances (scale 1): a wide training kernel would
            // push the generator to an under-dispersed, deconvolved law.
            sigmas = kde::knn_bandwidths(pts, k, kde::kBandwidthFloor, 1.0);
        }

        // Observed event in standardized coordinates.
        const auto obs = event_features(model, gaps[i], seq.events[i].mark);

        // Log-kernel exponents for the reflected Gaussian on the time
        // column; the density is assembled by log-sum-exp over 2L terms so
        // a cloud far from the event still yields a finite, informative
        // gradient.
        ad::Var s0 = tape.slice_cols(y, 0, 1);
        ad::Array inv2s2(L, 1);
        for (int l = 0; l < L; ++l) inv2s2.data[l] = -0.5 / (sigmas[l] * sigmas[l]);
        ad::Var u_minus = tape.add_const(tape.scale(s0, -1.0), obs[0]);
        ad::Var a_minus = tape.cmul(tape.square(u_minus), inv2s2);
        ad::Var u_plus = tape.add_const(s0, obs[0]);
        ad::Var a_plus = tape.cmul(tape.square(u_plus), inv2s2);

        if (dm > 0) {
            ad::Var marks = tape.slice_cols(y, 1, 1 + dm);
            ad::Array obs_mat(L, dm);
            for (int l = 0; l < L; ++l)
                for (int d = 0; d < dm; ++d) obs_mat(l, d) = obs[1 + d];
            ad::Var diff = tape.cadd(tape.scale(marks, -1.0), std::move(obs_mat));
            ad::Array w(L, dm);
            for (int l = 0; l < L; ++l)
                for (int d = 0; d < dm; ++d) w(l, d) = -0.5 / (sigmas[l] * sigmas[l]);
            ad::Var expo =
                tape.matmul(tape.cmul(tape.square(diff), std::move(w)),
                            tape.leaf(ad::Array(dm, 1, std::vector<double>(dm, 1.0))));
            a_minus = tape.add(a_minus, expo);
            a_plus = tape.add(a_plus, expo);
        }

        // log(1 / (L (sigma_j sqrt(2 pi))^dim)) per sample.
        ad::Array logc(L, 1);
        const double dims = 1.0 + dm;
        for (int l = 0; l < L; ++l) {
            logc.data[l] = -dims * (0.5 * kLog2Pi + std::log(sigmas[l])) -
                           std::log(static_cast<double>(L));
        }
        ad::Var terms = tape.concat(tape.cadd(a_minus, logc), tape.cadd(a_plus, logc));
        const auto& tv = tape.value(terms).data;
        const double shift = *std::max_element(tv.begin(), tv.end());
        ad::Var lse = tape.add_const(
            tape.log(tape.sum(tape.exp(tape.add_const(terms, -shift)))), shift);
        loss = tape.add(loss, tape.scale(tape.add_const(lse, -lj), -1.0));

        // Fold the observed event into the history encoder.
        ad::Var x = tape.leaf(event_features(model, gaps[i], seq.events[i].mark));
        auto [h2, c2] = lstm_step_tape(tape, bound, model, x, h, c);
        h = h2;
        c = c2;
    }
    return loss;
}

ad::Var build_cvae_sequence_loss(ad::Tape& tape, const std::vector<ad::Var>& bound_model,
                                 const std::vector<ad::Var>& bound_cvae, const CegModel& model,
                                 const CvaeNets& nets, const EventSequence& seq,
                                 double sigma_obs, Rng rng) {
    if (seq.empty()) throw ValidationError("cvae loss: sequence must be non-empty");
    const double lj = log_jacobian(model);
    const double dims = 1.0 + model.mark_dim;
    const double recon_const = -0.5 * dims * (kLog2Pi + 2.0 * std::log(sigma_obs)) - lj;
    const double inv2so2 = 1.0 / (2.0 * sigma_obs * sigma_obs);

    ad::Var h = tape.leaf(ad::Array(model.hidden_dim, 1));
    ad::Var c = tape.leaf(ad::Array(model.hidden_dim, 1));
    ad::Var loss = tape.leaf(ad::Array::scalar(0.0));

    const auto gaps = sequence_gaps(seq);
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        const auto obs = event_features(model, gaps[i], seq.events[i].mark);
        ad::Var x = tape.leaf(obs);

        auto [mu_q, lv_q] = encoder_forward_tape(tape, bound_cvae, nets, x, h);
        auto [mu_p, lv_p] = prior_forward_tape(tape, bound_cvae, nets, h);

        // KL(q || p), closed form.
        ad::Var dlv = tape.sub(lv_q, lv_p);
        ad::Var term1 = tape.exp(dlv);
        ad::Var term2 = tape.mul(tape.square(tape.sub(mu_q, mu_p)),
                                 tape.exp(tape.scale(lv_p, -1.0)));
        ad::Var inner = tape.add_const(
            tape.add(tape.add(term1, term2), tape.scale(dlv, -1.0)), -1.0);
        ad::Var kl = tape.scale(tape.sum(inner), 0.5);

        // Reparametrized z and reconstruction.
        ad::Array eps(nets.noise_dim, 1);
        for (double& v : eps.data) v = rng.normal();
        ad::Var z = tape.add(mu_q, tape.cmul(tape.exp(tape.scale(lv_q, 0.5)), std::move(eps)));
        ad::Var y = generator_forward_tape(tape, bound_model, model, tape.transpose(z), h);

        ad::Array obs_row(1, obs.size());
        for (std::size_t d = 0; d < obs.size(); ++d) obs_row(0, d) = obs[d];
        ad::Var diff = tape.cadd(tape.scale(y, -1.0), std::move(obs_row));
        ad::Var recon_neg = tape.scale(tape.sum(tape.square(diff)), inv2so2);

        // -ELBO = KL - recon = KL + ||diff||^2/(2 so^2) - recon_const.
        loss = tape.add(loss, tape.add_const(tape.add(kl, recon_neg), -recon_const));

        auto [h2, c2] = lstm_step_tape(tape, bound_model, model, x, h, c);
        h = h2;
        c = c2;
    }
    return loss;
}

double kde_loss(const CegModel& model, const Dataset& data, const KdeLossOptions& options,
                Rng rng) {
    double total = 0.0;
    std::size_t events = 0;
    for (std::size_t s = 0; s < data.sequences.size(); ++s) {
        if (data.sequences[s].empty()) continue;
        ad::Tape tape;
        const auto bound = bind_params(tape, model.params);
        const ad::Var loss =
            build_kde_sequence_loss(tape, bound, model, data.sequences[s], options,
                                    rng.split(s));
        total += tape.scalar(loss);
        events += data.sequences[s].size();
    }
    if (events == 0) throw ValidationError("kde_loss: dataset has no events");
    return total / static_cast<double>(events);
}

double elbo_mean(const CegModel& model, const CvaeNets& nets, const Dataset& data,
                 double sigma_obs, Rng rng) {
    double total = 0.0;
    std::size_t events = 0;
    for (std::size_t s = 0; s < data.sequences.size(); ++s) {
        const auto& seq = data.sequences[s];
        Rng seq_rng = rng.split(s);
        LstmState state = lstm_zero_state(model);
        double prev = 0.0;
        for (const Event& e : seq.events) {
            const double gap = e.time - prev;
            std::vector<double> eps(nets.noise_dim);
            for (double& v : eps) v = seq_rng.normal();
            total += elbo_value(nets, model, gap, e.mark, state.h, eps, sigma_obs);
            state = lstm_step(model, gap, e.mark, state);
            prev = e.time;
            ++events;
        }
    }
    if (events == 0) throw ValidationError("elbo_mean: dataset has no events");
    return total / static_cast<double>(events);
}

void fit_standardization(CegModel& model, const Dataset& data) {
    std::vector<double> all_gaps;
    std::vector<std::vector<double>> marks(model.mark_dim);
    for (const auto& seq : data.sequences) {
        const auto gaps = sequence_gaps(seq);
        all_gaps.insert(all_gaps.end(), gaps.begin(), gaps.end());
        for (const auto& e : seq.events)
            for (int d = 0; d < model.mark_dim; ++d) marks[d].push_back(e.mark[d]);
    }
    auto std_of = [](const std::vector<double>& v, double mean) {
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        return std::sqrt(var / static_cast<double>(v.size()));
    };
    if (!all_gaps.empty()) {
        const double mean =
            std::accumulate(all_gaps.begin(), all_gaps.end(), 0.0) / all_gaps.size();
        const double sd = std_of(all_gaps, mean);
        model.standardize.gap_scale = sd > 1e-12 ? sd : (mean > 1e-12 ? mean : 1.0);
    }
    for (int d = 0; d < model.mark_dim; ++d) {
        if (marks[d].empty()) continue;
        const double mean =
            std::accumulate(marks[d].begin(), marks[d].end(), 0.0) / marks[d].size();
        const double sd = std_of(marks[d], mean);
        model.standardize.mark_mean[d] = mean;
        model.standardize.mark_std[d] = sd > 1e-12 ? sd : 1.0;
    }
}

namespace {

struct BatchStats {
    double loss_sum = 0.0;
    std::size_t events = 0;
};

void clip_and_step(ParamStore& params, AdamState& adam, double clip_norm,
                   std::size_t total_events) {
    params.scale_grads(1.0 / static_cast<double>(total_events));
    if (clip_norm > 0.0) {
        const double norm = params.grad_norm();
        if (norm > clip_norm) params.scale_grads(clip_norm / norm);
    }
    adam_step(params, adam);
}

template <typename LossFn, typename HeldoutFn>
TrainResult run_epochs(const Dataset& train_data, const TrainConfig& cfg, LossFn per_batch,
                       HeldoutFn heldout_fn) {
    if (cfg.epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    for (std::size_t s = 0; s < train_data.sequences.size(); ++s) {
        if (train_data.sequences[s].empty()) {
            throw ValidationError("train: sequence " + std::to_string(s) + " is empty");
        }
    }
    Rng root(cfg.seed);
    TrainResult result;
    std::vector<std::size_t> order(train_data.sequences.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        std::mt19937_64 shuffle_engine(root.split2(0x5u, epoch).next_u64());
        std::shuffle(order.begin(), order.end(), shuffle_engine);

        double loss_sum = 0.0;
        std::size_t events = 0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), b + cfg.batch_size);
            const std::span<const std::size_t> batch(order.data() + b, end - b);
            const BatchStats stats = per_batch(epoch, batch, root);
            if (!std::isfinite(stats.loss_sum)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(b / cfg.batch_size));
            }
            loss_sum += stats.loss_sum;
            events += stats.events;
        }
        EpochLog row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(events);
        row.heldout = heldout_fn(root.split2(0xEEu, epoch));
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count();
        result.log.push_back(row);
    }
    return result;
}

// Moment-match the time head to the standardized gap distribution before
// the first optimizer step: with few epochs the learned shape stays close
// to where it starts, so start it at the data's marginal mean and spread.
void warm_start_time_head(CegModel& model, const Dataset& train_data, std::uint64_t seed) {
    double g1 = 0.0, g2 = 0.0;
    std::size_t n_gaps = 0;
    for (const auto& seq : train_data.sequences) {
        for (double gap : sequence_gaps(seq)) {
            const double u = gap / model.standardize.gap_scale;
            g1 += u;
            g2 += u * u;
            ++n_gaps;
        }
    }
    if (n_gaps < 2) return;
    g1 /= static_cast<double>(n_gaps);
    const double target_sd = std::sqrt(std::max(g2 / static_cast<double>(n_gaps) - g1 * g1,
                                                1e-8));

    const int draws = 512;
    Rng rng = Rng(seed).split2(0xA11, 7);
    std::vector<double> u(draws);
    std::vector<double> z(model.noise_dim);
    for (int i = 0; i < draws; ++i) {
        for (double& v : z) v = rng.normal();
        u[i] = generator_time_preact(model, z);
    }

    auto moments = [&](double a, double b) {
        double m = 0.0, s = 0.0;
        for (double v : u) {
            const double sp = std::max(a * v + b, 0.0) +
                              std::log1p(std::exp(-std::abs(a * v + b)));
            m += sp;
            s += sp * sp;
        }
        m /= draws;
        return std::pair<double, double>{m, std::sqrt(std::max(s / draws - m * m, 0.0))};
    };
    // For each slope, the mean is monotone in the bias: bisect the bias to
    // hit the gap mean, then pick the slope whose spread is closest.
    double best_a = 1.0, best_b = 0.0, best_err = std::numeric_limits<double>::infinity();
    for (int ia = 0; ia <= 48; ++ia) {
        const double a = 0.02 * std::pow(400.0, ia / 48.0); // 0.02 .. 8
        double lo = -30.0, hi = 30.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (moments(a, mid).first < g1 ? lo : hi) = mid;
        }
        const double b = 0.5 * (lo + hi);
        const double err = std::abs(moments(a, b).second - target_sd);
        if (err < best_err) {
            best_err = err;
            best_a = a;
            best_b = b;
        }
    }

    auto& p = model.params;
    ad::Array& w3 = p.values[p.index_of("gen.w3")];
    ad::Array& b3 = p.values[p.index_of("gen.b3")];
    for (std::size_t j = 0; j < w3.cols; ++j) w3(0, j) *= best_a;
    b3.data[0] = best_a * b3.data[0] + best_b;
}

} // namespace

TrainResult train_nonparametric(CegModel& model, const Dataset& train_data,
                                const Dataset& heldout, const TrainConfig& cfg) {
    fit_standardization(model, train_data);
    warm_start_time_head(model, train_data, cfg.seed);
    AdamState adam = AdamState::for_params(model.params, cfg.lr);
    KdeLossOptions options{cfg.sample_count, cfg.knn_k, nullptr};

    auto per_batch = [&](int epoch, std::span<const std::size_t> batch, Rng& root) {
        BatchStats stats;
        model.params.zero_grads();
        for (std::size_t s : batch) {
            ad::Tape tape;
            const auto bound = bind_params(tape, model.params);
            const ad::Var loss = build_kde_sequence_loss(
                tape, bound, model, train_data.sequences[s], options, root.split2(epoch, s));
            tape.backward(loss);
            accumulate_grads(tape, bound, model.params);
            stats.loss_sum += tape.scalar(loss);
            stats.events += train_data.sequences[s].size();
        }
        clip_and_step(model.params, adam, cfg.clip_norm, stats.events);
        return stats;
    };
    auto heldout_fn = [&](Rng rng) {
        return heldout.sequences.empty() ? 0.0 : kde_loss(model, heldout, options, rng);
    };
    return run_epochs(train_data, cfg, per_batch, heldout_fn);
}

TrainResult train_variational(CegModel& model, CvaeNets& nets, const Dataset& train_data,
                              const Dataset& heldout, const TrainConfig& cfg) {
    fit_standardization(model, train_data);
    AdamState adam_model = AdamState::for_params(model.params, cfg.lr);
    AdamState adam_cvae = AdamState::for_params(nets.params, cfg.lr);

    auto per_batch = [&](int epoch, std::span<const std::size_t> batch, Rng& root) {
        BatchStats stats;
        model.params.zero_grads();
        nets.params.zero_grads();
        for (std::size_t s : batch) {
            ad::Tape tape;
            const auto bound_model = bind_params(tape, model.params);
            const auto bound_cvae = bind_params(tape, nets.params);
            const ad::Var loss = build_cvae_sequence_loss(tape, bound_model, bound_cvae, model,
                                                          nets, train_data.sequences[s],
                                                          cfg.sigma_obs, root.split2(epoch, s));
            tape.backward(loss);
            accumulate_grads(tape, bound_model, model.params);
            accumulate_grads(tape, bound_cvae, nets.params);
            stats.loss_sum += tape.scalar(loss);
            stats.events += train_data.sequences[s].size();
        }
        clip_and_step(model.params, adam_model, cfg.clip_norm, stats.events);
        clip_and_step(nets.params, adam_cvae, cfg.clip_norm, stats.events);
        return stats;
    };
    auto heldout_fn = [&](Rng rng) {
        // Reported as negative ELBO so both methods log "lower is better".
        return heldout.sequences.empty()
                   ? 0.0
                   : -elbo_mean(model, nets, heldout, cfg.sigma_obs, rng);
    };
    TrainResult result = run_epochs(train_data, cfg, per_batch, heldout_fn);
    model.sample_z_from_prior = true;
    return result;
}

void write_training_log(const std::string& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open training log file: " + path);
    out << "epoch,train_loss,heldout_loss,seconds\n";
    for (const auto& row : log) {
        out << row.epoch << ',' << format_double(row.train_loss) << ','
            << format_double(row.heldout) << ',' << format_double(row.seconds) << '\n';
    }
}

} // namespace ceg::train
