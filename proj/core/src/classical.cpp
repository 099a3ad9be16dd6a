#include "ceg/classical.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ceg/dataset_io.hpp"
#include "ceg/errors.hpp"

namespace ceg::classical {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ValidationError(std::string(name) + " must be positive and finite");
    }
}

double etas_kernel(const Etas& m, double dt, double dx, double dy) {
    // dt > 0; dx, dy are s - s_i.
    const double det_sqrt = m.sigma_x * m.sigma_y;
    const double ex = dx - m.a_x;
    const double ey = dy - m.a_y;
    const double quad =
        (ex * ex / (m.sigma_x * m.sigma_x) + ey * ey / (m.sigma_y * m.sigma_y)) / (2.0 * dt);
    return m.C * std::exp(-m.beta * dt) / (kTwoPi * det_sqrt * dt) * std::exp(-quad);
}

double last_time(std::span<const Event> history) {
    return history.empty() ? 0.0 : history.back().time;
}

} // namespace

void validate_params(const ClassicalModel& model) {
    std::visit(
        [](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SelfExciting>) {
                require_positive(m.mu, "mu");
                require_positive(m.beta, "beta");
            } else if constexpr (std::is_same_v<T, SelfCorrecting>) {
                require_positive(m.mu, "mu");
                require_positive(m.alpha, "alpha");
            } else if constexpr (std::is_same_v<T, Etas>) {
                require_positive(m.mu, "mu");
                require_positive(m.C, "C");
                require_positive(m.beta, "beta");
                require_positive(m.sigma_x, "sigma_x");
                require_positive(m.sigma_y, "sigma_y");
                if (!(m.domain.area() > 0.0)) {
                    throw ValidationError("ETAS domain box is degenerate");
                }
            } else {
                require_positive(m.rate, "rate");
            }
        },
        model);
}

int model_mark_dim(const ClassicalModel& model) {
    return std::holds_alternative<Etas>(model) ? 2 : 0;
}

double intensity(const ClassicalModel& model, double t, std::span<const double> mark,
                 std::span<const Event> history) {
    if (!history.empty() && t < history.back().time) {
        throw ValidationError("intensity: t precedes the last history event");
    }
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SelfExciting>) {
                double s = m.mu;
                for (const Event& e : history) s += m.beta * std::exp(-m.beta * (t - e.time));
                return s;
            } else if constexpr (std::is_same_v<T, SelfCorrecting>) {
                return std::exp(m.mu * t - m.alpha * static_cast<double>(history.size()));
            } else if constexpr (std::is_same_v<T, Etas>) {
                double s = m.mu;
                for (const Event& e : history) {
                    const double dt = t - e.time;
                    if (dt <= 0.0) continue; // spatial kernel is singular at dt = 0
                    s += etas_kernel(m, dt, mark[0] - e.mark[0], mark[1] - e.mark[1]);
                }
                return s;
            } else {
                return m.rate;
            }
        },
        model);
}

double ground_intensity(const ClassicalModel& model, double t, std::span<const Event> history) {
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Etas>) {
                double s = m.mu * m.domain.area();
                for (const Event& e : history) {
                    if (t <= e.time) continue;
                    s += m.C * std::exp(-m.beta * (t - e.time));
                }
                return s;
            } else {
                return intensity(model, t, {}, history);
            }
        },
        model);
}

double compensator(const ClassicalModel& model, double a, double b,
                   std::span<const Event> history) {
    if (b < a) throw ValidationError("compensator: b < a");
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SelfExciting>) {
                double s = m.mu * (b - a);
                for (const Event& e : history) {
                    s += std::exp(-m.beta * (a - e.time)) - std::exp(-m.beta * (b - e.time));
                }
                return s;
            } else if constexpr (std::is_same_v<T, SelfCorrecting>) {
                const double n = static_cast<double>(history.size());
                return std::exp(-m.alpha * n) * (std::exp(m.mu * b) - std::exp(m.mu * a)) / m.mu;
            } else if constexpr (std::is_same_v<T, Etas>) {
                double s = m.mu * m.domain.area() * (b - a);
                for (const Event& e : history) {
                    s += (m.C / m.beta) * (std::exp(-m.beta * (a - e.time)) -
                                           std::exp(-m.beta * (b - e.time)));
                }
                return s;
            } else {
                return m.rate * (b - a);
            }
        },
        model);
}

double exact_loglik(const ClassicalModel& model, const EventSequence& seq) {
    double ll = 0.0;
    const auto& events = seq.events;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const std::span<const Event> history(events.data(), i);
        ll += std::log(intensity(model, events[i].time, events[i].mark, history));
    }
    double prev = 0.0;
    for (std::size_t i = 0; i <= events.size(); ++i) {
        const double next = (i < events.size()) ? events[i].time : seq.horizon;
        ll -= compensator(model, prev, next, std::span<const Event>(events.data(), i));
        prev = next;
    }
    return ll;
}

double ground_truth_cond_pdf(const ClassicalModel& model, double t, std::span<const double> mark,
                             std::span<const Event> history) {
    const double tn = last_time(history);
    if (t < tn) throw ValidationError("ground_truth_cond_pdf: t precedes the last event");
    return intensity(model, t, mark, history) * std::exp(-compensator(model, tn, t, history));
}

double ground_truth_cond_pdf_time(const ClassicalModel& model, double t,
                                  std::span<const Event> history) {
    const double tn = last_time(history);
    if (t < tn) throw ValidationError("ground_truth_cond_pdf_time: t precedes the last event");
    return ground_intensity(model, t, history) * std::exp(-compensator(model, tn, t, history));
}

namespace {

// Samples the mark of an accepted ETAS event at time t from the exact
// conditional mark density lambda(t, s) / lambda_g(t): a mixture of the
// uniform background and Gaussian offsets around past events.
std::vector<double> sample_etas_mark(const Etas& m, double t, std::span<const Event> history,
                                     Rng& rng) {
    const double w_background = m.mu * m.domain.area();
    double total = w_background;
    std::vector<double> weights(history.size());
    for (std::size_t i = 0; i < history.size(); ++i) {
        weights[i] = m.C * std::exp(-m.beta * (t - history[i].time));
        total += weights[i];
    }
    double u = rng.uniform() * total;
    if (u < w_background) {
        return {m.domain.x0 + rng.uniform() * (m.domain.x1 - m.domain.x0),
                m.domain.y0 + rng.uniform() * (m.domain.y1 - m.domain.y0)};
    }
    u -= w_background;
    std::size_t parent = history.size() - 1;
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (u < weights[i]) {
            parent = i;
            break;
        }
        u -= weights[i];
    }
    const double dt = t - history[parent].time;
    const double sd = std::sqrt(dt);
    const double cx = history[parent].mark[0] + m.a_x;
    const double cy = history[parent].mark[1] + m.a_y;
    // Keep offspring inside the domain: rejection with a clamp fallback.
    for (int tries = 0; tries < 100; ++tries) {
        const double x = cx + sd * m.sigma_x * rng.normal();
        const double y = cy + sd * m.sigma_y * rng.normal();
        if (x >= m.domain.x0 && x <= m.domain.x1 && y >= m.domain.y0 && y <= m.domain.y1) {
            return {x, y};
        }
    }
    return {std::clamp(cx, m.domain.x0, m.domain.x1),
            std::clamp(cy, m.domain.y0, m.domain.y1)};
}

} // namespace

EventSequence thinning_simulate(const ClassicalModel& model, double horizon, Rng rng,
                                const ThinningOptions& options) {
    validate_params(model);
    require_positive(horizon, "horizon");

    EventSequence seq;
    seq.horizon = horizon;
    auto& events = seq.events;

    const bool is_etas = std::holds_alternative<Etas>(model);
    const auto* sc = std::get_if<SelfCorrecting>(&model);
    const auto* se = std::get_if<SelfExciting>(&model);

    double t = 0.0;
    // Lookahead window for increasing intensities (self-correcting); the
    // bound is refreshed whenever a candidate crosses bound_valid_until.
    const double window = sc ? std::log(2.0) / sc->mu : 0.0;

    double bound = 0.0;
    double bound_valid_until = horizon;
    auto refresh_bound = [&] {
        if (options.lambda_bar) {
            bound = *options.lambda_bar;
            bound_valid_until = horizon;
            return;
        }
        const std::span<const Event> history(events.data(), events.size());
        if (se) {
            bound = se->mu + se->beta * (static_cast<double>(events.size()) + 10.0);
            bound_valid_until = horizon;
        } else if (sc) {
            bound_valid_until = std::min(t + window, horizon);
            bound = std::exp(sc->mu * bound_valid_until -
                             sc->alpha * static_cast<double>(events.size()));
        } else if (const auto* et = std::get_if<Etas>(&model)) {
            // The ETAS ground intensity is non-increasing between events,
            // so its value at t bounds it; unlike ground_intensity this
            // must include an event accepted at exactly t.
            bound = et->mu * et->domain.area();
            for (const Event& e : events) {
                if (e.time <= t) bound += et->C * std::exp(-et->beta * (t - e.time));
            }
            bound_valid_until = horizon;
        } else {
            bound = ground_intensity(model, t, history);
            bound_valid_until = horizon;
        }
    };

    refresh_bound();
    while (t < horizon) {
        t += rng.exponential(bound);
        if (t > bound_valid_until && bound_valid_until < horizon) {
            t = bound_valid_until;
            refresh_bound();
            continue;
        }
        if (t >= horizon) break;

        const std::span<const Event> history(events.data(), events.size());
        Event candidate;
        candidate.time = t;
        double lambda;
        if (is_etas) {
            lambda = ground_intensity(model, t, history);
        } else {
            lambda = intensity(model, t, {}, history);
        }
        if (lambda > bound * (1.0 + 1e-12)) {
            throw NumericError("thinning: upper bound violated at t=" + format_double(t));
        }
        const double d = rng.uniform();
        if (d * bound <= lambda) {
            if (is_etas) {
                candidate.mark = sample_etas_mark(std::get<Etas>(model), t, history, rng);
            }
            events.push_back(std::move(candidate));
            if (events.size() >= options.max_events) break;
            refresh_bound();
        }
    }
    // Drop any event at or beyond the horizon (none can be, by the loop
    // condition, but keep the contract explicit).
    while (!events.empty() && events.back().time >= horizon) events.pop_back();
    return seq;
}

std::vector<double> rescaled_residuals(const ClassicalModel& model, const EventSequence& seq) {
    std::vector<double> residuals;
    residuals.reserve(seq.events.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        const std::span<const Event> history(seq.events.data(), i);
        residuals.push_back(compensator(model, prev, seq.events[i].time, history));
        prev = seq.events[i].time;
    }
    return residuals;
}

namespace {

Etas etas_from_vector(const std::vector<double>& th, const Box& domain) {
    Etas m;
    m.mu = std::exp(th[0]);
    m.C = std::exp(th[1]);
    m.beta = std::exp(th[2]);
    m.sigma_x = std::exp(th[3]);
    m.sigma_y = std::exp(th[4]);
    m.a_x = th[5];
    m.a_y = th[6];
    m.domain = domain;
    return m;
}

double etas_total_loglik(const std::vector<double>& th, const Box& domain, const Dataset& data) {
    const ClassicalModel model = etas_from_vector(th, domain);
    double ll = 0.0;
    for (const auto& seq : data.sequences) ll += exact_loglik(model, seq);
    return ll;
}

} // namespace

EtasFitResult fit_etas(const Dataset& data, const Etas& init, const EtasFitConfig& cfg) {
    if (data.mark_dim != 2) throw ValidationError("fit_etas: dataset must have 2-D marks");
    validate_params(init);

    std::vector<double> th = {std::log(init.mu),      std::log(init.C),
                              std::log(init.beta),    std::log(init.sigma_x),
                              std::log(init.sigma_y), init.a_x,
                              init.a_y};
    // Adam over the unconstrained parametrization.
    std::vector<double> m(th.size(), 0.0), v(th.size(), 0.0);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    EtasFitResult result;
    for (int step = 1; step <= cfg.steps; ++step) {
        std::vector<double> grad(th.size());
        for (std::size_t i = 0; i < th.size(); ++i) {
            auto thp = th;
            auto thm = th;
            thp[i] += cfg.fd_eps;
            thm[i] -= cfg.fd_eps;
            const double lp = etas_total_loglik(thp, init.domain, data);
            const double lm = etas_total_loglik(thm, init.domain, data);
            if (!std::isfinite(lp) || !std::isfinite(lm)) {
                throw NumericError("fit_etas: non-finite likelihood at step " +
                                   std::to_string(step));
            }
            grad[i] = (lp - lm) / (2.0 * cfg.fd_eps);
        }
        const double bc1 = 1.0 - std::pow(b1, step);
        const double bc2 = 1.0 - std::pow(b2, step);
        for (std::size_t i = 0; i < th.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            th[i] += cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps); // ascent
        }
        if (step % cfg.log_every == 0 || step == cfg.steps) {
            result.loglik_history.push_back(etas_total_loglik(th, init.domain, data));
        }
    }
    result.params = etas_from_vector(th, init.domain);
    return result;
}

} // namespace ceg::classical
