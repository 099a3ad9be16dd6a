#include "ceg/generation.hpp"

#include <cmath>

#include "ceg/errors.hpp"

namespace ceg::gen {

namespace {

std::vector<double> draw_z(const LoadedModel& model, std::span<const double> h, Rng& rng) {
    std::vector<double> eps(model.model.noise_dim);
    for (double& v : eps) v = rng.normal();
    if (model.model.sample_z_from_prior && model.cvae) {
        return reparam_sample(prior_forward(*model.cvae, h), eps);
    }
    return eps;
}

} // namespace

GenerationResult generate_sequence(const LoadedModel& model, const GenerationConfig& cfg) {
    if (!(cfg.horizon > 0.0)) throw ValidationError("generate_sequence: horizon must be > 0");
    if (cfg.max_events < 1) throw ValidationError("generate_sequence: max_events must be >= 1");

    GenerationResult result;
    result.sequence.horizon = cfg.horizon;
    Rng rng(cfg.seed);

    LstmState state = lstm_zero_state(model.model);
    double t = 0.0;
    while (t < cfg.horizon) {
        const auto z = draw_z(model, state.h, rng);
        const GeneratedEvent next = generator_forward(model.model, z, state.h);
        t += next.dt;
        if (t >= cfg.horizon) break; // the event past the horizon is dropped
        result.sequence.events.push_back(Event{t, next.mark});
        if (result.sequence.events.size() >= cfg.max_events) {
            result.truncated = true;
            break;
        }
        state = lstm_step(model.model, next.dt, next.mark, state);
    }
    return result;
}

std::vector<std::vector<double>> sample_next(const LoadedModel& model,
                                             std::span<const Event> history, std::size_t count,
                                             Rng rng) {
    const LstmState state = encode_history(model.model, history);
    std::vector<std::vector<double>> samples;
    samples.reserve(count);
    for (std::size_t l = 0; l < count; ++l) {
        const auto z = draw_z(model, state.h, rng);
        const GeneratedEvent ev = generator_forward(model.model, z, state.h);
        std::vector<double> row;
        row.reserve(1 + ev.mark.size());
        row.push_back(ev.dt);
        row.insert(row.end(), ev.mark.begin(), ev.mark.end());
        samples.push_back(std::move(row));
    }
    return samples;
}

Event predict_next(const LoadedModel& model, std::span<const Event> history, std::size_t count,
                   Rng rng) {
    if (count < 1) throw ValidationError("predict_next: L must be >= 1");
    const auto samples = sample_next(model, history, count, rng);
    const std::size_t dim = samples.front().size();
    std::vector<double> mean(dim, 0.0);
    for (const auto& s : samples)
        for (std::size_t d = 0; d < dim; ++d) mean[d] += s[d];
    for (double& v : mean) v /= static_cast<double>(count);

    Event predicted;
    predicted.time = (history.empty() ? 0.0 : history.back().time) + mean[0];
    predicted.mark.assign(mean.begin() + 1, mean.end());
    return predicted;
}

NextEventDistribution next_event_distribution(const LoadedModel& model,
                                              std::span<const Event> history,
                                              std::size_t count, Rng rng) {
    auto samples = sample_next(model, history, count, std::move(rng));
    std::vector<std::vector<double>> times;
    times.reserve(samples.size());
    for (const auto& s : samples) times.push_back({s[0]});
    NextEventDistribution dist;
    dist.time_only = kde::SampleCloud::self_tuned(std::move(times));
    dist.joint = kde::SampleCloud::self_tuned(std::move(samples));
    return dist;
}

double cond_pdf(const LoadedModel& model, const Event& x, std::span<const Event> history,
                std::size_t count, Rng rng) {
    const double tn = history.empty() ? 0.0 : history.back().time;
    if (x.time <= tn) throw ValidationError("cond_pdf: event must follow the history");
    auto samples = sample_next(model, history, count, std::move(rng));
    const auto cloud = kde::SampleCloud::self_tuned(std::move(samples));
    std::vector<double> query;
    query.reserve(1 + x.mark.size());
    query.push_back(x.time - tn);
    query.insert(query.end(), x.mark.begin(), x.mark.end());
    return kde::cond_pdf_kde(query, cloud);
}

IntensityValue cond_intensity(const LoadedModel& model, const Event& x,
                              std::span<const Event> history, std::size_t count, Rng rng) {
    const double tn = history.empty() ? 0.0 : history.back().time;
    if (x.time <= tn) throw ValidationError("cond_intensity: event must follow the history");
    const auto dist = next_event_distribution(model, history, count, std::move(rng));

    std::vector<double> query;
    query.reserve(1 + x.mark.size());
    query.push_back(x.time - tn);
    query.insert(query.end(), x.mark.begin(), x.mark.end());
    const double f = kde::cond_pdf_kde(query, dist.joint);
    const double survival = 1.0 - kde::cdf_time_kde(x.time - tn, dist.time_only);

    IntensityValue out;
    if (survival < kIntensityEps) {
        out.value = f / kIntensityEps;
        out.clamped = true;
    } else {
        out.value = f / survival;
    }
    return out;
}

} // namespace ceg::gen
