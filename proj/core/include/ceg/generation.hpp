#pragma once

#include <cstdint>
#include <span>

#include "ceg/event.hpp"
#include "ceg/kde.hpp"
#include "ceg/model_io.hpp"
#include "ceg/nets.hpp"
#include "ceg/rng.hpp"

namespace ceg::gen {

// When 1 - F falls below this, the intensity is reported as f / eps and
// flagged instead of blowing up.
inline constexpr double kIntensityEps = 1e-6;

struct GenerationConfig {
    double horizon = 100.0;
    std::size_t max_events = 100000;
    std::uint64_t seed = 0;
    std::size_t sample_count = 1000; // L for density queries
};

struct GenerationResult {
    EventSequence sequence;
    bool truncated = false; // hit max_events before the horizon
};

// Sequential generation: sample z, map through g, advance time, update the
// LSTM state; the final event is dropped if its time lands at or past the
// horizon. Deterministic given the seed.
GenerationResult generate_sequence(const LoadedModel& model, const GenerationConfig& cfg);

// L iid draws of (dt, mark) conditioned on the history prefix. The z
// source is N(0, I), or the learned prior net when the model was trained
// variationally.
std::vector<std::vector<double>> sample_next(const LoadedModel& model,
                                             std::span<const Event> history, std::size_t count,
                                             Rng rng);

// Component-wise sample average: predicted time = last event time + mean
// gap, predicted mark = mean mark.
Event predict_next(const LoadedModel& model, std::span<const Event> history, std::size_t count,
                   Rng rng);

// Self-tuned KDE over a generated cloud, evaluated at the candidate event.
// x.time must exceed the last history time.
double cond_pdf(const LoadedModel& model, const Event& x, std::span<const Event> history,
                std::size_t count, Rng rng);

struct IntensityValue {
    double value = 0.0;
    bool clamped = false; // 1 - F fell below kIntensityEps
};

// lambda = f / (1 - F) with F the time-marginal KDE CDF on the same cloud.
IntensityValue cond_intensity(const LoadedModel& model, const Event& x,
                              std::span<const Event> history, std::size_t count, Rng rng);

// Cloud + derived quantities for callers that evaluate many queries
// against one history (the evaluator grids).
struct NextEventDistribution {
    kde::SampleCloud joint;     // (dt, mark) cloud, self-tuned
    kde::SampleCloud time_only; // dt marginal cloud, self-tuned in 1-D
};
NextEventDistribution next_event_distribution(const LoadedModel& model,
                                              std::span<const Event> history,
                                              std::size_t count, Rng rng);

} // namespace ceg::gen
