#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ceg {

// One point x = (t, m): occurrence time plus a continuous mark vector.
// The mark may be empty for time-only processes.
struct Event {
    double time = 0.0;
    std::vector<double> mark;
};

// Ordered events on a horizon [0, T). Times are strictly increasing and
// every event time is < horizon.
struct EventSequence {
    std::vector<Event> events;
    double horizon = 0.0;

    std::size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }
};

// Per-dimension [lo, hi] box for the mark space.
struct MarkBounds {
    std::vector<double> lo;
    std::vector<double> hi;
};

struct Dataset {
    std::vector<EventSequence> sequences;
    int mark_dim = 0;
    std::optional<MarkBounds> mark_bounds;

    std::size_t size() const { return sequences.size(); }
    std::size_t total_events() const;
};

// Returns the list of invariant violations for a sequence: non-monotone
// times, time >= horizon, mark-length mismatches, non-finite values.
// Empty result means the sequence is valid.
std::vector<std::string> validate_sequence(const EventSequence& seq, int mark_dim);

// Validates every sequence (and mark bounds if declared); throws
// ValidationError naming the sequence index and offending event.
void validate_dataset(const Dataset& ds);

// Deterministic seeded shuffle-then-split. |train| = round(train_frac * n).
// Requires at least 2 sequences.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_frac,
                                          std::uint64_t seed);

} // namespace ceg
