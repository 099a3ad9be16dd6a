#include "ceg/event.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ceg/errors.hpp"

namespace ceg {

std::size_t Dataset::total_events() const {
    std::size_t n = 0;
    for (const auto& seq : sequences) n += seq.events.size();
    return n;
}

std::vector<std::string> validate_sequence(const EventSequence& seq, int mark_dim) {
    std::vector<std::string> violations;
    if (!(seq.horizon > 0.0) || !std::isfinite(seq.horizon)) {
        violations.push_back("horizon must be positive and finite");
    }
    double prev = -1.0;
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        const Event& e = seq.events[i];
        if (!std::isfinite(e.time)) {
            violations.push_back("non-finite value at index " + std::to_string(i));
            continue;
        }
        if (e.time < 0.0) {
            violations.push_back("negative time at index " + std::to_string(i));
        }
        if (i > 0 && e.time <= prev) {
            violations.push_back("non-monotone times at index " + std::to_string(i));
        }
        if (e.time >= seq.horizon) {
            violations.push_back("time >= horizon at index " + std::to_string(i));
        }
        if (static_cast<int>(e.mark.size()) != mark_dim) {
            violations.push_back("mark-length mismatch at index " + std::to_string(i) +
                                 " (got " + std::to_string(e.mark.size()) + ", want " +
                                 std::to_string(mark_dim) + ")");
        }
        for (double m : e.mark) {
            if (!std::isfinite(m)) {
                violations.push_back("non-finite value at index " + std::to_string(i));
                break;
            }
        }
        prev = e.time;
    }
    return violations;
}

void validate_dataset(const Dataset& ds) {
    if (ds.mark_bounds) {
        if (static_cast<int>(ds.mark_bounds->lo.size()) != ds.mark_dim ||
            static_cast<int>(ds.mark_bounds->hi.size()) != ds.mark_dim) {
            throw ValidationError("mark_bounds dimension does not match mark_dim");
        }
    }
    for (std::size_t k = 0; k < ds.sequences.size(); ++k) {
        auto violations = validate_sequence(ds.sequences[k], ds.mark_dim);
        if (!violations.empty()) {
            throw ValidationError("sequence " + std::to_string(k) + ": " + violations.front());
        }
        if (k > 0 && ds.sequences[k].horizon != ds.sequences[0].horizon) {
            throw ValidationError("sequence " + std::to_string(k) +
                                  ": horizon differs from sequence 0");
        }
        if (ds.mark_bounds) {
            for (std::size_t i = 0; i < ds.sequences[k].events.size(); ++i) {
                const auto& mark = ds.sequences[k].events[i].mark;
                for (int d = 0; d < ds.mark_dim; ++d) {
                    if (mark[d] < ds.mark_bounds->lo[d] || mark[d] > ds.mark_bounds->hi[d]) {
                        throw ValidationError("sequence " + std::to_string(k) + ", event " +
                                              std::to_string(i) + ": mark outside mark_bounds");
                    }
                }
            }
        }
    }
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_frac,
                                          std::uint64_t seed) {
    if (ds.sequences.size() < 2) {
        throw ValidationError("split_dataset requires at least 2 sequences");
    }
    if (!(train_frac > 0.0 && train_frac < 1.0)) {
        throw ValidationError("train_frac must be in (0, 1)");
    }
    std::vector<std::size_t> order(ds.sequences.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 engine(seed);
    std::shuffle(order.begin(), order.end(), engine);

    const auto n_train =
        static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(order.size())));
    Dataset train{{}, ds.mark_dim, ds.mark_bounds};
    Dataset test{{}, ds.mark_dim, ds.mark_bounds};
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? train : test).sequences.push_back(ds.sequences[order[i]]);
    }
    return {std::move(train), std::move(test)};
}

} // namespace ceg
