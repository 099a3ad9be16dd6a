#pragma once

#include <cstdint>
#include <random>

namespace ceg {

// Seedable, splittable random stream. split(id) derives an independent
// child stream from the parent's key without consuming parent state, so
// per-sequence / per-event substreams are reproducible regardless of the
// order or thread they are drawn on.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    Rng split(std::uint64_t stream) const;
    Rng split2(std::uint64_t a, std::uint64_t b) const;

    // Uniform on (0, 1).
    double uniform();
    // Standard normal via Box-Muller (no cached spare, one value per call).
    double normal();
    // Exponential with the given rate.
    double exponential(double rate);

    std::uint64_t next_u64();

private:
    std::uint64_t key_;
    std::mt19937_64 engine_;
};

} // namespace ceg
