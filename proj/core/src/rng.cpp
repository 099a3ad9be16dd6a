#include "ceg/rng.hpp"

#include <cmath>

namespace ceg {

namespace {

// splitmix64 finalizer; used both to seed the engine and to derive child keys.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

Rng::Rng(std::uint64_t seed) : key_(seed), engine_(mix64(seed)) {}

Rng Rng::split(std::uint64_t stream) const {
    return Rng(mix64(key_ ^ mix64(stream + 0x51ed2701ULL)));
}

Rng Rng::split2(std::uint64_t a, std::uint64_t b) const {
    return split(a).split(b);
}

std::uint64_t Rng::next_u64() {
    return engine_();
}

double Rng::uniform() {
    // 53-bit mantissa, mapped to (0, 1) so log(u) is always finite.
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return u > 0.0 ? u : 0x1.0p-53;
}

double Rng::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::exponential(double rate) {
    return -std::log(uniform()) / rate;
}

} // namespace ceg
