#include "fiberlift/rng.hpp"
#include <cmath>

namespace fiberlift {

uint64_t CounterRng::mix(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t CounterRng::raw(uint64_t a, uint64_t b, uint64_t c) const {
    uint64_t h = mix(seed ^ 0x5851f42d4c957f2dULL);
    h = mix(h ^ a);
    h = mix(h ^ b);
    h = mix(h ^ c);
    return h;
}

double CounterRng::uniform(uint64_t a, uint64_t b, uint64_t c) const {
    return static_cast<double>(raw(a, b, c) >> 11) * 0x1.0p-53;
}

uint64_t CounterRng::index(uint64_t n, uint64_t a, uint64_t b, uint64_t c) const {
    return n == 0 ? 0 : raw(a, b, c) % n;
}

double CounterRng::normal(uint64_t a, uint64_t b, uint64_t c) const {
    double u1 = uniform(a, b, c ^ 0x9e3779b9ULL);
    double u2 = uniform(a, b, c ^ 0x85ebca6bULL);
    if (u1 <= 0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

} // namespace fiberlift
