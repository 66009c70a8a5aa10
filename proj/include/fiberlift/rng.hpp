#pragma once
#include <cstdint>

namespace fiberlift {

// Counter-based generator: every draw is a pure function of (seed, stream
// ids), so sampling loops can be reordered or parallelized without changing
// results.
struct CounterRng {
    uint64_t seed = 0;

    static uint64_t mix(uint64_t x);
    uint64_t raw(uint64_t a, uint64_t b = 0, uint64_t c = 0) const;

    // uniform in [0,1)
    double uniform(uint64_t a, uint64_t b = 0, uint64_t c = 0) const;
    // uniform integer in [0, n)
    uint64_t index(uint64_t n, uint64_t a, uint64_t b = 0, uint64_t c = 0) const;
    // standard normal (Box-Muller on two derived streams)
    double normal(uint64_t a, uint64_t b = 0, uint64_t c = 0) const;
};

// Sequential convenience wrapper around CounterRng for code that just needs a
// stream of draws (still fully determined by seed).
struct SequentialRng {
    CounterRng base;
    uint64_t counter = 0;
    explicit SequentialRng(uint64_t seed) : base{seed} {}
    double uniform() { return base.uniform(counter++); }
    uint64_t index(uint64_t n) { return base.index(n, counter++); }
};

} // namespace fiberlift
