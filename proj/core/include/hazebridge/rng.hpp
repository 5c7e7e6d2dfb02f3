#pragma once

#include <cstdint>
#include <vector>

#include "hazebridge/common.hpp"

namespace hazebridge {

// Small counter-keyed PRNG (splitmix64 core, hand-rolled Box-Muller).
// Substreams are derived purely from (seed, key_a, key_b), so a sampler keyed
// by (run seed, sample index, step index) reproduces the same draws no matter
// how work is scheduled across threads.
class Rng {
public:
    explicit Rng(uint64_t seed);

    // Independent stream for a (seed, a, b) triple.
    static Rng substream(uint64_t seed, uint64_t a, uint64_t b = 0);

    uint64_t next_u64();

    real uniform();                       // [0, 1)
    real uniform(real lo, real hi);
    real normal();                        // standard normal
    int64_t uniform_int(int64_t n);       // uniform on {0, ..., n-1}

    std::vector<int64_t> permutation(int64_t n);  // Fisher-Yates

private:
    uint64_t state_;
    bool have_spare_ = false;
    real spare_ = 0;
};

}  // namespace hazebridge
