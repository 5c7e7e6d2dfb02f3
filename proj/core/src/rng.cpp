#include "hazebridge/rng.hpp"

#include <cmath>

namespace hazebridge {

namespace {

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(uint64_t seed) : state_(mix64(seed + kGolden)) {}

Rng Rng::substream(uint64_t seed, uint64_t a, uint64_t b) {
    uint64_t h = mix64(seed + kGolden);
    h = mix64(h ^ (a + kGolden));
    h = mix64(h ^ (b + 2 * kGolden));
    Rng r(0);
    r.state_ = h;
    return r;
}

uint64_t Rng::next_u64() {
    state_ += kGolden;
    return mix64(state_);
}

real Rng::uniform() {
    // 53 mantissa bits, [0, 1)
    return static_cast<real>((next_u64() >> 11) * (1.0 / 9007199254740992.0));
}

real Rng::uniform(real lo, real hi) {
    return lo + (hi - lo) * uniform();
}

real Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 in (0,1] keeps the log finite.
    real u1 = static_cast<real>(((next_u64() >> 11) + 1) * (1.0 / 9007199254740992.0));
    real u2 = uniform();
    real r = std::sqrt(real(-2) * std::log(u1));
    real theta = real(2.0 * 3.14159265358979323846) * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

int64_t Rng::uniform_int(int64_t n) {
    // Rejection-free modulo is biased for huge n; n here is tiny (batch sizes,
    // grid indices), so the bias is far below anything observable.
    return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
}

std::vector<int64_t> Rng::permutation(int64_t n) {
    std::vector<int64_t> p(n);
    for (int64_t i = 0; i < n; ++i) p[i] = i;
    for (int64_t i = n - 1; i > 0; --i) {
        int64_t j = uniform_int(i + 1);
        std::swap(p[i], p[j]);
    }
    return p;
}

}  // namespace hazebridge
