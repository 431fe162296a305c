#pragma once

#include <cstdint>
#include <random>

namespace promptmut {

// All randomness in a run flows through one of these, seeded from the run
// config. Bounded picks use modulo reduction rather than
// std::uniform_int_distribution, whose output is implementation-defined;
// the slight bias is irrelevant here and reproducibility is not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform-ish index in [0, n). n must be > 0.
    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

private:
    std::mt19937_64 engine_;
};

}  // namespace promptmut
