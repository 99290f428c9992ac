#pragma once
// Per-path random streams keyed by (seed, index).  Each stream is an
// independent mt19937_64 seeded through std::seed_seq, so path i draws the
// same numbers no matter which paths were generated before it.

#include <cstdint>
#include <random>

namespace casimir {

using Engine = std::mt19937_64;

Engine stream(std::uint64_t seed, std::uint64_t index);

}  // namespace casimir
