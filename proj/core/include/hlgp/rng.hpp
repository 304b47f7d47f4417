#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace hlgp {

// Every stochastic choice in the library draws from one of these so that a
// seed fully determines a run.
using Rng = std::mt19937_64;

std::string rng_state(const Rng& rng);
Rng rng_from_state(const std::string& state);

}  // namespace hlgp
