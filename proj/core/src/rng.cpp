#include "hlgp/rng.hpp"

#include <sstream>

#include "hlgp/errors.hpp"

namespace hlgp {

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_state(const std::string& state) {
  Rng rng;
  std::istringstream is(state);
  is >> rng;
  if (!is) throw ContractError("malformed rng state");
  return rng;
}

}  // namespace hlgp
