#include "capex/random.hpp"

#include <numeric>
#include <sstream>

#include "capex/errors.hpp"

namespace capex {

Rng make_stream(std::uint64_t seed, Stream stream, std::uint32_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(stream),
                    salt};
  return Rng(seq);
}

// The standard distributions are implementation-defined; these helpers keep
// sequences identical across standard libraries.
std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw OutOfDomain("uniform_index over an empty range");
  const std::uint64_t range = n;
  const std::uint64_t limit = Rng::max() - (Rng::max() % range);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

double uniform_real(Rng& rng) {
  // 53 random bits -> [0, 1)
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t sample_categorical(Rng& rng, std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw OutOfDomain("cannot sample from an all-zero distribution");
  const double u = uniform_real(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

std::string serialize_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng deserialize_rng(const std::string& text) {
  std::istringstream is(text);
  Rng rng;
  is >> rng;
  if (is.fail()) throw ConfigError("corrupt random engine state");
  return rng;
}

}  // namespace capex
