#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace capex {

using Rng = std::mt19937_64;

// Independent streams derived from one user seed. Distinct streams keep the
// query choice, attribute draws and subject noise decoupled, so two runs that
// differ only in query policy still share the subject's noise sequence.
enum class Stream : std::uint32_t { kQuery = 1, kAttributes = 2, kSubject = 3, kTruth = 4 };

Rng make_stream(std::uint64_t seed, Stream stream, std::uint32_t salt = 0);

// Uniform index in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);
double uniform_real(Rng& rng);
// Draw an index from a (not necessarily normalised) weight vector.
std::size_t sample_categorical(Rng& rng, std::span<const double> weights);

// Round-trippable text form of the engine state, for session snapshots.
std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& text);

}  // namespace capex
