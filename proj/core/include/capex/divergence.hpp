#pragma once

#include <limits>
#include <span>

namespace capex {

// All quantities are in nats.

inline constexpr double kInfiniteDivergence = std::numeric_limits<double>::infinity();
inline constexpr double kProbabilityTolerance = 1e-9;

// Throws OutOfDomain unless `p` is nonempty, nonnegative and sums to 1.
void validate_probability(std::span<const double> p);

// D_KL(p || q) = sum_i p_i log(p_i / q_i), with 0 log(0/q) = 0.
// Returns kInfiniteDivergence when some q_i = 0 while p_i > 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Shannon entropy with 0 log 0 = 0.
double entropy(std::span<const double> p);

// Plug-in entropy of a count vector (counts need not be normalised).
// Returns 0 for an all-zero vector.
double entropy_of_counts(std::span<const double> counts);

// Minimum over point estimates t of E_{theta ~ Dir(alpha)}[KL(theta || t)].
// The minimiser is the Dirichlet mean alpha / alpha0, giving
//   sum_j (a_j / a0) [psi(a_j + 1) - psi(a0 + 1) - log(a_j / a0)].
// Throws OutOfDomain for nonpositive entries.
double dirichlet_expected_kl(std::span<const double> alpha);

// dirichlet_expected_kl(alpha) minus the predictive-weighted risk after one
// more observation: delta(a) - sum_j (a_j/a0) delta(a + e_j). Nonnegative.
double dirichlet_expected_kl_reduction(std::span<const double> alpha);

}  // namespace capex
