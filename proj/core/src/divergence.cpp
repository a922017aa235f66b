#include "capex/divergence.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "capex/errors.hpp"

namespace capex {

void validate_probability(std::span<const double> p) {
  if (p.empty()) throw OutOfDomain("probability vector is empty");
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw OutOfDomain("probability vector has a negative or non-finite entry");
    }
    sum += x;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance) {
    throw OutOfDomain("probability vector sums to " + std::to_string(sum) + ", not 1");
  }
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw OutOfDomain("kl_divergence: length mismatch");
  validate_probability(p);
  validate_probability(q);
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return kInfiniteDivergence;
    d += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave a tiny negative residue when p == q.
  return d < 0.0 ? 0.0 : d;
}

double entropy(std::span<const double> p) {
  validate_probability(p);
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h < 0.0 ? 0.0 : h;
}

double entropy_of_counts(std::span<const double> counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log(p);
    }
  }
  return h < 0.0 ? 0.0 : h;
}

namespace {

void check_alpha(std::span<const double> alpha) {
  if (alpha.empty()) throw OutOfDomain("Dirichlet parameter vector is empty");
  for (double a : alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw OutOfDomain("Dirichlet parameters must be positive and finite");
    }
  }
}

double expected_kl_unchecked(std::span<const double> alpha) {
  using boost::math::digamma;
  const double a0 = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  const double psi_total = digamma(a0 + 1.0);
  double risk = 0.0;
  for (double a : alpha) {
    const double mean = a / a0;
    risk += mean * (digamma(a + 1.0) - psi_total - std::log(mean));
  }
  return risk < 0.0 ? 0.0 : risk;
}

}  // namespace

double dirichlet_expected_kl(std::span<const double> alpha) {
  check_alpha(alpha);
  return expected_kl_unchecked(alpha);
}

double dirichlet_expected_kl_reduction(std::span<const double> alpha) {
  check_alpha(alpha);
  const double a0 = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  std::vector<double> bumped(alpha.begin(), alpha.end());
  double expected_after = 0.0;
  for (std::size_t j = 0; j < bumped.size(); ++j) {
    bumped[j] += 1.0;
    expected_after += (alpha[j] / a0) * expected_kl_unchecked(bumped);
    bumped[j] = alpha[j];
  }
  const double reduction = expected_kl_unchecked(alpha) - expected_after;
  return reduction < 0.0 ? 0.0 : reduction;
}

}  // namespace capex
