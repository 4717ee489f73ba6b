// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dohpool::security {

// Threat-model parameters: n resolvers, each compromised independently
// with probability p_attack; the application breaks when the attacker
// controls a fraction >= y of the pool; x is the resolver fraction the
// attacker is assumed able to reach; k is the per-resolver pool weight
// (every responder contributes exactly k entries, so k cancels out of
// the fraction analysis).
struct ThreatParams {
  std::size_t n = 3;
  double y = 0.5;
  double x = 0.5;
  double p_attack = 0.0;
  std::size_t k = 0;

  void validate() const;  // throws std::domain_error
};

/// ceil(frac * n) computed with a guard against the product landing an
/// ulp above an exact integer.
std::size_t ceil_fraction(double frac, std::size_t n);

/// Minimum number of compromised resolvers needed to control a fraction
/// >= y of the pool under equal per-resolver weight: M = ceil(y * n).
std::size_t min_compromised_resolvers(std::size_t n, double y);

/// Closed form p_attack^M with M = ceil(x * n): the probability of
/// compromising one specific set of M resolvers. M = 0 gives 1 (empty
/// product). Note this ignores the C(n, M) choice multiplicity; see
/// attack_probability_exact for the full tail.
double attack_probability_paper(const ThreatParams& params);

/// Exact tail: sum_{m=M}^{n} C(n,m) p^m (1-p)^(n-m), the probability
/// that at least M = ceil(x * n) of n independent resolvers are
/// compromised. Log-space terms with compensated summation; requires
/// n <= 64.
double attack_probability_exact(const ThreatParams& params);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;  // binomial standard error of the estimate
  std::size_t trials = 0;
};

/// Simulates `trials` draws of n independent Bernoulli(p) compromises
/// and counts draws reaching the ceil(x*n) threshold. Deterministic for
/// a fixed seed; uniform doubles come from the top 53 bits of a
/// mt19937_64 stream, so the results are portable.
MonteCarloEstimate attack_probability_montecarlo(const ThreatParams& params,
                                                 std::size_t trials,
                                                 std::uint64_t seed);

struct CurveRow {
  std::size_t n = 0;
  double x = 0.0;
  double p = 0.0;
  double paper_prob = 0.0;
  double exact_prob = 0.0;
  std::optional<MonteCarloEstimate> mc;
};

/// Tabulates both formulas over (n, p) for a fixed x. mc_trials > 0
/// additionally runs the Monte Carlo estimator per row, with each row's
/// seed derived deterministically from `seed`.
std::vector<CurveRow> security_curve(std::span<const std::size_t> n_values,
                                     double x,
                                     std::span<const double> p_values,
                                     std::size_t mc_trials = 0,
                                     std::uint64_t seed = 1);

/// CSV with columns n,x,p,paper_prob,exact_prob,mc_estimate,mc_stderr
/// (MC cells empty when disabled).
std::string curve_to_csv(const std::vector<CurveRow>& rows);

}  // namespace dohpool::security
