// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "dohpool/security_model.hpp"

#include "dohpool/util.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dohpool::security {

namespace {

// Uniform double in [0,1) from the top 53 bits; bit-identical on every
// platform, unlike std::uniform_real_distribution.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double log_binomial(std::size_t n, std::size_t m) {
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(m) + 1.0) -
         std::lgamma(static_cast<double>(n - m) + 1.0);
}

}  // namespace

void ThreatParams::validate() const {
  if (n < 1) throw std::domain_error("n must be >= 1");
  if (!(y > 0.0 && y <= 1.0)) throw std::domain_error("y must be in (0,1]");
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("x must be in [0,1]");
  if (!(p_attack >= 0.0 && p_attack <= 1.0))
    throw std::domain_error("p_attack must be in [0,1]");
}

std::size_t ceil_fraction(double frac, std::size_t n) {
  if (!(frac >= 0.0 && frac <= 1.0))
    throw std::domain_error("fraction must be in [0,1]");
  // frac*n can land one ulp above an exact integer (e.g. 2.0/3.0 * 3);
  // nudge below before taking the ceiling.
  const double product = frac * static_cast<double>(n);
  const double guarded = product - 1e-9;
  const double c = std::ceil(guarded);
  if (c <= 0.0) return 0;
  const auto m = static_cast<std::size_t>(c);
  return m > n ? n : m;
}

std::size_t min_compromised_resolvers(std::size_t n, double y) {
  if (n < 1) throw std::domain_error("n must be >= 1");
  if (!(y > 0.0 && y <= 1.0)) throw std::domain_error("y must be in (0,1]");
  return ceil_fraction(y, n);
}

double attack_probability_paper(const ThreatParams& params) {
  params.validate();
  const std::size_t m = ceil_fraction(params.x, params.n);
  double prob = 1.0;
  for (std::size_t i = 0; i < m; ++i) prob *= params.p_attack;
  return prob;
}

double attack_probability_exact(const ThreatParams& params) {
  params.validate();
  if (params.n > 64)
    throw std::domain_error("exact tail supported for n <= 64");
  const std::size_t n = params.n;
  const std::size_t m0 = ceil_fraction(params.x, n);
  const double p = params.p_attack;

  if (m0 == 0) return 1.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;

  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);

  // Kahan summation over the tail terms.
  double sum = 0.0, comp = 0.0;
  for (std::size_t m = m0; m <= n; ++m) {
    const double log_term = log_binomial(n, m) +
                            static_cast<double>(m) * log_p +
                            static_cast<double>(n - m) * log_q;
    const double term = std::exp(log_term);
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum < 0.0 ? 0.0 : (sum > 1.0 ? 1.0 : sum);
}

MonteCarloEstimate attack_probability_montecarlo(const ThreatParams& params,
                                                 std::size_t trials,
                                                 std::uint64_t seed) {
  params.validate();
  if (trials < 1) throw std::domain_error("trials must be >= 1");
  const std::size_t threshold = ceil_fraction(params.x, params.n);

  std::mt19937_64 rng(seed);
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t compromised = 0;
    for (std::size_t i = 0; i < params.n; ++i)
      if (uniform01(rng) < params.p_attack) ++compromised;
    if (compromised >= threshold) ++hits;
  }

  MonteCarloEstimate est;
  est.trials = trials;
  est.estimate = static_cast<double>(hits) / static_cast<double>(trials);
  est.stderr_ = std::sqrt(est.estimate * (1.0 - est.estimate) /
                          static_cast<double>(trials));
  return est;
}

std::vector<CurveRow> security_curve(std::span<const std::size_t> n_values,
                                     double x,
                                     std::span<const double> p_values,
                                     std::size_t mc_trials,
                                     std::uint64_t seed) {
  std::vector<CurveRow> rows;
  rows.reserve(n_values.size() * p_values.size());
  for (const std::size_t n : n_values) {
    for (const double p : p_values) {
      ThreatParams params;
      params.n = n;
      params.x = x;
      params.y = x > 0.0 ? x : 1.0;  // y only matters for validation here
      params.p_attack = p;
      CurveRow row;
      row.n = n;
      row.x = x;
      row.p = p;
      row.paper_prob = attack_probability_paper(params);
      row.exact_prob = attack_probability_exact(params);
      if (mc_trials > 0)
        row.mc = attack_probability_montecarlo(
            params, mc_trials, util::splitmix64(seed ^ (n * 1000003 + rows.size())));
      rows.push_back(row);
    }
  }
  return rows;
}

std::string curve_to_csv(const std::vector<CurveRow>& rows) {
  std::ostringstream out;
  out << "n,x,p,paper_prob,exact_prob,mc_estimate,mc_stderr\n";
  out.precision(12);
  for (const auto& row : rows) {
    out << row.n << ',' << row.x << ',' << row.p << ',' << row.paper_prob
        << ',' << row.exact_prob << ',';
    if (row.mc) out << row.mc->estimate;
    out << ',';
    if (row.mc) out << row.mc->stderr_;
    out << '\n';
  }
  return out.str();
}

}  // namespace dohpool::security
