// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dohpool/doh_client.hpp"
#include "dohpool/pool_combiner.hpp"

namespace dohpool::sim {

struct AttackStrategy {
  enum class Kind {
    Honest,      // compromised resolvers behave like benign ones
    Overwhelm,   // inflated list of attacker addresses
    Starve,      // empty answer list (the accepted DoS)
    Substitute,  // a fixed attacker-chosen list
    Duplicate,   // one address repeated `count` times
  };

  Kind kind = Kind::Honest;
  std::size_t list_length = 0;                     // Overwhelm
  std::vector<dns::AddressRecord> addresses;       // Substitute
  dns::AddressRecord address;                      // Duplicate
  std::size_t count = 0;                           // Duplicate

  static AttackStrategy honest() { return {}; }
  static AttackStrategy overwhelm(std::size_t list_length);
  static AttackStrategy starve();
  static AttackStrategy substitute(std::vector<dns::AddressRecord> addresses);
  static AttackStrategy duplicate(dns::AddressRecord address, std::size_t count);
};

std::string_view strategy_kind_name(AttackStrategy::Kind kind);

// A mock resolver fleet: n resolvers, the listed subset compromised and
// running `strategy`, the rest answering from benign_template (with
// seeded order jitter modeling pool round-robin rotation).
struct AttackScenario {
  std::size_t n = 3;
  std::set<std::size_t> compromised;
  AttackStrategy strategy;
  std::vector<dns::AddressRecord> benign_template;
  std::uint64_t seed = 1;
  bool jitter_benign_order = true;

  void validate() const;  // throws std::invalid_argument
};

struct ScenarioPolicy {
  std::size_t min_responders = 0;  // 0 = require all n resolvers
  bool empty_is_failure = false;
};

struct ResolverNote {
  std::string resolver;
  bool compromised = false;
  std::string summary;
};

struct ScenarioOutcome {
  AddressPool pool;                 // empty on SERVFAIL or empty-pool DoS
  std::size_t attacker_entries = 0; // pool entries with compromised provenance
  double attacker_fraction = 0.0;   // attacker_entries / total, 0 when empty
  bool servfail = false;
  std::vector<ResolverNote> notes;
};

std::string resolver_label(std::size_t index);

// 192.0.2.0/24 addresses (TEST-NET-1), TTL 300.
std::vector<dns::AddressRecord> default_benign_template(std::size_t count);

/// Synthesizes each resolver's response per its role; deterministic for
/// a fixed scenario seed.
std::vector<doh::ResolverResponse> synthesize_responses(
    const AttackScenario& scenario);

/// Runs the shortest-list combine over the synthesized fleet.
ScenarioOutcome run_scenario(const AttackScenario& scenario,
                             const ScenarioPolicy& policy);

/// Contrast baseline: the full union of all responses with no
/// truncation — the behavior the shortest-list combine exists to fix.
/// The returned pool does not satisfy the equal-weight invariant (k is
/// reported as 0).
ScenarioOutcome run_naive_baseline(const AttackScenario& scenario);

struct SweepParams {
  AttackScenario base;      // compromised set is redrawn per run
  double p_compromise = 0;  // independent per-resolver probability
  double y = 0.5;           // success = attacker fraction >= y
  std::size_t runs = 1000;
  std::uint64_t seed = 1;
};

struct SweepRow {
  std::size_t run = 0;
  std::size_t n_compromised = 0;
  double attacker_fraction = 0.0;
  bool servfail = false;
  bool success = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double success_rate = 0.0;
  double stderr_ = 0.0;
};

/// Monte Carlo family: redraws the compromise pattern per run at
/// p_compromise and aggregates the attack-success rate, for comparison
/// against the analytic model.
SweepResult sweep(const SweepParams& params, const ScenarioPolicy& policy);

std::string sweep_to_csv(const SweepResult& result);

struct ScenarioFile {
  AttackScenario scenario;
  ScenarioPolicy policy;
  double y = 0.5;
};

/// Loads a scenario description from a JSON file (keys: n, compromised,
/// strategy{kind,...}, benign_template, seed, policy{...}, y).
ScenarioFile load_scenario(const std::string& path);
ScenarioFile parse_scenario(const std::string& json_text);

}  // namespace dohpool::sim
