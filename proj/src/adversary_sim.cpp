// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "dohpool/adversary_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dohpool/security_model.hpp"
#include "dohpool/util.hpp"

namespace dohpool::sim {

namespace {

using nlohmann::json;

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  return util::splitmix64(seed ^ (0xa5a5a5a5ULL + stream * 0x9e3779b9ULL));
}

// Implementation-defined std::shuffle would not be reproducible; this
// Fisher-Yates with plain modulo draws is.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng() % i]);
}

dns::AddressRecord attacker_record(dns::AddressType type, std::mt19937_64& rng) {
  dns::AddressRecord rec;
  rec.name = "attacker.test";
  rec.rtype = type;
  rec.ttl = 60;
  rec.address.resize(dns::address_length(type));
  for (auto& b : rec.address) b = static_cast<std::uint8_t>(rng() & 0xff);
  return rec;
}

std::size_t attacker_entry_count(const AddressPool& pool,
                                 const AttackScenario& scenario) {
  std::set<std::string> bad;
  for (const auto i : scenario.compromised) bad.insert(resolver_label(i));
  std::size_t hits = 0;
  for (const auto& entry : pool.records)
    if (bad.count(entry.resolver)) ++hits;
  return hits;
}

void fill_fraction(ScenarioOutcome& outcome, const AttackScenario& scenario) {
  outcome.attacker_entries = attacker_entry_count(outcome.pool, scenario);
  outcome.attacker_fraction =
      outcome.pool.records.empty()
          ? 0.0
          : static_cast<double>(outcome.attacker_entries) /
                static_cast<double>(outcome.pool.records.size());
}

std::vector<ResolverNote> make_notes(
    const AttackScenario& scenario,
    const std::vector<doh::ResolverResponse>& responses) {
  std::vector<ResolverNote> notes;
  notes.reserve(responses.size());
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const auto& r = responses[i];
    ResolverNote note;
    note.resolver = r.resolver;
    note.compromised = scenario.compromised.count(i) > 0;
    note.summary = r.ok() ? std::to_string(r.answers().size()) + " records"
                          : doh::failure_text(r.failure());
    notes.push_back(std::move(note));
  }
  return notes;
}

AttackStrategy strategy_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "honest") return AttackStrategy::honest();
  if (kind == "overwhelm")
    return AttackStrategy::overwhelm(j.at("list_length").get<std::size_t>());
  if (kind == "starve") return AttackStrategy::starve();
  if (kind == "substitute") {
    std::vector<dns::AddressRecord> records;
    for (const auto& a : j.at("addresses"))
      records.push_back(dns::AddressRecord::from_text(
          "attacker.test", 60, a.get<std::string>()));
    return AttackStrategy::substitute(std::move(records));
  }
  if (kind == "duplicate")
    return AttackStrategy::duplicate(
        dns::AddressRecord::from_text("attacker.test", 60,
                                      j.at("address").get<std::string>()),
        j.at("count").get<std::size_t>());
  throw std::invalid_argument("unknown strategy kind: " + kind);
}

}  // namespace

AttackStrategy AttackStrategy::overwhelm(std::size_t list_length) {
  AttackStrategy s;
  s.kind = Kind::Overwhelm;
  s.list_length = list_length;
  return s;
}

AttackStrategy AttackStrategy::starve() {
  AttackStrategy s;
  s.kind = Kind::Starve;
  return s;
}

AttackStrategy AttackStrategy::substitute(
    std::vector<dns::AddressRecord> addresses) {
  AttackStrategy s;
  s.kind = Kind::Substitute;
  s.addresses = std::move(addresses);
  return s;
}

AttackStrategy AttackStrategy::duplicate(dns::AddressRecord address,
                                         std::size_t count) {
  AttackStrategy s;
  s.kind = Kind::Duplicate;
  s.address = std::move(address);
  s.count = count;
  return s;
}

std::string_view strategy_kind_name(AttackStrategy::Kind kind) {
  switch (kind) {
    case AttackStrategy::Kind::Honest:     return "honest";
    case AttackStrategy::Kind::Overwhelm:  return "overwhelm";
    case AttackStrategy::Kind::Starve:     return "starve";
    case AttackStrategy::Kind::Substitute: return "substitute";
    case AttackStrategy::Kind::Duplicate:  return "duplicate";
  }
  return "?";
}

void AttackScenario::validate() const {
  if (n < 1) throw std::invalid_argument("scenario needs n >= 1");
  for (const auto i : compromised)
    if (i >= n)
      throw std::invalid_argument("compromised index " + std::to_string(i) +
                                  " out of range for n=" + std::to_string(n));
}

std::string resolver_label(std::size_t index) {
  return "r" + std::to_string(index);
}

std::vector<dns::AddressRecord> default_benign_template(std::size_t count) {
  if (count > 254) throw std::invalid_argument("template limited to 254 hosts");
  std::vector<dns::AddressRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(dns::AddressRecord::from_text(
        "pool.ntp.test", 300, "192.0.2." + std::to_string(i + 1)));
  return out;
}

std::vector<doh::ResolverResponse> synthesize_responses(
    const AttackScenario& scenario) {
  scenario.validate();
  const dns::AddressType attack_type = scenario.benign_template.empty()
                                           ? dns::AddressType::A
                                           : scenario.benign_template[0].rtype;

  std::vector<doh::ResolverResponse> responses;
  responses.reserve(scenario.n);
  for (std::size_t i = 0; i < scenario.n; ++i) {
    std::mt19937_64 rng(derive(scenario.seed, i));
    std::vector<dns::AddressRecord> list;

    if (scenario.compromised.count(i) == 0 ||
        scenario.strategy.kind == AttackStrategy::Kind::Honest) {
      list = scenario.benign_template;
      if (scenario.jitter_benign_order) deterministic_shuffle(list, rng);
    } else {
      switch (scenario.strategy.kind) {
        case AttackStrategy::Kind::Overwhelm:
          list.reserve(scenario.strategy.list_length);
          for (std::size_t j = 0; j < scenario.strategy.list_length; ++j)
            list.push_back(attacker_record(attack_type, rng));
          break;
        case AttackStrategy::Kind::Starve:
          break;
        case AttackStrategy::Kind::Substitute:
          list = scenario.strategy.addresses;
          break;
        case AttackStrategy::Kind::Duplicate:
          list.assign(scenario.strategy.count, scenario.strategy.address);
          break;
        case AttackStrategy::Kind::Honest:
          break;
      }
    }
    responses.push_back(
        doh::ResolverResponse::from_answers(resolver_label(i), std::move(list)));
  }
  return responses;
}

ScenarioOutcome run_scenario(const AttackScenario& scenario,
                             const ScenarioPolicy& policy) {
  const auto responses = synthesize_responses(scenario);

  CombineInput input;
  input.responses = responses;
  input.min_responders =
      policy.min_responders == 0 ? scenario.n : policy.min_responders;
  input.empty_is_failure = policy.empty_is_failure;

  ScenarioOutcome outcome;
  outcome.notes = make_notes(scenario, responses);

  const auto combined = combine_pool(input);
  if (const auto* pool = std::get_if<AddressPool>(&combined)) {
    outcome.pool = *pool;
    fill_fraction(outcome, scenario);
  } else {
    const auto& err = std::get<CombineError>(combined);
    if (err.kind == CombineError::Kind::InsufficientResponders) {
      outcome.servfail = true;
    } else {
      // Empty pool: a served (if vacuous) answer, not a SERVFAIL.
      outcome.pool.k = 0;
      outcome.pool.n_used = err.responders;
    }
  }
  return outcome;
}

ScenarioOutcome run_naive_baseline(const AttackScenario& scenario) {
  const auto responses = synthesize_responses(scenario);

  ScenarioOutcome outcome;
  outcome.notes = make_notes(scenario, responses);
  for (const auto& r : responses) {
    if (!r.ok()) continue;
    ++outcome.pool.n_used;
    for (const auto& rec : r.answers())
      outcome.pool.records.push_back(PoolEntry{rec, r.resolver});
  }
  fill_fraction(outcome, scenario);
  return outcome;
}

SweepResult sweep(const SweepParams& params, const ScenarioPolicy& policy) {
  if (params.runs < 1) throw std::invalid_argument("sweep needs runs >= 1");
  if (!(params.p_compromise >= 0.0 && params.p_compromise <= 1.0))
    throw std::invalid_argument("p_compromise must be in [0,1]");
  if (!(params.y > 0.0 && params.y <= 1.0))
    throw std::invalid_argument("y must be in (0,1]");

  SweepResult result;
  result.rows.reserve(params.runs);
  std::size_t successes = 0;

  for (std::size_t run = 0; run < params.runs; ++run) {
    AttackScenario scenario = params.base;
    scenario.seed = derive(params.seed, run);

    std::mt19937_64 rng(derive(params.seed, 0x70000000ULL + run));
    scenario.compromised.clear();
    for (std::size_t i = 0; i < scenario.n; ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      if (u < params.p_compromise) scenario.compromised.insert(i);
    }

    const auto outcome = run_scenario(scenario, policy);

    SweepRow row;
    row.run = run;
    row.n_compromised = scenario.compromised.size();
    row.attacker_fraction = outcome.attacker_fraction;
    row.servfail = outcome.servfail;
    // Integer comparison so y*total landing exactly on an entry count
    // still counts as success.
    const std::size_t total = outcome.pool.records.size();
    if (total > 0)
      row.success = outcome.attacker_entries >=
                    security::ceil_fraction(params.y, total);
    if (row.success) ++successes;
    result.rows.push_back(row);
  }

  result.success_rate =
      static_cast<double>(successes) / static_cast<double>(params.runs);
  result.stderr_ = std::sqrt(result.success_rate * (1.0 - result.success_rate) /
                             static_cast<double>(params.runs));
  return result;
}

std::string sweep_to_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "run,n_compromised,attacker_fraction,servfail,success\n";
  out.precision(10);
  for (const auto& row : result.rows)
    out << row.run << ',' << row.n_compromised << ',' << row.attacker_fraction
        << ',' << (row.servfail ? 1 : 0) << ',' << (row.success ? 1 : 0)
        << '\n';
  return out.str();
}

ScenarioFile parse_scenario(const std::string& json_text) {
  const json j = json::parse(json_text);

  ScenarioFile file;
  file.scenario.n = j.at("n").get<std::size_t>();
  if (j.contains("compromised"))
    for (const auto& idx : j.at("compromised"))
      file.scenario.compromised.insert(idx.get<std::size_t>());
  if (j.contains("strategy"))
    file.scenario.strategy = strategy_from_json(j.at("strategy"));
  if (j.contains("benign_template")) {
    const std::uint32_t ttl = j.value("benign_ttl", 300u);
    for (const auto& a : j.at("benign_template"))
      file.scenario.benign_template.push_back(dns::AddressRecord::from_text(
          "pool.ntp.test", ttl, a.get<std::string>()));
  } else {
    file.scenario.benign_template = default_benign_template(4);
  }
  file.scenario.seed = j.value("seed", std::uint64_t{1});
  file.scenario.jitter_benign_order = j.value("jitter_benign_order", true);

  if (j.contains("policy")) {
    const auto& p = j.at("policy");
    file.policy.min_responders = p.value("min_responders", std::size_t{0});
    file.policy.empty_is_failure = p.value("empty_is_failure", false);
  }
  file.y = j.value("y", 0.5);

  file.scenario.validate();
  return file;
}

ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace dohpool::sim
