// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "dohpool/adversary_sim.hpp"
#include "dohpool/security_model.hpp"
#include "support/generators.hpp"
#include "support/mock_doh_server.hpp"

using namespace dohpool;
using sim::AttackScenario;
using sim::AttackStrategy;
using sim::ScenarioPolicy;

namespace {

AttackScenario base_scenario(std::size_t n, std::set<std::size_t> compromised,
                             AttackStrategy strategy,
                             std::size_t benign_count = 4) {
  AttackScenario s;
  s.n = n;
  s.compromised = std::move(compromised);
  s.strategy = std::move(strategy);
  s.benign_template = sim::default_benign_template(benign_count);
  s.seed = 7;
  return s;
}

}  // namespace

TEST_CASE("overwhelm: one attacker with 100 addresses is held to 1/3") {
  const auto scenario =
      base_scenario(3, {0}, AttackStrategy::overwhelm(100), 4);
  const auto outcome = sim::run_scenario(scenario, ScenarioPolicy{});

  CHECK_FALSE(outcome.servfail);
  CHECK(outcome.pool.k == 4);
  CHECK(outcome.pool.records.size() == 12);
  CHECK(outcome.attacker_entries == 4);
  CHECK(outcome.attacker_fraction == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(outcome.attacker_fraction * 3.0 == doctest::Approx(1.0));
}

TEST_CASE("overwhelm against the naive union wins 100/108") {
  const auto scenario =
      base_scenario(3, {0}, AttackStrategy::overwhelm(100), 4);
  const auto outcome = sim::run_naive_baseline(scenario);

  CHECK(outcome.pool.records.size() == 108);
  CHECK(outcome.attacker_entries == 100);
  CHECK(outcome.attacker_fraction ==
        doctest::Approx(100.0 / 108.0).epsilon(1e-15));
  CHECK(outcome.attacker_fraction > 0.5);
}

TEST_CASE("starve empties the pool under paper-literal policy") {
  const auto scenario = base_scenario(3, {0}, AttackStrategy::starve(), 4);
  const auto outcome = sim::run_scenario(scenario, ScenarioPolicy{});

  CHECK_FALSE(outcome.servfail);  // a DoS, not a SERVFAIL
  CHECK(outcome.pool.records.empty());
  CHECK(outcome.pool.k == 0);
  CHECK(outcome.attacker_fraction == 0.0);
}

TEST_CASE("starve is neutralized by empty_is_failure") {
  const auto scenario = base_scenario(3, {0}, AttackStrategy::starve(), 4);
  ScenarioPolicy policy;
  policy.min_responders = 2;
  policy.empty_is_failure = true;
  const auto outcome = sim::run_scenario(scenario, policy);

  CHECK_FALSE(outcome.servfail);
  CHECK(outcome.pool.n_used == 2);
  CHECK(outcome.pool.records.size() == 8);
  CHECK(outcome.attacker_fraction == 0.0);
}

TEST_CASE("honest fleet has zero attacker fraction") {
  const auto scenario = base_scenario(3, {}, AttackStrategy::honest(), 4);
  const auto outcome = sim::run_scenario(scenario, ScenarioPolicy{});
  CHECK(outcome.attacker_fraction == 0.0);
  CHECK(outcome.pool.records.size() == 12);

  // Baseline on an honest fleet serves the same multiset of addresses.
  const auto baseline = sim::run_naive_baseline(scenario);
  CHECK(baseline.pool.records.size() == 12);
  CHECK(baseline.attacker_fraction == 0.0);
}

TEST_CASE("all compromised means full control") {
  const auto scenario =
      base_scenario(3, {0, 1, 2}, AttackStrategy::overwhelm(5), 4);
  const auto outcome = sim::run_naive_baseline(scenario);
  CHECK(outcome.attacker_fraction == 1.0);

  const auto combined = sim::run_scenario(scenario, ScenarioPolicy{});
  CHECK(combined.attacker_fraction == 1.0);
}

TEST_CASE("duplicate strategy floods one address but stays weight-capped") {
  const auto dup = dns::AddressRecord::from_text("attacker.test", 60,
                                                 "203.0.113.66");
  const auto scenario =
      base_scenario(4, {1}, AttackStrategy::duplicate(dup, 50), 5);
  const auto outcome = sim::run_scenario(scenario, ScenarioPolicy{});

  CHECK(outcome.pool.k == 5);
  CHECK(outcome.pool.records.size() == 20);
  CHECK(outcome.attacker_entries == 5);
  for (const auto& entry : outcome.pool.records)
    if (entry.resolver == "r1") CHECK(entry.record.address == dup.address);
}

TEST_CASE("substitute strategy serves the attacker's list") {
  std::vector<dns::AddressRecord> fake;
  for (int i = 1; i <= 4; ++i)
    fake.push_back(dns::AddressRecord::from_text(
        "attacker.test", 60, "203.0.113." + std::to_string(i)));
  const auto scenario =
      base_scenario(3, {2}, AttackStrategy::substitute(fake), 4);
  const auto outcome = sim::run_scenario(scenario, ScenarioPolicy{});

  CHECK(outcome.pool.records.size() == 12);
  CHECK(outcome.attacker_entries == 4);
  CHECK(outcome.attacker_fraction == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("scenario runs are deterministic under a fixed seed") {
  auto scenario = base_scenario(5, {1, 3}, AttackStrategy::overwhelm(9), 6);
  scenario.seed = 12345;
  const auto a = sim::run_scenario(scenario, ScenarioPolicy{});
  const auto b = sim::run_scenario(scenario, ScenarioPolicy{});
  REQUIRE(a.pool.records.size() == b.pool.records.size());
  CHECK(a.pool.records == b.pool.records);
  CHECK(a.attacker_fraction == b.attacker_fraction);

  scenario.seed = 54321;
  const auto c = sim::run_scenario(scenario, ScenarioPolicy{});
  CHECK(c.pool.records.size() == a.pool.records.size());
}

TEST_CASE("benign order jitter shuffles per resolver but keeps the multiset") {
  auto scenario = base_scenario(4, {}, AttackStrategy::honest(), 8);
  const auto responses = sim::synthesize_responses(scenario);
  REQUIRE(responses.size() == 4);

  auto sorted_template = scenario.benign_template;
  std::sort(sorted_template.begin(), sorted_template.end(),
            [](const auto& a, const auto& b) { return a.address < b.address; });
  bool any_order_differs = false;
  for (const auto& r : responses) {
    auto list = r.answers();
    REQUIRE(list.size() == 8);
    if (list != scenario.benign_template) any_order_differs = true;
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
      return a.address < b.address;
    });
    CHECK(list == sorted_template);
  }
  CHECK(any_order_differs);
}

TEST_CASE("property: below-threshold attackers never reach fraction y") {
  test::Gen gen(0xdef);
  const AttackStrategy::Kind kinds[] = {
      AttackStrategy::Kind::Honest, AttackStrategy::Kind::Overwhelm,
      AttackStrategy::Kind::Starve, AttackStrategy::Kind::Substitute,
      AttackStrategy::Kind::Duplicate};

  for (int iter = 0; iter < 2000; ++iter) {
    const std::size_t n = gen.between(1, 9);
    const double y = 0.05 + 0.95 * gen.uniform();
    const std::size_t threshold = security::min_compromised_resolvers(n, y);

    AttackScenario scenario;
    scenario.n = n;
    scenario.seed = gen.u64();
    scenario.benign_template = sim::default_benign_template(gen.between(1, 6));
    while (scenario.compromised.size() + 1 < threshold)
      scenario.compromised.insert(gen.index(n));

    const auto kind = kinds[gen.index(5)];
    switch (kind) {
      case AttackStrategy::Kind::Overwhelm:
        scenario.strategy =
            AttackStrategy::overwhelm(1 + gen.index(gen.chance(0.2) ? 500 : 8));
        break;
      case AttackStrategy::Kind::Starve:
        scenario.strategy = AttackStrategy::starve();
        break;
      case AttackStrategy::Kind::Substitute: {
        std::vector<dns::AddressRecord> list;
        const std::size_t len = 1 + gen.index(12);
        for (std::size_t i = 0; i < len; ++i)
          list.push_back(gen.address_record());
        scenario.strategy = AttackStrategy::substitute(std::move(list));
        break;
      }
      case AttackStrategy::Kind::Duplicate:
        scenario.strategy = AttackStrategy::duplicate(gen.address_record(),
                                                      1 + gen.index(200));
        break;
      case AttackStrategy::Kind::Honest:
        scenario.strategy = AttackStrategy::honest();
        break;
    }

    ScenarioPolicy policy;
    policy.empty_is_failure = gen.chance(0.3);
    policy.min_responders = 1;

    const auto outcome = sim::run_scenario(scenario, policy);
    if (outcome.servfail) continue;  // everyone starved in availability mode
    CHECK(outcome.attacker_fraction < y);
  }
}

TEST_CASE("overwhelm never exceeds the compromised share of resolvers") {
  test::Gen gen(0xbeef);
  for (int iter = 0; iter < 300; ++iter) {
    const std::size_t n = gen.between(1, 8);
    AttackScenario scenario;
    scenario.n = n;
    scenario.seed = gen.u64();
    scenario.benign_template = sim::default_benign_template(gen.between(1, 5));
    const std::size_t c = gen.index(n + 1);
    while (scenario.compromised.size() < c)
      scenario.compromised.insert(gen.index(n));
    scenario.strategy = AttackStrategy::overwhelm(1 + gen.index(300));

    const auto outcome = sim::run_scenario(scenario, ScenarioPolicy{});
    CHECK(outcome.attacker_fraction <=
          static_cast<double>(c) / static_cast<double>(n) + 1e-12);
  }
}

TEST_CASE("baseline is breakable by a single attacker for any y < 1") {
  // Constructive: benign lists of 4, so 2 benign resolvers contribute 8
  // entries; an attacker list of length L yields fraction L/(L+8), which
  // crosses any y < 1 once L > 8y/(1-y).
  for (const double y : {0.5, 0.75, 0.9, 0.99}) {
    const auto needed =
        static_cast<std::size_t>(std::ceil(8.0 * y / (1.0 - y))) + 1;
    const auto scenario =
        base_scenario(3, {0}, AttackStrategy::overwhelm(needed), 4);
    const auto naive = sim::run_naive_baseline(scenario);
    CHECK(naive.attacker_fraction >= y);

    const auto defended = sim::run_scenario(scenario, ScenarioPolicy{});
    CHECK(defended.attacker_fraction < y);
  }
}

TEST_CASE("sweep matches the exact binomial tail") {
  sim::SweepParams params;
  params.base = base_scenario(3, {}, AttackStrategy::overwhelm(10), 4);
  params.p_compromise = 0.1;
  params.y = 2.0 / 3.0;
  params.runs = 100000;
  params.seed = 2024;

  const auto result = sweep(params, ScenarioPolicy{});

  security::ThreatParams threat;
  threat.n = 3;
  threat.x = 2.0 / 3.0;
  threat.y = 2.0 / 3.0;
  threat.p_attack = 0.1;
  const double exact = security::attack_probability_exact(threat);

  CHECK(std::abs(result.success_rate - exact) <= 4.0 * result.stderr_ + 1e-12);
  CHECK(result.rows.size() == params.runs);
}

TEST_CASE("sweep at the probability edges") {
  sim::SweepParams params;
  params.base = base_scenario(3, {}, AttackStrategy::substitute(
                                         sim::default_benign_template(4)),
                              4);
  params.y = 0.5;
  params.runs = 2000;
  params.seed = 5;

  params.p_compromise = 0.0;
  CHECK(sweep(params, ScenarioPolicy{}).success_rate == 0.0);

  params.p_compromise = 1.0;
  CHECK(sweep(params, ScenarioPolicy{}).success_rate == 1.0);
}

TEST_CASE("scenario json round-trip") {
  const std::string text = R"({
    "n": 3,
    "compromised": [0],
    "strategy": {"kind": "overwhelm", "list_length": 100},
    "benign_template": ["192.0.2.1", "192.0.2.2", "192.0.2.3", "192.0.2.4"],
    "seed": 42,
    "policy": {"min_responders": 3, "empty_is_failure": false},
    "y": 0.5
  })";
  const auto file = sim::parse_scenario(text);
  CHECK(file.scenario.n == 3);
  CHECK(file.scenario.compromised == std::set<std::size_t>{0});
  CHECK(file.scenario.strategy.kind == AttackStrategy::Kind::Overwhelm);
  CHECK(file.scenario.strategy.list_length == 100);
  CHECK(file.scenario.benign_template.size() == 4);
  CHECK(file.scenario.seed == 42);
  CHECK(file.policy.min_responders == 3);
  CHECK(file.y == 0.5);

  const auto outcome = sim::run_scenario(file.scenario, file.policy);
  CHECK(outcome.attacker_fraction == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS(sim::parse_scenario("{\"n\": 0}"));
  CHECK_THROWS(sim::parse_scenario(
      R"({"n": 2, "compromised": [5], "strategy": {"kind": "starve"}})"));
  CHECK_THROWS(sim::parse_scenario(
      R"({"n": 2, "strategy": {"kind": "quantum"}})"));
}

TEST_CASE("scenario outcome is reproduced over a real RFC 8484 fleet") {
  // Same fleet, but each synthesized resolver becomes a live HTTPS DoH
  // server and the answers travel through the real client path.
  const auto scenario =
      base_scenario(3, {0}, AttackStrategy::overwhelm(100), 4);
  const auto synthesized = sim::synthesize_responses(scenario);

  std::vector<std::unique_ptr<test::MockDohServer>> fleet;
  CombineInput input;
  input.min_responders = 3;
  for (std::size_t i = 0; i < scenario.n; ++i) {
    fleet.push_back(std::make_unique<test::MockDohServer>(
        test::MockDohServer::Options{.answers = synthesized[i].answers()}));
    const auto response =
        doh::query(fleet.back()->endpoint(sim::resolver_label(i)),
                   {"pool.ntp.test", dns::kTypeA, dns::kClassIn},
                   std::chrono::milliseconds(3000));
    REQUIRE(response.ok());
    input.responses.push_back(response);
  }

  const auto outcome = combine_pool(input);
  const auto& pool = std::get<AddressPool>(outcome);
  std::size_t attacker_entries = 0;
  for (const auto& entry : pool.records)
    if (entry.resolver == "r0") ++attacker_entries;

  const auto in_process = sim::run_scenario(scenario, ScenarioPolicy{});
  CHECK(pool.k == in_process.pool.k);
  CHECK(pool.records.size() == in_process.pool.records.size());
  CHECK(attacker_entries == in_process.attacker_entries);
}

TEST_CASE("sweep csv shape") {
  sim::SweepParams params;
  params.base = base_scenario(2, {}, AttackStrategy::starve(), 3);
  params.p_compromise = 0.5;
  params.y = 0.5;
  params.runs = 10;
  params.seed = 1;
  const auto result = sweep(params, ScenarioPolicy{});
  const auto csv = sim::sweep_to_csv(result);
  CHECK(csv.rfind("run,n_compromised,attacker_fraction,servfail,success\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
}
