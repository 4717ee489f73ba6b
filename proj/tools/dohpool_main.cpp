// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dohpool/adversary_sim.hpp"
#include "dohpool/log.hpp"
#include "dohpool/resolver_service.hpp"
#include "dohpool/security_model.hpp"

namespace {

using namespace dohpool;

// "2..12" or "3" or "2,5,9"
std::vector<std::size_t> parse_n_range(const std::string& text) {
  std::vector<std::size_t> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const std::size_t lo = std::stoul(text.substr(0, dots));
    const std::size_t hi = std::stoul(text.substr(dots + 2));
    if (lo == 0 || hi < lo) throw CLI::ValidationError("bad n range: " + text);
    for (std::size_t n = lo; n <= hi; ++n) out.push_back(n);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item =
        text.substr(start, comma == std::string::npos ? std::string::npos
                                                      : comma - start);
    if (!item.empty()) out.push_back(std::stoul(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw CLI::ValidationError("bad n range: " + text);
  return out;
}

std::vector<double> parse_p_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item =
        text.substr(start, comma == std::string::npos ? std::string::npos
                                                      : comma - start);
    if (!item.empty()) out.push_back(std::stod(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw CLI::ValidationError("bad p list: " + text);
  return out;
}

int cmd_serve(const std::string& config_path) {
  auto config = service::load_config(config_path);
  service::apply_env_overrides(config);
  return service::serve(std::move(config));
}

int cmd_query(const std::string& config_path, const std::string& name,
              const std::string& type) {
  auto config = service::load_config(config_path);
  service::apply_env_overrides(config);

  dns::Question question;
  question.qname = name;
  question.qtype = type == "AAAA" ? dns::kTypeAAAA : dns::kTypeA;

  service::ResolverService svc(config);  // no start(): one-shot, no sockets
  const CombineInput input = svc.fan_out(question);

  for (const auto& r : input.responses) {
    std::fprintf(stderr, "# %s: %s (%lld ms)\n", r.resolver.c_str(),
                 r.ok() ? (std::to_string(r.answers().size()) + " records").c_str()
                        : doh::failure_text(r.failure()).c_str(),
                 static_cast<long long>(r.rtt.count()));
  }

  if (config.mode == service::Mode::Majority) {
    const auto outcome = majority_vote(input);
    if (const auto* err = std::get_if<CombineError>(&outcome)) {
      std::fprintf(stderr, "error: %s\n", err->text().c_str());
      return 2;
    }
    std::printf("address,ttl\n");
    for (const auto& rec :
         std::get<std::vector<dns::AddressRecord>>(outcome))
      std::printf("%s,%u\n", rec.address_text().c_str(), rec.ttl);
    return 0;
  }

  const auto outcome = combine_pool(input);
  if (const auto* err = std::get_if<CombineError>(&outcome)) {
    if (err->kind == CombineError::Kind::InsufficientResponders) {
      std::fprintf(stderr, "error: %s\n", err->text().c_str());
      return 2;
    }
    std::printf("resolver,address,ttl\n");  // empty pool
    return 0;
  }
  const auto& pool = std::get<AddressPool>(outcome);
  std::fprintf(stderr, "# k=%zu n_used=%zu entries=%zu\n", pool.k, pool.n_used,
               pool.records.size());
  std::printf("resolver,address,ttl\n");
  for (const auto& entry : pool.records)
    std::printf("%s,%s,%u\n", entry.resolver.c_str(),
                entry.record.address_text().c_str(), entry.record.ttl);
  return 0;
}

int cmd_simulate(const std::string& scenario_path, bool with_baseline,
                 std::size_t sweep_runs, double sweep_p) {
  const auto file = sim::load_scenario(scenario_path);

  if (sweep_runs > 0) {
    sim::SweepParams params;
    params.base = file.scenario;
    params.p_compromise = sweep_p;
    params.y = file.y;
    params.runs = sweep_runs;
    params.seed = file.scenario.seed;
    const auto result = sim::sweep(params, file.policy);
    std::fputs(sim::sweep_to_csv(result).c_str(), stdout);
    std::fprintf(stderr, "# success_rate=%.6g stderr=%.3g runs=%zu\n",
                 result.success_rate, result.stderr_, result.rows.size());

    security::ThreatParams threat;
    threat.n = file.scenario.n;
    threat.x = file.y;
    threat.y = file.y;
    threat.p_attack = sweep_p;
    std::fprintf(stderr, "# analytic: paper=%.6g exact=%.6g\n",
                 security::attack_probability_paper(threat),
                 security::attack_probability_exact(threat));
    return 0;
  }

  const auto outcome = sim::run_scenario(file.scenario, file.policy);
  for (const auto& note : outcome.notes)
    std::fprintf(stderr, "# %s%s: %s\n", note.resolver.c_str(),
                 note.compromised ? " [compromised]" : "", note.summary.c_str());
  std::fprintf(stderr,
               "# combine: entries=%zu k=%zu n_used=%zu attacker_fraction=%.6g "
               "servfail=%d\n",
               outcome.pool.records.size(), outcome.pool.k, outcome.pool.n_used,
               outcome.attacker_fraction, outcome.servfail ? 1 : 0);
  std::printf("resolver,compromised,address,ttl\n");
  std::set<std::size_t> bad = file.scenario.compromised;
  for (const auto& entry : outcome.pool.records) {
    bool compromised = false;
    for (const auto i : bad)
      if (sim::resolver_label(i) == entry.resolver) compromised = true;
    std::printf("%s,%d,%s,%u\n", entry.resolver.c_str(), compromised ? 1 : 0,
                entry.record.address_text().c_str(), entry.record.ttl);
  }

  if (with_baseline) {
    const auto baseline = sim::run_naive_baseline(file.scenario);
    std::fprintf(stderr,
                 "# naive-baseline: entries=%zu attacker_fraction=%.6g\n",
                 baseline.pool.records.size(), baseline.attacker_fraction);
  }
  return 0;
}

int cmd_curve(const std::string& n_range, const std::string& p_list, double x,
              std::size_t trials, std::uint64_t seed) {
  const auto n_values = parse_n_range(n_range);
  const auto p_values = parse_p_list(p_list);
  const auto rows = security::security_curve(n_values, x, p_values, trials, seed);
  std::fputs(security::curve_to_csv(rows).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* level = std::getenv("DOHPOOL_LOG_LEVEL"))
    dohpool::log::set_level(dohpool::log::level_from_string(level));

  CLI::App app{
      "dohpool: trustworthy server-pool generation over distributed "
      "DNS-over-HTTPS resolvers"};
  app.require_subcommand(1);

  std::string config_path, name, qtype = "A", scenario_path;
  std::string n_range = "2..12", p_list = "0.1";
  double x = 0.5, sweep_p = 0.1;
  std::size_t trials = 0, sweep_runs = 0;
  std::uint64_t seed = 1;
  bool with_baseline = false;

  auto* serve = app.add_subcommand("serve", "run the DNS frontend");
  serve->add_option("--config", config_path, "JSON config file")->required();

  auto* query = app.add_subcommand(
      "query", "one-shot lookup printing the pool with provenance");
  query->add_option("--config", config_path, "JSON config file")->required();
  query->add_option("--name", name, "domain to resolve")->required();
  query->add_option("--type", qtype, "A or AAAA")
      ->check(CLI::IsMember({"A", "AAAA"}));

  auto* simulate =
      app.add_subcommand("simulate", "run an adversary scenario file");
  simulate->add_option("--scenario", scenario_path, "JSON scenario file")
      ->required();
  simulate->add_flag("--baseline", with_baseline,
                     "also run the naive no-truncation union");
  simulate->add_option("--sweep", sweep_runs,
                       "Monte Carlo family: number of runs with random "
                       "compromise patterns");
  simulate->add_option("--p-compromise", sweep_p,
                       "per-resolver compromise probability for --sweep");

  auto* curve = app.add_subcommand(
      "curve", "tabulate attack probability vs resolver count");
  curve->add_option("--n", n_range, "resolver counts, e.g. 2..12 or 3,5,9");
  curve->add_option("--p", p_list, "attack probabilities, e.g. 0.01,0.1");
  curve->add_option("--x", x, "resolver fraction the attacker must control");
  curve->add_option("--trials", trials,
                    "Monte Carlo trials per row (0 = analytic only)");
  curve->add_option("--seed", seed, "Monte Carlo master seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (serve->parsed()) return cmd_serve(config_path);
    if (query->parsed()) return cmd_query(config_path, name, qtype);
    if (simulate->parsed())
      return cmd_simulate(scenario_path, with_baseline, sweep_runs, sweep_p);
    if (curve->parsed()) return cmd_curve(n_range, p_list, x, trials, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
