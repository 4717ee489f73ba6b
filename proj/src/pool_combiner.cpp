// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "dohpool/pool_combiner.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

namespace dohpool {

namespace {

// Successful responses in configuration order, per policy.
std::vector<const doh::ResolverResponse*> successful(const CombineInput& input) {
  std::set<std::string> labels;
  for (const auto& r : input.responses) {
    if (!labels.insert(r.resolver).second)
      throw std::invalid_argument("duplicate resolver label: " + r.resolver);
  }
  std::vector<const doh::ResolverResponse*> out;
  for (const auto& r : input.responses) {
    if (!r.ok()) continue;
    if (input.empty_is_failure && r.answers().empty()) continue;
    out.push_back(&r);
  }
  return out;
}

}  // namespace

std::string CombineError::text() const {
  if (kind == Kind::InsufficientResponders)
    return "insufficient responders: " + std::to_string(responders) + " of " +
           std::to_string(required) + " required";
  return "empty pool: shortest response list has no records";
}

CombineOutcome combine_pool(const CombineInput& input) {
  const auto s = successful(input);
  const std::size_t required = std::max<std::size_t>(input.min_responders, 1);
  if (s.size() < required)
    return CombineError{CombineError::Kind::InsufficientResponders, s.size(),
                        required};

  std::size_t k = s.front()->answers().size();
  for (const auto* r : s) k = std::min(k, r->answers().size());

  if (k == 0)
    return CombineError{CombineError::Kind::EmptyPool, s.size(), required};

  AddressPool pool;
  pool.k = k;
  pool.n_used = s.size();
  pool.records.reserve(k * s.size());
  for (std::size_t i = 0; i < k; ++i)
    for (const auto* r : s)
      pool.records.push_back(PoolEntry{r->answers()[i], r->resolver});
  return pool;
}

VoteOutcome majority_vote(const CombineInput& input) {
  const auto s = successful(input);
  const std::size_t required = std::max<std::size_t>(input.min_responders, 1);
  if (s.size() < required)
    return CombineError{CombineError::Kind::InsufficientResponders, s.size(),
                        required};

  using Key = std::pair<dns::AddressType, std::vector<std::uint8_t>>;
  struct Tally {
    std::size_t supporters = 0;
    std::uint32_t min_ttl = dns::kMaxTtl;
    std::string name;        // from the first supporting record
    std::size_t first = 0;   // first supporter's position, for stability
  };
  std::map<Key, Tally> tallies;

  for (std::size_t j = 0; j < s.size(); ++j) {
    std::set<Key> seen;  // one vote per responder per address
    for (const auto& rec : s[j]->answers()) {
      const Key key{rec.rtype, rec.address};
      auto [it, inserted] = tallies.try_emplace(key);
      auto& tally = it->second;
      if (inserted) {
        tally.name = rec.name;
        tally.first = j;
      }
      tally.min_ttl = std::min(tally.min_ttl, rec.ttl);
      if (seen.insert(key).second) ++tally.supporters;
    }
  }

  std::vector<std::pair<Key, Tally>> included;
  for (auto& [key, tally] : tallies)
    if (2 * tally.supporters > s.size()) included.emplace_back(key, tally);

  std::sort(included.begin(), included.end(), [](const auto& a, const auto& b) {
    if (a.second.supporters != b.second.supporters)
      return a.second.supporters > b.second.supporters;
    return a.first.second < b.first.second;  // lexicographic address bytes
  });

  std::vector<dns::AddressRecord> out;
  out.reserve(included.size());
  for (const auto& [key, tally] : included) {
    dns::AddressRecord rec;
    rec.name = tally.name;
    rec.rtype = key.first;
    rec.ttl = tally.min_ttl;
    rec.address = key.second;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<dns::AddressRecord> pool_to_answers(const AddressPool& pool,
                                                const dns::Question& question) {
  std::vector<dns::AddressRecord> out;
  if (pool.empty()) return out;

  std::uint32_t min_ttl = dns::kMaxTtl;
  for (const auto& entry : pool.records)
    min_ttl = std::min(min_ttl, entry.record.ttl);

  out.reserve(pool.records.size());
  for (const auto& entry : pool.records) {
    dns::AddressRecord rec = entry.record;
    rec.name = question.qname;
    rec.ttl = min_ttl;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace dohpool
