// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "dohpool/dns_codec.hpp"
#include "dohpool/doh_client.hpp"

namespace dohpool {

// Per-resolver responses plus the combine policy. Responses must carry
// distinct resolver labels and are taken in configuration order.
struct CombineInput {
  std::vector<doh::ResolverResponse> responses;
  std::size_t min_responders = 1;
  // false: paper-literal semantics — an empty answer list participates
  //        in the min, so one starving resolver empties the whole pool
  //        (the accepted DoS).
  // true:  availability mode — empty lists are treated like failures
  //        and excluded from the responder set.
  bool empty_is_failure = false;
};

struct PoolEntry {
  dns::AddressRecord record;
  std::string resolver;  // provenance

  bool operator==(const PoolEntry&) const = default;
};

// Combined ordered multiset. Duplicate addresses stay distinct entries:
// the downstream application must weigh repeated addresses as repeated
// servers for the equal-weight guarantee to hold.
struct AddressPool {
  std::vector<PoolEntry> records;  // n_used * k entries, round-robin order
  std::size_t k = 0;               // truncation length used
  std::size_t n_used = 0;          // contributing resolvers

  bool empty() const { return records.empty(); }
};

struct CombineError {
  enum class Kind {
    // Fewer successful responses than the policy demands; SERVFAIL at
    // the service layer.
    InsufficientResponders,
    // k = 0 with empty_is_failure=false: the pool is valid but empty.
    EmptyPool,
  };

  Kind kind = Kind::InsufficientResponders;
  std::size_t responders = 0;
  std::size_t required = 0;

  std::string text() const;
};

using CombineOutcome = std::variant<AddressPool, CombineError>;
using VoteOutcome = std::variant<std::vector<dns::AddressRecord>, CombineError>;

/// Shortest-list truncation combine. Successful responses are truncated
/// to the shortest list's length k (prefix, upstream order) and
/// interleaved round-robin: entry i*|S|+j is record i of responder j.
/// Every contributing resolver ends up with exactly k entries, which is
/// what caps an attacker at (compromised responders)/|S| of the pool.
CombineOutcome combine_pool(const CombineInput& input);

/// Strict-majority variant: an address is included iff more than |S|/2
/// distinct responders returned it (per-responder duplicates count
/// once). Output is ordered by descending supporter count, ties broken
/// by address bytes; TTL is the minimum among supporting records.
VoteOutcome majority_vote(const CombineInput& input);

/// Bridges a pool to answer records: query name and qtype, TTL = the
/// minimum across the pool, provenance dropped, order preserved.
std::vector<dns::AddressRecord> pool_to_answers(const AddressPool& pool,
                                                const dns::Question& question);

}  // namespace dohpool
