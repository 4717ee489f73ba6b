// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dohpool/dns_codec.hpp"

namespace dohpool::doh {

inline constexpr std::string_view kDnsMediaType = "application/dns-message";
inline constexpr std::size_t kMaxGetUrlLength = 2048;

// One trusted upstream DoH resolver. Immutable after construction; the
// scheme must be https — the trust model rests on the secure channel.
struct ResolverEndpoint {
  enum class Method { Post, Get };

  std::string label;
  std::string url;
  Method method = Method::Post;
  std::chrono::milliseconds timeout{3000};

  // Optional trust-anchor override for the TLS handshake. Certificate
  // validation itself is always on; these only replace the default
  // store (deployment pinning, test harnesses with their own CA).
  std::string ca_cert_path;
  std::string ca_cert_pem;
};

struct Failure {
  enum class Kind {
    Timeout,
    TransportError,
    HttpStatus,
    MalformedDnsPayload,
    DnsError,
  };

  Kind kind = Kind::TransportError;
  int http_status = 0;      // set for Kind::HttpStatus
  std::uint8_t rcode = 0;   // set for Kind::DnsError
  std::string detail;
};

std::string_view failure_kind_name(Failure::Kind kind);
std::string failure_text(const Failure& f);

// Per-resolver outcome of one query. The answer list preserves the
// upstream answer-section order exactly; truncation downstream takes a
// prefix, so order is semantics-bearing.
struct ResolverResponse {
  std::string resolver;
  std::variant<std::vector<dns::AddressRecord>, Failure> outcome;
  std::chrono::milliseconds rtt{0};
  std::optional<std::uint8_t> rcode;  // present when a DNS message came back

  bool ok() const { return outcome.index() == 0; }
  const std::vector<dns::AddressRecord>& answers() const {
    return std::get<0>(outcome);
  }
  const Failure& failure() const { return std::get<1>(outcome); }

  static ResolverResponse from_answers(std::string resolver,
                                       std::vector<dns::AddressRecord> answers,
                                       std::chrono::milliseconds rtt = {}) {
    return ResolverResponse{std::move(resolver), std::move(answers), rtt,
                            std::uint8_t{0}};
  }
  static ResolverResponse from_failure(std::string resolver, Failure f,
                                       std::chrono::milliseconds rtt = {}) {
    return ResolverResponse{std::move(resolver), std::move(f), rtt,
                            std::nullopt};
  }
};

// Transport-neutral description of one RFC 8484 exchange.
struct HttpRequestSpec {
  std::string method;  // "POST" or "GET"
  std::string url;     // full URL; GET carries ?dns=<base64url, no padding>
  std::vector<std::pair<std::string, std::string>> headers;
  std::vector<std::uint8_t> body;  // POST only: raw DNS wire message
};

/// Builds the RFC 8484 request for msg. The message id is forced to 0
/// (responses are matched by question, not id). Throws
/// dns::MessageTooLarge for GET when the URL would exceed 2048 bytes;
/// callers fall back to POST.
HttpRequestSpec build_doh_request(const ResolverEndpoint& endpoint,
                                  const dns::DnsMessage& msg);

/// Issues one DoH query within the given time budget. Every failure is
/// returned as a value; nothing escapes to the caller, so a fan-out
/// layer can observe partial failure. On success the answer list holds
/// exactly the upstream A/AAAA records matching the question's qtype,
/// in upstream order, duplicates preserved.
ResolverResponse query(const ResolverEndpoint& endpoint,
                       const dns::Question& question,
                       std::chrono::milliseconds deadline);

}  // namespace dohpool::doh
