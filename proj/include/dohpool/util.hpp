// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace dohpool::util {

// RFC 4648 §5 base64url, emitted without padding (RFC 8484 §6).
std::string base64url_encode(std::span<const std::uint8_t> data);

// Seed mixer for deriving independent per-run/per-partition seeds from
// one master seed.
std::uint64_t splitmix64(std::uint64_t x);

struct ParsedUrl {
  std::string scheme;
  std::string host;
  std::uint16_t port = 0;  // 0 = scheme default
  std::string path;        // includes query string; "/" when absent
};

// Minimal http(s) URL splitter; handles bracketed IPv6 hosts.
std::optional<ParsedUrl> parse_url(const std::string& url);

}  // namespace dohpool::util
