// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "dohpool/util.hpp"

#include <charconv>

namespace dohpool::util {

std::string base64url_encode(std::span<const std::uint8_t> data) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(kAlphabet[(v >> 18) & 0x3f]);
    out.push_back(kAlphabet[(v >> 12) & 0x3f]);
    out.push_back(kAlphabet[(v >> 6) & 0x3f]);
    out.push_back(kAlphabet[v & 0x3f]);
  }
  const std::size_t rest = data.size() - i;
  if (rest == 1) {
    const std::uint32_t v = data[i] << 16;
    out.push_back(kAlphabet[(v >> 18) & 0x3f]);
    out.push_back(kAlphabet[(v >> 12) & 0x3f]);
  } else if (rest == 2) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(kAlphabet[(v >> 18) & 0x3f]);
    out.push_back(kAlphabet[(v >> 12) & 0x3f]);
    out.push_back(kAlphabet[(v >> 6) & 0x3f]);
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::optional<ParsedUrl> parse_url(const std::string& url) {
  ParsedUrl out;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || scheme_end == 0) return std::nullopt;
  out.scheme = url.substr(0, scheme_end);

  std::size_t host_start = scheme_end + 3;
  std::size_t host_end;
  if (host_start < url.size() && url[host_start] == '[') {
    const auto close = url.find(']', host_start);
    if (close == std::string::npos) return std::nullopt;
    out.host = url.substr(host_start + 1, close - host_start - 1);
    host_end = close + 1;
  } else {
    host_end = url.find_first_of(":/", host_start);
    if (host_end == std::string::npos) host_end = url.size();
    out.host = url.substr(host_start, host_end - host_start);
  }
  if (out.host.empty()) return std::nullopt;

  std::size_t path_start = host_end;
  if (host_end < url.size() && url[host_end] == ':') {
    const auto port_end = url.find('/', host_end + 1);
    const std::string port_str = url.substr(
        host_end + 1,
        (port_end == std::string::npos ? url.size() : port_end) - host_end - 1);
    unsigned port = 0;
    const auto [ptr, ec] =
        std::from_chars(port_str.data(), port_str.data() + port_str.size(), port);
    if (ec != std::errc{} || ptr != port_str.data() + port_str.size() ||
        port == 0 || port > 65535)
      return std::nullopt;
    out.port = static_cast<std::uint16_t>(port);
    path_start = port_end == std::string::npos ? url.size() : port_end;
  }
  out.path = path_start < url.size() ? url.substr(path_start) : "/";
  if (out.path.empty() || out.path[0] != '/') return std::nullopt;
  return out;
}

}  // namespace dohpool::util
