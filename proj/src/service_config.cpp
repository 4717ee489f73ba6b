// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dohpool/log.hpp"
#include "dohpool/resolver_service.hpp"
#include "dohpool/util.hpp"

namespace dohpool::service {

namespace {

using nlohmann::json;

doh::ResolverEndpoint endpoint_from_json(const json& j) {
  doh::ResolverEndpoint ep;
  ep.label = j.at("label").get<std::string>();
  ep.url = j.at("url").get<std::string>();
  const std::string method = j.value("method", "POST");
  if (method == "POST") {
    ep.method = doh::ResolverEndpoint::Method::Post;
  } else if (method == "GET") {
    ep.method = doh::ResolverEndpoint::Method::Get;
  } else {
    throw std::invalid_argument("resolver method must be POST or GET: " +
                                method);
  }
  ep.timeout = std::chrono::milliseconds(j.value("timeout_ms", 3000));
  ep.ca_cert_path = j.value("ca_cert_path", "");
  ep.ca_cert_pem = j.value("ca_cert_pem", "");
  return ep;
}

}  // namespace

ServiceConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") +
                                e.what());
  }

  ServiceConfig config;
  try {
    config.listen_address = j.value("listen_address", "127.0.0.1");
    config.port = j.value("port", std::uint16_t{53});

    const std::string mode = j.value("mode", "pool");
    if (mode == "pool") {
      config.mode = Mode::Pool;
    } else if (mode == "majority") {
      config.mode = Mode::Majority;
    } else {
      throw std::invalid_argument("mode must be pool or majority: " + mode);
    }

    config.x = j.value("x", 0.5);
    config.min_responders = j.value("min_responders", std::size_t{0});
    config.empty_is_failure = j.value("empty_is_failure", false);
    config.per_query_deadline =
        std::chrono::milliseconds(j.value("per_query_deadline_ms", 2000));
    if (j.contains("domain_allowlist"))
      for (const auto& s : j.at("domain_allowlist"))
        config.domain_allowlist.push_back(s.get<std::string>());
    if (j.contains("cache")) {
      config.cache.enabled = j.at("cache").value("enabled", false);
      config.cache.max_ttl = j.at("cache").value("max_ttl", 300u);
    }
    for (const auto& r : j.at("resolvers"))
      config.resolvers.push_back(endpoint_from_json(r));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config field: ") + e.what());
  }

  validate_config(config);
  return config;
}

ServiceConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate_config(const ServiceConfig& config) {
  if (config.resolvers.empty())
    throw std::invalid_argument("config needs at least one resolver");

  std::set<std::string> labels;
  for (const auto& ep : config.resolvers) {
    if (ep.label.empty())
      throw std::invalid_argument("resolver label must not be empty");
    if (!labels.insert(ep.label).second)
      throw std::invalid_argument("duplicate resolver label: " + ep.label);
    const auto url = util::parse_url(ep.url);
    if (!url)
      throw std::invalid_argument("cannot parse resolver url: " + ep.url);
    // The guarantee rests on authenticated channels; plain http would
    // silently void it.
    if (url->scheme != "https")
      throw std::invalid_argument("resolver url must be https: " + ep.url);
    if (ep.timeout <= std::chrono::milliseconds::zero())
      throw std::invalid_argument("resolver timeout must be positive: " +
                                  ep.label);
  }

  if (config.min_responders > config.resolvers.size())
    throw std::invalid_argument(
        "min_responders exceeds the number of configured resolvers");
  if (config.per_query_deadline <= std::chrono::milliseconds::zero())
    throw std::invalid_argument("per_query_deadline must be positive");
  if (!(config.x >= 0.0 && config.x <= 1.0))
    throw std::invalid_argument("x must be in [0,1]");
}

void apply_env_overrides(ServiceConfig& config) {
  if (const char* port = std::getenv("DOHPOOL_PORT")) {
    char* end = nullptr;
    const long value = std::strtol(port, &end, 10);
    if (end == port || *end != '\0' || value < 0 || value > 65535)
      throw std::invalid_argument(std::string("bad DOHPOOL_PORT: ") + port);
    config.port = static_cast<std::uint16_t>(value);
  }
  if (const char* level = std::getenv("DOHPOOL_LOG_LEVEL"))
    log::set_level(log::level_from_string(level));
}

}  // namespace dohpool::service
