// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dohpool/dns_codec.hpp"
#include "dohpool/doh_client.hpp"
#include "dohpool/pool_combiner.hpp"

namespace dohpool::service {

enum class Mode { Pool, Majority };

std::string_view mode_name(Mode mode);

struct CacheConfig {
  bool enabled = false;
  std::uint32_t max_ttl = 300;  // clamp on cached-entry lifetime, seconds
};

struct ServiceConfig {
  std::string listen_address = "127.0.0.1";
  std::uint16_t port = 53;  // privileged; use a high port for unprivileged runs
  std::vector<doh::ResolverEndpoint> resolvers;
  Mode mode = Mode::Pool;
  // Assumed secure-resolver fraction. Never consulted at lookup time —
  // the combine needs no x — but the implied guarantee is logged at
  // startup so operators see what they are assuming.
  double x = 0.5;
  std::size_t min_responders = 0;  // 0 = require all configured resolvers
  bool empty_is_failure = false;
  std::chrono::milliseconds per_query_deadline{2000};
  // Suffix match, case-insensitive; empty = resolve anything. Deployments
  // should restrict this to the served pool domain.
  std::vector<std::string> domain_allowlist;
  CacheConfig cache;

  std::size_t effective_min_responders() const {
    return min_responders == 0 ? resolvers.size() : min_responders;
  }
};

/// Parses the JSON config file; throws std::invalid_argument with a
/// diagnostic on structural or semantic problems.
ServiceConfig load_config(const std::string& path);
ServiceConfig parse_config(const std::string& json_text);
void validate_config(const ServiceConfig& config);

/// DOHPOOL_PORT overrides the listen port; DOHPOOL_LOG_LEVEL is applied
/// to the global logger.
void apply_env_overrides(ServiceConfig& config);

bool allowlist_permits(const std::vector<std::string>& allowlist,
                       std::string_view qname);

// Standard DNS frontend over UDP and TCP: every incoming A/AAAA query
// fans out to all configured DoH resolvers concurrently and is answered
// with the combined pool. Unmodified stub clients can point at it.
class ResolverService {
public:
  using QueryFn = std::function<doh::ResolverResponse(
      const doh::ResolverEndpoint&, const dns::Question&,
      std::chrono::milliseconds)>;

  explicit ResolverService(ServiceConfig config);
  ~ResolverService();

  ResolverService(const ResolverService&) = delete;
  ResolverService& operator=(const ResolverService&) = delete;

  // Test seam: replaces the network DoH query. Must be set before start().
  void set_query_function(QueryFn fn);

  /// Binds UDP and TCP on the configured port (port 0 picks one
  /// ephemeral port shared by both) and spawns the serving threads.
  /// Throws std::runtime_error on bind failure.
  void start();
  void stop();
  bool running() const { return running_.load(); }
  std::uint16_t port() const { return bound_port_; }
  const ServiceConfig& config() const { return config_; }

  /// Issues the question to all N resolvers concurrently and collects
  /// the outcomes within per_query_deadline; resolvers that miss the
  /// deadline contribute Failure(Timeout).
  CombineInput fan_out(const dns::Question& question) const;

  /// Transport-agnostic pipeline: validate, cache, fan out, combine,
  /// build the response echoing id and question.
  dns::DnsMessage handle_query(const dns::DnsMessage& query);

  /// Wire-level entry: returns the response bytes, or nullopt when the
  /// input must be dropped. UDP responses over 512 bytes are replaced
  /// by a truncated (tc=1) header+question.
  std::optional<std::vector<std::uint8_t>> handle_wire(
      std::span<const std::uint8_t> wire, bool udp);

  std::size_t cache_size() const;

private:
  struct CacheEntry {
    std::vector<dns::AddressRecord> answers;
    std::chrono::steady_clock::time_point expires;
  };

  std::optional<std::vector<dns::AddressRecord>> cache_lookup(
      const dns::Question& question);
  void cache_store(const dns::Question& question,
                   const std::vector<dns::AddressRecord>& answers);

  void udp_loop();
  void tcp_loop();
  void handle_tcp_connection(int fd);
  void track(std::function<void()> work);
  void join_workers();

  ServiceConfig config_;
  QueryFn query_fn_;

  std::atomic<bool> running_{false};
  int udp_fd_ = -1;
  int tcp_fd_ = -1;
  std::uint16_t bound_port_ = 0;
  std::thread udp_thread_;
  std::thread tcp_thread_;

  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  mutable std::mutex workers_mutex_;
  std::vector<Worker> workers_;

  mutable std::mutex cache_mutex_;
  std::map<std::pair<std::string, std::uint16_t>, CacheEntry> cache_;
};

/// Blocking convenience used by the CLI: start the service and run
/// until SIGINT/SIGTERM.
int serve(ServiceConfig config);

}  // namespace dohpool::service
