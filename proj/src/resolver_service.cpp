// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "dohpool/resolver_service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <csignal>
#include <cstring>
#include <sstream>

#include "dohpool/log.hpp"
#include "dohpool/security_model.hpp"

namespace dohpool::service {

namespace {

constexpr std::chrono::milliseconds kLoopPollInterval{100};
constexpr std::size_t kMaxTcpMessage = 65535;

struct SockAddr {
  sockaddr_storage storage{};
  socklen_t len = 0;
};

SockAddr make_addr(const std::string& address, std::uint16_t port) {
  SockAddr out;
  auto* v4 = reinterpret_cast<sockaddr_in*>(&out.storage);
  auto* v6 = reinterpret_cast<sockaddr_in6*>(&out.storage);
  if (inet_pton(AF_INET, address.c_str(), &v4->sin_addr) == 1) {
    v4->sin_family = AF_INET;
    v4->sin_port = htons(port);
    out.len = sizeof(sockaddr_in);
  } else if (inet_pton(AF_INET6, address.c_str(), &v6->sin6_addr) == 1) {
    v6->sin6_family = AF_INET6;
    v6->sin6_port = htons(port);
    out.len = sizeof(sockaddr_in6);
  } else {
    throw std::runtime_error("listen address is not an IP address: " + address);
  }
  return out;
}

std::uint16_t bound_port_of(int fd) {
  sockaddr_storage ss{};
  socklen_t len = sizeof ss;
  if (getsockname(fd, reinterpret_cast<sockaddr*>(&ss), &len) != 0)
    throw std::runtime_error("getsockname failed");
  if (ss.ss_family == AF_INET)
    return ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
  return ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port);
}

void set_recv_timeout(int fd, std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = timeout.count() / 1000;
  tv.tv_usec = (timeout.count() % 1000) * 1000;
  setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
}

bool read_exact(int fd, std::uint8_t* buf, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    const ssize_t n = recv(fd, buf + got, len - got, 0);
    if (n <= 0) return false;
    got += static_cast<std::size_t>(n);
  }
  return true;
}

bool write_all(int fd, const std::uint8_t* buf, std::size_t len) {
  std::size_t sent = 0;
  while (sent < len) {
    const ssize_t n = send(fd, buf + sent, len - sent, MSG_NOSIGNAL);
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

std::string summarize(const doh::ResolverResponse& r) {
  std::ostringstream out;
  out << r.resolver << ':';
  if (r.ok())
    out << "ok(" << r.answers().size() << ")";
  else
    out << doh::failure_kind_name(r.failure().kind);
  out << ':' << r.rtt.count() << "ms";
  return out.str();
}

volatile std::sig_atomic_t g_stop_requested = 0;

void stop_signal_handler(int) { g_stop_requested = 1; }

}  // namespace

std::string_view mode_name(Mode mode) {
  return mode == Mode::Pool ? "pool" : "majority";
}

bool allowlist_permits(const std::vector<std::string>& allowlist,
                       std::string_view qname) {
  if (allowlist.empty()) return true;
  const std::string name = dns::lower_name(qname);
  for (const auto& suffix_raw : allowlist) {
    const std::string suffix = dns::lower_name(suffix_raw);
    if (suffix.empty()) continue;
    if (name == suffix) return true;
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0 &&
        name[name.size() - suffix.size() - 1] == '.')
      return true;
  }
  return false;
}

ResolverService::ResolverService(ServiceConfig config)
    : config_(std::move(config)), query_fn_(&doh::query) {
  validate_config(config_);
}

ResolverService::~ResolverService() { stop(); }

void ResolverService::set_query_function(QueryFn fn) {
  query_fn_ = std::move(fn);
}

void ResolverService::start() {
  if (running_.load()) return;

  const auto addr = make_addr(config_.listen_address, config_.port);
  const int family = addr.storage.ss_family;

  // UDP and TCP must share the port number. With an explicit port a
  // single attempt settles it; with port 0 we re-roll until the port the
  // kernel gave UDP is also free for TCP.
  for (int attempt = 0; attempt < 32; ++attempt) {
    udp_fd_ = socket(family, SOCK_DGRAM, 0);
    if (udp_fd_ < 0) throw std::runtime_error("udp socket() failed");
    if (bind(udp_fd_, reinterpret_cast<const sockaddr*>(&addr.storage),
             addr.len) != 0) {
      const std::string err = std::strerror(errno);
      close(udp_fd_);
      udp_fd_ = -1;
      throw std::runtime_error("cannot bind UDP " + config_.listen_address +
                               ":" + std::to_string(config_.port) + ": " + err);
    }
    bound_port_ = bound_port_of(udp_fd_);

    tcp_fd_ = socket(family, SOCK_STREAM, 0);
    if (tcp_fd_ < 0) {
      close(udp_fd_);
      throw std::runtime_error("tcp socket() failed");
    }
    const int one = 1;
    setsockopt(tcp_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    auto tcp_addr = make_addr(config_.listen_address, bound_port_);
    if (bind(tcp_fd_, reinterpret_cast<const sockaddr*>(&tcp_addr.storage),
             tcp_addr.len) == 0 &&
        listen(tcp_fd_, 16) == 0)
      break;

    close(udp_fd_);
    close(tcp_fd_);
    udp_fd_ = tcp_fd_ = -1;
    if (config_.port != 0 || attempt == 31)
      throw std::runtime_error("cannot bind TCP " + config_.listen_address +
                               ":" + std::to_string(bound_port_) + ": " +
                               std::strerror(errno));
  }

  set_recv_timeout(udp_fd_, kLoopPollInterval);
  running_.store(true);
  udp_thread_ = std::thread([this] { udp_loop(); });
  tcp_thread_ = std::thread([this] { tcp_loop(); });

  const std::size_t n = config_.resolvers.size();
  const std::size_t quorum = config_.effective_min_responders();
  const std::size_t implied =
      security::min_compromised_resolvers(n, config_.x > 0 ? config_.x : 1.0);
  log::info("service-start",
            {{"listen", config_.listen_address + ":" +
                            std::to_string(bound_port_)},
             {"resolvers", std::to_string(n)},
             {"min_responders", std::to_string(quorum)},
             {"mode", std::string(mode_name(config_.mode))},
             {"x", std::to_string(config_.x)},
             {"implied_attack_threshold", std::to_string(implied)}});
  if (quorum < n)
    log::warn("degraded-guarantee",
              {{"detail",
                "min_responders below configured resolver count; the "
                "x-fraction guarantee applies to the responder set, not "
                "the configured set"}});
}

void ResolverService::stop() {
  if (!running_.exchange(false)) return;
  if (udp_thread_.joinable()) udp_thread_.join();
  if (tcp_thread_.joinable()) tcp_thread_.join();
  // Workers may still be sending replies; close only once they are done.
  join_workers();
  if (udp_fd_ >= 0) close(udp_fd_);
  if (tcp_fd_ >= 0) close(tcp_fd_);
  udp_fd_ = tcp_fd_ = -1;
}

void ResolverService::track(std::function<void()> work) {
  auto done = std::make_shared<std::atomic<bool>>(false);
  std::thread thread([work = std::move(work), done] {
    work();
    done->store(true);
  });

  std::lock_guard<std::mutex> lock(workers_mutex_);
  // Reap finished workers so a long-running service stays bounded.
  for (auto it = workers_.begin(); it != workers_.end();) {
    if (it->done->load()) {
      it->thread.join();
      it = workers_.erase(it);
    } else {
      ++it;
    }
  }
  workers_.push_back(Worker{std::move(thread), std::move(done)});
}

void ResolverService::join_workers() {
  std::vector<Worker> workers;
  {
    std::lock_guard<std::mutex> lock(workers_mutex_);
    workers.swap(workers_);
  }
  for (auto& w : workers)
    if (w.thread.joinable()) w.thread.join();
}

void ResolverService::udp_loop() {
  std::vector<std::uint8_t> buf(kMaxTcpMessage);
  while (running_.load()) {
    sockaddr_storage peer{};
    socklen_t peer_len = sizeof peer;
    const ssize_t n =
        recvfrom(udp_fd_, buf.data(), buf.size(), 0,
                 reinterpret_cast<sockaddr*>(&peer), &peer_len);
    if (n <= 0) continue;  // timeout poll or transient error

    std::vector<std::uint8_t> datagram(buf.begin(), buf.begin() + n);
    track([this, datagram = std::move(datagram), peer, peer_len] {
      std::optional<std::vector<std::uint8_t>> reply;
      try {
        reply = handle_wire(datagram, /*udp=*/true);
      } catch (const std::exception& e) {
        log::error("query-dropped", {{"error", e.what()}});
      }
      if (reply)
        sendto(udp_fd_, reply->data(), reply->size(), 0,
               reinterpret_cast<const sockaddr*>(&peer), peer_len);
    });
  }
}

void ResolverService::tcp_loop() {
  pollfd pfd{tcp_fd_, POLLIN, 0};
  while (running_.load()) {
    const int ready = poll(&pfd, 1, static_cast<int>(kLoopPollInterval.count()));
    if (ready <= 0) continue;
    const int conn = accept(tcp_fd_, nullptr, nullptr);
    if (conn < 0) continue;
    track([this, conn] { handle_tcp_connection(conn); });
  }
}

void ResolverService::handle_tcp_connection(int fd) {
  set_recv_timeout(fd, config_.per_query_deadline + std::chrono::seconds(5));
  // Length-prefixed messages; serve queries until the peer closes.
  for (;;) {
    std::uint8_t len_buf[2];
    if (!read_exact(fd, len_buf, 2)) break;
    const std::size_t len = (len_buf[0] << 8) | len_buf[1];
    if (len == 0) break;
    std::vector<std::uint8_t> msg(len);
    if (!read_exact(fd, msg.data(), len)) break;

    std::optional<std::vector<std::uint8_t>> reply;
    try {
      reply = handle_wire(msg, /*udp=*/false);
    } catch (const std::exception& e) {
      log::error("query-dropped", {{"error", e.what()}});
    }
    if (!reply) break;
    std::uint8_t out_len[2] = {static_cast<std::uint8_t>(reply->size() >> 8),
                               static_cast<std::uint8_t>(reply->size() & 0xff)};
    if (!write_all(fd, out_len, 2) ||
        !write_all(fd, reply->data(), reply->size()))
      break;
  }
  close(fd);
}

CombineInput ResolverService::fan_out(const dns::Question& question) const {
  struct Shared {
    std::mutex mutex;
    std::condition_variable cv;
    std::size_t remaining;
    std::vector<std::optional<doh::ResolverResponse>> slots;
  };
  const std::size_t n = config_.resolvers.size();
  auto shared = std::make_shared<Shared>();
  shared->remaining = n;
  shared->slots.resize(n);

  const auto deadline =
      std::chrono::steady_clock::now() + config_.per_query_deadline;

  // All queries go out at once: wall time tracks the slowest resolver,
  // capped by the deadline, instead of summing N sequential timeouts.
  for (std::size_t i = 0; i < n; ++i) {
    std::thread([shared, i, endpoint = config_.resolvers[i], question,
                 budget = config_.per_query_deadline, fn = query_fn_] {
      auto response = fn(endpoint, question, budget);
      std::lock_guard<std::mutex> lock(shared->mutex);
      shared->slots[i] = std::move(response);
      if (--shared->remaining == 0) shared->cv.notify_all();
    }).detach();
  }

  {
    std::unique_lock<std::mutex> lock(shared->mutex);
    shared->cv.wait_until(lock, deadline,
                          [&] { return shared->remaining == 0; });
  }

  CombineInput input;
  input.min_responders = config_.effective_min_responders();
  input.empty_is_failure = config_.empty_is_failure;
  input.responses.reserve(n);
  std::lock_guard<std::mutex> lock(shared->mutex);
  for (std::size_t i = 0; i < n; ++i) {
    if (shared->slots[i]) {
      input.responses.push_back(*shared->slots[i]);
    } else {
      input.responses.push_back(doh::ResolverResponse::from_failure(
          config_.resolvers[i].label,
          doh::Failure{doh::Failure::Kind::Timeout, 0, 0,
                       "no answer within query deadline"},
          config_.per_query_deadline));
    }
  }
  return input;
}

std::optional<std::vector<dns::AddressRecord>> ResolverService::cache_lookup(
    const dns::Question& question) {
  if (!config_.cache.enabled) return std::nullopt;
  const auto key = std::make_pair(dns::lower_name(question.qname),
                                  question.qtype);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  const auto it = cache_.find(key);
  if (it == cache_.end()) return std::nullopt;
  if (std::chrono::steady_clock::now() >= it->second.expires) {
    cache_.erase(it);
    return std::nullopt;
  }
  return it->second.answers;
}

void ResolverService::cache_store(
    const dns::Question& question,
    const std::vector<dns::AddressRecord>& answers) {
  if (!config_.cache.enabled || answers.empty()) return;
  std::uint32_t ttl = config_.cache.max_ttl;
  for (const auto& rec : answers) ttl = std::min(ttl, rec.ttl);
  const auto key = std::make_pair(dns::lower_name(question.qname),
                                  question.qtype);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_[key] = CacheEntry{answers, std::chrono::steady_clock::now() +
                                        std::chrono::seconds(ttl)};
}

std::size_t ResolverService::cache_size() const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  return cache_.size();
}

dns::DnsMessage ResolverService::handle_query(const dns::DnsMessage& query) {
  using dns::Rcode;

  if (query.header.opcode != 0)
    return dns::DnsMessage::make_response_for(query, Rcode::NotImp);
  if (!query.question)
    return dns::DnsMessage::make_response_for(query, Rcode::FormErr);

  const dns::Question& q = *query.question;

  // Pool generation is address lookups only.
  if ((q.qtype != dns::kTypeA && q.qtype != dns::kTypeAAAA) ||
      q.qclass != dns::kClassIn) {
    log::debug("refused", {{"qname", q.qname},
                           {"qtype", std::to_string(q.qtype)}});
    return dns::DnsMessage::make_response_for(query, Rcode::Refused);
  }
  if (!allowlist_permits(config_.domain_allowlist, q.qname)) {
    log::debug("refused-not-allowlisted", {{"qname", q.qname}});
    return dns::DnsMessage::make_response_for(query, Rcode::Refused);
  }

  if (auto cached = cache_lookup(q)) {
    auto response = dns::DnsMessage::make_response_for(query);
    response.answers = std::move(*cached);
    log::info("query", {{"qname", q.qname},
                        {"qtype", q.qtype == dns::kTypeA ? "A" : "AAAA"},
                        {"cache", "hit"},
                        {"answers", std::to_string(response.answers.size())},
                        {"rcode", "NOERROR"}});
    return response;
  }

  const CombineInput input = fan_out(q);

  std::string resolver_summary;
  for (const auto& r : input.responses) {
    if (!resolver_summary.empty()) resolver_summary += '|';
    resolver_summary += summarize(r);
  }

  std::vector<dns::AddressRecord> answers;
  Rcode rcode = Rcode::NoError;
  std::size_t k = 0, n_used = 0;

  if (config_.mode == Mode::Pool) {
    const auto outcome = combine_pool(input);
    if (const auto* pool = std::get_if<AddressPool>(&outcome)) {
      answers = pool_to_answers(*pool, q);
      k = pool->k;
      n_used = pool->n_used;
    } else {
      const auto& err = std::get<CombineError>(outcome);
      n_used = err.responders;
      if (err.kind == CombineError::Kind::InsufficientResponders)
        rcode = Rcode::ServFail;
      // EmptyPool: the name exists upstream, the pool is just empty —
      // NOERROR with zero answers, not NXDOMAIN.
    }
  } else {
    const auto outcome = majority_vote(input);
    if (const auto* list =
            std::get_if<std::vector<dns::AddressRecord>>(&outcome)) {
      answers = *list;
      for (auto& rec : answers) rec.name = q.qname;
      n_used = input.responses.size();
    } else {
      const auto& err = std::get<CombineError>(outcome);
      n_used = err.responders;
      if (err.kind == CombineError::Kind::InsufficientResponders)
        rcode = Rcode::ServFail;
    }
  }

  auto response = dns::DnsMessage::make_response_for(query, rcode);
  response.answers = answers;

  if (rcode == Rcode::NoError) cache_store(q, answers);

  log::info("query",
            {{"qname", q.qname},
             {"qtype", q.qtype == dns::kTypeA ? "A" : "AAAA"},
             {"resolvers", resolver_summary},
             {"k", std::to_string(k)},
             {"n_used", std::to_string(n_used)},
             {"mode", std::string(mode_name(config_.mode))},
             {"rcode", std::string(dns::rcode_name(
                           static_cast<std::uint8_t>(rcode)))}});
  return response;
}

std::optional<std::vector<std::uint8_t>> ResolverService::handle_wire(
    std::span<const std::uint8_t> wire, bool udp) {
  dns::DnsMessage query;
  try {
    query = dns::decode_message(wire);
  } catch (const dns::MalformedMessage& e) {
    log::debug("malformed-query", {{"error", e.what()}});
    if (wire.size() < dns::kHeaderSize) return std::nullopt;  // noise; drop
    // Echo the id with FORMERR so the client can correlate the failure.
    dns::DnsMessage formerr;
    formerr.header.id =
        static_cast<std::uint16_t>((wire[0] << 8) | wire[1]);
    formerr.header.qr = true;
    formerr.header.rcode = static_cast<std::uint8_t>(dns::Rcode::FormErr);
    return dns::encode_message(formerr);
  }

  if (query.header.qr) return std::nullopt;  // not a query; drop

  const auto response = handle_query(query);
  auto full = dns::encode_message(response);
  if (udp && full.size() > dns::kClassicUdpLimit) {
    // Classic 512-byte limit (no EDNS handling): signal truncation and
    // let the client retry over TCP for the full answer.
    dns::DnsMessage truncated = response;
    truncated.answers.clear();
    truncated.raw_extra.clear();
    truncated.header.tc = true;
    return dns::encode_message(truncated);
  }
  return full;
}

int serve(ServiceConfig config) {
  ResolverService service(std::move(config));
  try {
    service.start();
  } catch (const std::exception& e) {
    log::error("startup-failed", {{"error", e.what()}});
    return 1;
  }

  g_stop_requested = 0;
  std::signal(SIGINT, stop_signal_handler);
  std::signal(SIGTERM, stop_signal_handler);
  while (!g_stop_requested)
    std::this_thread::sleep_for(std::chrono::milliseconds(100));

  log::info("service-stop", {});
  service.stop();
  return 0;
}

}  // namespace dohpool::service
