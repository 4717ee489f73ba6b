// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "dohpool/doh_client.hpp"

#include <algorithm>
#include <cctype>

#include <httplib.h>

#include "dohpool/util.hpp"

namespace dohpool::doh {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool is_dns_media_type(const std::string& content_type) {
  // Ignore any parameters after ';'.
  const auto semi = content_type.find(';');
  std::string_view base(content_type);
  if (semi != std::string::npos) base = base.substr(0, semi);
  while (!base.empty() && base.back() == ' ') base.remove_suffix(1);
  return iequals(base, kDnsMediaType);
}

Failure transport_failure(httplib::Error err, bool budget_exhausted) {
  Failure f;
  if (err == httplib::Error::ConnectionTimeout || budget_exhausted) {
    f.kind = Failure::Kind::Timeout;
  } else {
    f.kind = Failure::Kind::TransportError;
  }
  f.detail = httplib::to_string(err);
  return f;
}

}  // namespace

std::string_view failure_kind_name(Failure::Kind kind) {
  switch (kind) {
    case Failure::Kind::Timeout:             return "timeout";
    case Failure::Kind::TransportError:      return "transport-error";
    case Failure::Kind::HttpStatus:          return "http-status";
    case Failure::Kind::MalformedDnsPayload: return "malformed-dns-payload";
    case Failure::Kind::DnsError:            return "dns-error";
  }
  return "?";
}

std::string failure_text(const Failure& f) {
  std::string out(failure_kind_name(f.kind));
  if (f.kind == Failure::Kind::HttpStatus)
    out += " " + std::to_string(f.http_status);
  if (f.kind == Failure::Kind::DnsError)
    out += " " + std::string(dns::rcode_name(f.rcode));
  if (!f.detail.empty()) out += " (" + f.detail + ")";
  return out;
}

HttpRequestSpec build_doh_request(const ResolverEndpoint& endpoint,
                                  const dns::DnsMessage& msg) {
  // Id 0 for cache friendliness; responses are matched by question.
  dns::DnsMessage prepared = msg;
  prepared.header.id = 0;
  const auto wire = dns::encode_message(prepared);

  HttpRequestSpec req;
  req.headers.emplace_back("Accept", std::string(kDnsMediaType));

  if (endpoint.method == ResolverEndpoint::Method::Get) {
    const std::string encoded = util::base64url_encode(wire);
    const char sep = endpoint.url.find('?') == std::string::npos ? '?' : '&';
    req.method = "GET";
    req.url = endpoint.url + sep + "dns=" + encoded;
    if (req.url.size() > kMaxGetUrlLength)
      throw dns::MessageTooLarge("GET url of " + std::to_string(req.url.size()) +
                                 " bytes exceeds " +
                                 std::to_string(kMaxGetUrlLength));
    return req;
  }

  req.method = "POST";
  req.url = endpoint.url;
  req.headers.emplace_back("Content-Type", std::string(kDnsMediaType));
  req.body = wire;
  return req;
}

ResolverResponse query(const ResolverEndpoint& endpoint,
                       const dns::Question& question,
                       std::chrono::milliseconds deadline) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() -
                                                                 start);
  };
  const auto fail = [&](Failure f) {
    ResolverResponse r = ResolverResponse::from_failure(endpoint.label,
                                                        std::move(f), elapsed());
    return r;
  };

  dns::DnsMessage query_msg = dns::DnsMessage::make_query(
      question.qname, question.qtype, /*id=*/0, /*rd=*/true);

  HttpRequestSpec req;
  try {
    req = build_doh_request(endpoint, query_msg);
  } catch (const dns::MessageTooLarge&) {
    // GET url too long; fall back to POST for this query.
    ResolverEndpoint post_endpoint = endpoint;
    post_endpoint.method = ResolverEndpoint::Method::Post;
    req = build_doh_request(post_endpoint, query_msg);
  }

  const auto url = util::parse_url(req.url);
  if (!url || url->scheme != "https") {
    Failure f;
    f.kind = Failure::Kind::TransportError;
    f.detail = "endpoint url must be https://...: " + endpoint.url;
    return fail(std::move(f));
  }

  const std::chrono::milliseconds budget =
      std::min(deadline, endpoint.timeout);
  if (budget <= std::chrono::milliseconds::zero())
    return fail(Failure{Failure::Kind::Timeout, 0, 0, "no time budget left"});

  const std::uint16_t port = url->port != 0 ? url->port : 443;
  httplib::SSLClient cli(url->host, port);
  cli.set_connection_timeout(budget);
  cli.set_read_timeout(budget);
  cli.set_write_timeout(budget);
  // Certificate validation is always on; only the anchor set may be
  // overridden.
  cli.enable_server_certificate_verification(true);
  if (!endpoint.ca_cert_pem.empty()) {
    cli.load_ca_cert_store(endpoint.ca_cert_pem.data(),
                           endpoint.ca_cert_pem.size());
  } else if (!endpoint.ca_cert_path.empty()) {
    cli.set_ca_cert_path(endpoint.ca_cert_path);
  }

  httplib::Headers headers;
  for (const auto& [name, value] : req.headers)
    if (!iequals(name, "Content-Type")) headers.emplace(name, value);

  httplib::Result result =
      req.method == "GET"
          ? cli.Get(url->path, headers)
          : cli.Post(url->path, headers,
                     reinterpret_cast<const char*>(req.body.data()),
                     req.body.size(), std::string(kDnsMediaType));

  if (!result) {
    const bool exhausted = elapsed() >= budget;
    return fail(transport_failure(result.error(), exhausted));
  }

  if (result->status != 200) {
    Failure f;
    f.kind = Failure::Kind::HttpStatus;
    f.http_status = result->status;
    return fail(std::move(f));
  }

  if (!is_dns_media_type(result->get_header_value("Content-Type"))) {
    Failure f;
    f.kind = Failure::Kind::MalformedDnsPayload;
    f.detail = "unexpected content type: " +
               result->get_header_value("Content-Type");
    return fail(std::move(f));
  }

  dns::DnsMessage reply;
  try {
    reply = dns::decode_message(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(result->body.data()),
        result->body.size()));
  } catch (const dns::MalformedMessage& e) {
    Failure f;
    f.kind = Failure::Kind::MalformedDnsPayload;
    f.detail = e.what();
    return fail(std::move(f));
  }

  // Matched by question, not id (the id was sent as 0).
  if (!reply.header.qr || !reply.question ||
      !dns::names_equal(reply.question->qname, question.qname) ||
      reply.question->qtype != question.qtype) {
    Failure f;
    f.kind = Failure::Kind::MalformedDnsPayload;
    f.detail = "response does not match question";
    return fail(std::move(f));
  }

  if (reply.header.rcode != static_cast<std::uint8_t>(dns::Rcode::NoError)) {
    Failure f;
    f.kind = Failure::Kind::DnsError;
    f.rcode = reply.header.rcode;
    ResolverResponse r = ResolverResponse::from_failure(endpoint.label,
                                                        std::move(f), elapsed());
    r.rcode = reply.header.rcode;
    return r;
  }

  std::vector<dns::AddressRecord> answers;
  answers.reserve(reply.answers.size());
  for (auto& rec : reply.answers)
    if (static_cast<std::uint16_t>(rec.rtype) == question.qtype)
      answers.push_back(std::move(rec));

  ResolverResponse r = ResolverResponse::from_answers(
      endpoint.label, std::move(answers), elapsed());
  r.rcode = reply.header.rcode;
  return r;
}

}  // namespace dohpool::doh
