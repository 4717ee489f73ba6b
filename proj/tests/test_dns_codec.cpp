// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dohpool/dns_codec.hpp"
#include "support/generators.hpp"

using namespace dohpool;

namespace {

std::vector<std::uint8_t> from_hex(std::string_view hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2)
    out.push_back(static_cast<std::uint8_t>(
        std::stoi(std::string(hex.substr(i, 2)), nullptr, 16)));
  return out;
}

// Captured from glibc res_mkquery("example.com", IN, A): the reference
// stub-resolver wire form (id 0xbf0d, rd=1).
constexpr std::string_view kReferenceQueryHex =
    "bf0d01000001000000000000076578616d706c6503636f6d0000010001";

}  // namespace

TEST_CASE("minimal header-only message is exactly 12 bytes") {
  dns::DnsMessage msg;
  const auto wire = dns::encode_message(msg);
  CHECK(wire.size() == 12);

  const auto back = dns::decode_message(wire);
  CHECK(back == msg);
  CHECK_FALSE(back.question.has_value());
  CHECK(back.answers.empty());
}

TEST_CASE("decodes the reference-tool query fixture") {
  const auto wire = from_hex(kReferenceQueryHex);
  const auto msg = dns::decode_message(wire);

  CHECK(msg.header.id == 0xbf0d);
  CHECK_FALSE(msg.header.qr);
  CHECK(msg.header.rd);
  CHECK(msg.header.opcode == 0);
  REQUIRE(msg.question.has_value());
  CHECK(msg.question->qname == "example.com");
  CHECK(msg.question->qtype == dns::kTypeA);
  CHECK(msg.question->qclass == dns::kClassIn);
  CHECK(msg.answers.empty());

  // Our uncompressed encoding of the same message reproduces the wire
  // byte-for-byte (the reference tool does not compress queries either).
  CHECK(dns::encode_message(msg) == wire);
}

TEST_CASE("round-trips a response with A and AAAA answers") {
  auto msg = dns::DnsMessage::make_query("pool.ntp.org", dns::kTypeA, 0x1234);
  msg.header.qr = true;
  msg.header.ra = true;
  msg.answers.push_back(
      dns::AddressRecord::from_text("pool.ntp.org", 300, "192.0.2.7"));
  msg.answers.push_back(
      dns::AddressRecord::from_text("pool.NTP.org", 60, "2001:db8::17"));
  msg.answers[1].rtype = dns::AddressType::AAAA;

  const auto wire = dns::encode_message(msg);
  CHECK(dns::decode_message(wire) == msg);
}

TEST_CASE("answer count matches the answer section") {
  dns::DnsMessage msg = dns::DnsMessage::make_query("x.test", dns::kTypeA);
  msg.header.qr = true;
  for (int i = 0; i < 9; ++i)
    msg.answers.push_back(
        dns::AddressRecord::from_text("x.test", 30, "192.0.2.1"));
  const auto wire = dns::encode_message(msg);
  CHECK(wire[6] == 0);
  CHECK(wire[7] == 9);
}

TEST_CASE("property: decode(encode(m)) == m") {
  test::Gen gen(0xc0dec);
  for (int i = 0; i < 3000; ++i) {
    const auto msg = gen.message();
    const auto wire = dns::encode_message(msg);
    const auto back = dns::decode_message(wire);
    REQUIRE(back == msg);
  }
}

TEST_CASE("property: arbitrary bytes parse or throw MalformedMessage") {
  test::Gen gen(0xfadedbee);
  for (int i = 0; i < 3000; ++i) {
    std::vector<std::uint8_t> junk(gen.index(64));
    for (auto& b : junk) b = static_cast<std::uint8_t>(gen.u64() & 0xff);
    try {
      (void)dns::decode_message(junk);
    } catch (const dns::MalformedMessage&) {
    }
  }

  // Mutations of a valid message must not escape the same contract.
  auto msg = dns::DnsMessage::make_query("pool.ntp.org", dns::kTypeA);
  msg.header.qr = true;
  for (int i = 0; i < 4; ++i)
    msg.answers.push_back(
        dns::AddressRecord::from_text("pool.ntp.org", 300, "192.0.2.9"));
  const auto base = dns::encode_message(msg);
  for (int i = 0; i < 3000; ++i) {
    auto mutated = base;
    const std::size_t flips = 1 + gen.index(4);
    for (std::size_t f = 0; f < flips; ++f)
      mutated[gen.index(mutated.size())] ^=
          static_cast<std::uint8_t>(1u << gen.index(8));
    if (gen.chance(0.3)) mutated.resize(gen.index(mutated.size() + 1));
    try {
      (void)dns::decode_message(mutated);
    } catch (const dns::MalformedMessage&) {
    }
  }
}

TEST_CASE("compression pointers are followed") {
  // Header + question "ntp.test" + one A answer whose name is a pointer
  // to offset 12 (the question name).
  std::vector<std::uint8_t> wire = {
      0x00, 0x01, 0x80, 0x00, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00, 0x00, 0x00,
      // question: 3 n t p 4 t e s t 0, A, IN
      3, 'n', 't', 'p', 4, 't', 'e', 's', 't', 0, 0x00, 0x01, 0x00, 0x01,
      // answer: pointer to 12, A, IN, ttl 60, rdlength 4, 192.0.2.1
      0xc0, 0x0c, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00, 0x00, 0x3c, 0x00, 0x04,
      192, 0, 2, 1};
  const auto msg = dns::decode_message(wire);
  REQUIRE(msg.answers.size() == 1);
  CHECK(msg.answers[0].name == "ntp.test");
  CHECK(msg.answers[0].address_text() == "192.0.2.1");
  CHECK(msg.answers[0].ttl == 60);
}

TEST_CASE("compression loops and forward pointers are malformed") {
  // Pointer at offset 12 pointing to itself.
  std::vector<std::uint8_t> self = {0x00, 0x01, 0x00, 0x00, 0x00, 0x01,
                                    0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                                    0xc0, 0x0c, 0x00, 0x01, 0x00, 0x01};
  CHECK_THROWS_AS((void)dns::decode_message(self), dns::MalformedMessage);

  // Pointer pointing forward past itself.
  std::vector<std::uint8_t> forward = {0x00, 0x01, 0x00, 0x00, 0x00, 0x01,
                                       0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                                       0xc0, 0x20, 0x00, 0x01, 0x00, 0x01};
  CHECK_THROWS_AS((void)dns::decode_message(forward), dns::MalformedMessage);

  // Two pointers chasing each other.
  std::vector<std::uint8_t> pair = {0x00, 0x01, 0x00, 0x00, 0x00, 0x01,
                                    0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                                    0xc0, 0x0e, 0x00, 0x00, 0xc0, 0x0c};
  CHECK_THROWS_AS((void)dns::decode_message(pair), dns::MalformedMessage);
}

TEST_CASE("malformed inputs raise MalformedMessage") {
  SUBCASE("shorter than header") {
    std::vector<std::uint8_t> wire(11, 0);
    CHECK_THROWS_AS((void)dns::decode_message(wire), dns::MalformedMessage);
  }
  SUBCASE("count promises more records than present") {
    std::vector<std::uint8_t> wire(12, 0);
    wire[7] = 1;  // ancount = 1, no bytes follow
    CHECK_THROWS_AS((void)dns::decode_message(wire), dns::MalformedMessage);
  }
  SUBCASE("label runs past the buffer") {
    std::vector<std::uint8_t> wire(12, 0);
    wire[5] = 1;  // qdcount
    wire.push_back(63);
    wire.push_back('a');
    CHECK_THROWS_AS((void)dns::decode_message(wire), dns::MalformedMessage);
  }
  SUBCASE("more than one question") {
    std::vector<std::uint8_t> wire(12, 0);
    wire[5] = 2;
    CHECK_THROWS_AS((void)dns::decode_message(wire), dns::MalformedMessage);
  }
  SUBCASE("a dot inside a label has no faithful dotted form") {
    // qname with the single label "a.b": would collide with the
    // two-label name a.b on re-encode.
    std::vector<std::uint8_t> wire = {0x00, 0x01, 0x00, 0x00, 0x00, 0x01,
                                      0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                                      3,    'a',  '.',  'b',  0,
                                      0x00, 0x01, 0x00, 0x01};
    CHECK_THROWS_AS((void)dns::decode_message(wire), dns::MalformedMessage);
  }
  SUBCASE("truncated rdata") {
    auto msg = dns::DnsMessage::make_query("a.test", dns::kTypeA);
    msg.answers.push_back(
        dns::AddressRecord::from_text("a.test", 1, "192.0.2.1"));
    auto wire = dns::encode_message(msg);
    wire.resize(wire.size() - 2);
    CHECK_THROWS_AS((void)dns::decode_message(wire), dns::MalformedMessage);
  }
}

TEST_CASE("non-address answer records are preserved in raw_extra") {
  dns::DnsMessage msg = dns::DnsMessage::make_query("a.test", dns::kTypeA);
  msg.header.qr = true;
  dns::RawRecord txt;
  txt.name = "a.test";
  txt.rtype = 16;  // TXT
  txt.rclass = dns::kClassIn;
  txt.ttl = 60;
  txt.rdata = {4, 't', 'e', 'x', 't'};
  msg.raw_extra.push_back(txt);
  msg.answers.push_back(dns::AddressRecord::from_text("a.test", 60, "192.0.2.1"));

  const auto back = dns::decode_message(dns::encode_message(msg));
  REQUIRE(back.answers.size() == 1);
  REQUIRE(back.raw_extra.size() == 1);
  CHECK(back.raw_extra[0] == txt);
}

TEST_CASE("authority and additional sections are walked and dropped") {
  // A query with an EDNS OPT record in additional, as stock tools send.
  std::vector<std::uint8_t> wire = {
      0x12, 0x34, 0x01, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x01,
      3, 'n', 't', 'p', 4, 't', 'e', 's', 't', 0, 0x00, 0x01, 0x00, 0x01,
      // OPT: root name, type 41, class 4096, ttl 0, rdlength 0
      0x00, 0x00, 0x29, 0x10, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00};
  const auto msg = dns::decode_message(wire);
  REQUIRE(msg.question.has_value());
  CHECK(msg.question->qname == "ntp.test");
  CHECK(msg.raw_extra.empty());

  // Truncating inside the additional section must be caught.
  auto cut = wire;
  cut.resize(wire.size() - 4);
  CHECK_THROWS_AS((void)dns::decode_message(cut), dns::MalformedMessage);
}

TEST_CASE("names keep their case and compare case-insensitively") {
  auto msg = dns::DnsMessage::make_query("ExAmPle.COM", dns::kTypeA);
  const auto back = dns::decode_message(dns::encode_message(msg));
  REQUIRE(back.question.has_value());
  CHECK(back.question->qname == "ExAmPle.COM");
  CHECK(dns::names_equal("Example.COM", "example.com"));
  CHECK(dns::names_equal(back.question->qname, "example.com"));
  CHECK_FALSE(dns::names_equal("example.com", "example.org"));
  CHECK(dns::names_equal("", "."));
}

TEST_CASE("ttl is clamped to 2^31-1 on emission") {
  dns::DnsMessage msg;
  msg.answers.push_back(
      dns::AddressRecord::from_text("a.test", 0xffffffffu, "192.0.2.1"));
  const auto back = dns::decode_message(dns::encode_message(msg));
  CHECK(back.answers[0].ttl == dns::kMaxTtl);
}

TEST_CASE("encode enforces the caller's transport limit") {
  dns::DnsMessage msg = dns::DnsMessage::make_query("some.pool.test",
                                                    dns::kTypeA);
  msg.header.qr = true;
  for (int i = 0; i < 40; ++i)
    msg.answers.push_back(
        dns::AddressRecord::from_text("some.pool.test", 300, "192.0.2.1"));
  CHECK_THROWS_AS((void)dns::encode_message(msg, dns::kClassicUdpLimit),
                  dns::MessageTooLarge);
  CHECK_NOTHROW((void)dns::encode_message(msg));
}

TEST_CASE("encode rejects invariant violations") {
  dns::DnsMessage bad_address;
  bad_address.answers.push_back(
      dns::AddressRecord::from_text("a.test", 1, "192.0.2.1"));
  bad_address.answers[0].rtype = dns::AddressType::AAAA;  // 4 bytes now wrong
  CHECK_THROWS_AS((void)dns::encode_message(bad_address), std::invalid_argument);

  dns::DnsMessage long_label = dns::DnsMessage::make_query(
      std::string(64, 'a') + ".test", dns::kTypeA);
  CHECK_THROWS_AS((void)dns::encode_message(long_label), std::invalid_argument);

  dns::DnsMessage empty_label =
      dns::DnsMessage::make_query("a..test", dns::kTypeA);
  CHECK_THROWS_AS((void)dns::encode_message(empty_label), std::invalid_argument);
}

TEST_CASE("make_response_for echoes id and question") {
  const auto query = dns::DnsMessage::make_query("b.test", dns::kTypeAAAA, 777);
  const auto response =
      dns::DnsMessage::make_response_for(query, dns::Rcode::Refused);
  CHECK(response.header.id == 777);
  CHECK(response.header.qr);
  CHECK(response.header.rcode == 5);
  REQUIRE(response.question.has_value());
  CHECK(*response.question == *query.question);
}
