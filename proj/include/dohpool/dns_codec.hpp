// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dohpool::dns {

// Wire constants (RFC 1035).
inline constexpr std::size_t kHeaderSize = 12;
inline constexpr std::size_t kMaxLabelLength = 63;
inline constexpr std::size_t kMaxNameLength = 255;
inline constexpr std::size_t kClassicUdpLimit = 512;

inline constexpr std::uint16_t kTypeA = 1;
inline constexpr std::uint16_t kTypeAAAA = 28;
inline constexpr std::uint16_t kClassIn = 1;

inline constexpr std::uint32_t kMaxTtl = 0x7fffffff;  // emission clamp

enum class Rcode : std::uint8_t {
  NoError = 0,
  FormErr = 1,
  ServFail = 2,
  NxDomain = 3,
  NotImp = 4,
  Refused = 5,
};

std::string_view rcode_name(std::uint8_t rcode);

/// Raised by decode_message on truncated buffers, label overruns,
/// compression loops and count mismatches. The service layer maps it
/// to FORMERR towards the querying client.
class MalformedMessage : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised by encode_message when the serialized form would exceed the
/// transport limit supplied by the caller.
class MessageTooLarge : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Header flags and id. Section counts are not stored: they are derived
// from the section contents on encode, which keeps them consistent by
// construction.
struct DnsHeader {
  std::uint16_t id = 0;
  bool qr = false;
  std::uint8_t opcode = 0;
  bool aa = false;
  bool tc = false;
  bool rd = false;
  bool ra = false;
  std::uint8_t rcode = 0;

  bool operator==(const DnsHeader&) const = default;
};

// Question section entry. qname keeps the original case from the wire;
// comparisons between names are case-insensitive (see names_equal).
struct Question {
  std::string qname;
  std::uint16_t qtype = kTypeA;
  std::uint16_t qclass = kClassIn;

  bool operator==(const Question&) const = default;
};

enum class AddressType : std::uint16_t {
  A = kTypeA,
  AAAA = kTypeAAAA,
};

std::string_view address_type_name(AddressType t);
std::size_t address_length(AddressType t);

// An A or AAAA answer record. address holds exactly 4 bytes for A and
// 16 for AAAA.
struct AddressRecord {
  std::string name;
  AddressType rtype = AddressType::A;
  std::uint32_t ttl = 0;
  std::vector<std::uint8_t> address;

  // Builds a record from dotted-quad or RFC 4291 text form; the record
  // type follows the address family.
  static AddressRecord from_text(std::string name, std::uint32_t ttl,
                                 const std::string& address_text);

  std::string address_text() const;

  bool operator==(const AddressRecord&) const = default;
};

// Answer-section record of a type outside the pool scope, carried
// opaquely. rdata is kept verbatim and is not rewritten, so embedded
// compression pointers (e.g. in CNAME targets) stay unresolved; these
// records are only ever inspected or dropped, never re-emitted upstream.
struct RawRecord {
  std::string name;
  std::uint16_t rtype = 0;
  std::uint16_t rclass = 0;
  std::uint32_t ttl = 0;
  std::vector<std::uint8_t> rdata;

  bool operator==(const RawRecord&) const = default;
};

struct DnsMessage {
  DnsHeader header;
  std::optional<Question> question;
  std::vector<AddressRecord> answers;
  std::vector<RawRecord> raw_extra;

  bool operator==(const DnsMessage&) const = default;

  static DnsMessage make_query(std::string qname, std::uint16_t qtype,
                               std::uint16_t id = 0, bool rd = true);
  // Response skeleton echoing the query's id and question.
  static DnsMessage make_response_for(const DnsMessage& query,
                                      Rcode rcode = Rcode::NoError);
};

/// Parses a DNS message. Answer records other than A/AAAA (class IN)
/// are preserved in raw_extra in section order; authority and additional
/// sections are bounds-checked and dropped. Compression pointers are
/// followed with a strictly-backwards guard.
DnsMessage decode_message(std::span<const std::uint8_t> wire);

/// Serializes a message. Section counts are derived from the contents,
/// names are emitted uncompressed, TTLs are clamped to 2^31-1. Throws
/// MessageTooLarge if size_limit is given and exceeded.
std::vector<std::uint8_t> encode_message(
    const DnsMessage& msg, std::optional<std::size_t> size_limit = std::nullopt);

// Case-insensitive domain-name comparison ("Example.COM" == "example.com").
bool names_equal(std::string_view a, std::string_view b);
std::string lower_name(std::string_view name);

}  // namespace dohpool::dns
