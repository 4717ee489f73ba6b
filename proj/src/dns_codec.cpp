// Copyright (c) the dohpool authors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "dohpool/dns_codec.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cctype>

namespace dohpool::dns {

namespace {

constexpr std::size_t kMaxPointerJumps = 64;

std::uint16_t read_u16(std::span<const std::uint8_t> wire, std::size_t pos) {
  return static_cast<std::uint16_t>((wire[pos] << 8) | wire[pos + 1]);
}

std::uint32_t read_u32(std::span<const std::uint8_t> wire, std::size_t pos) {
  return (static_cast<std::uint32_t>(wire[pos]) << 24) |
         (static_cast<std::uint32_t>(wire[pos + 1]) << 16) |
         (static_cast<std::uint32_t>(wire[pos + 2]) << 8) |
         static_cast<std::uint32_t>(wire[pos + 3]);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
}

void require(bool ok, const char* what) {
  if (!ok) throw MalformedMessage(what);
}

// Reads a (possibly compressed) name starting at *pos. *pos is advanced
// past the name as it appears in place (i.e. past the first pointer if
// one occurs). Pointers must target a strictly lower offset than where
// they appear, which rules out loops.
std::string parse_name(std::span<const std::uint8_t> wire, std::size_t* pos) {
  std::string name;
  std::size_t p = *pos;
  std::size_t jumps = 0;
  std::size_t total = 0;
  bool jumped = false;

  for (;;) {
    require(p < wire.size(), "name runs past end of message");
    const std::uint8_t len = wire[p];
    if (len == 0) {
      if (!jumped) *pos = p + 1;
      return name;
    }
    if ((len & 0xc0) == 0xc0) {
      require(p + 1 < wire.size(), "truncated compression pointer");
      const std::size_t target =
          (static_cast<std::size_t>(len & 0x3f) << 8) | wire[p + 1];
      require(target < p, "compression pointer does not point backwards");
      require(++jumps <= kMaxPointerJumps, "too many compression pointers");
      if (!jumped) {
        *pos = p + 2;
        jumped = true;
      }
      p = target;
      continue;
    }
    require((len & 0xc0) == 0, "reserved label type");
    require(p + 1 + len <= wire.size(), "label runs past end of message");
    total += len + 1;
    require(total <= kMaxNameLength, "name longer than 255 bytes");
    if (!name.empty()) name.push_back('.');
    for (std::size_t i = 0; i < len; ++i) {
      const char c = static_cast<char>(wire[p + 1 + i]);
      // A '.' inside a label has no faithful dotted-string form; such a
      // name could not be re-encoded (or echoed) correctly.
      require(c != '.', "label contains '.'");
      name.push_back(c);
    }
    p += 1 + len;
  }
}

void encode_name(std::vector<std::uint8_t>& out, std::string_view name) {
  if (name == ".") name = "";
  std::size_t encoded = 1;  // terminal zero
  std::size_t start = 0;
  while (start < name.size()) {
    std::size_t dot = name.find('.', start);
    if (dot == std::string_view::npos) dot = name.size();
    const std::size_t len = dot - start;
    if (len == 0 || len > kMaxLabelLength)
      throw std::invalid_argument("invalid label length in name: " +
                                  std::string(name));
    encoded += len + 1;
    if (encoded > kMaxNameLength)
      throw std::invalid_argument("name longer than 255 bytes: " +
                                  std::string(name));
    out.push_back(static_cast<std::uint8_t>(len));
    out.insert(out.end(), name.begin() + start, name.begin() + dot);
    start = dot + 1;
  }
  out.push_back(0);
}

}  // namespace

std::string_view rcode_name(std::uint8_t rcode) {
  switch (static_cast<Rcode>(rcode)) {
    case Rcode::NoError:  return "NOERROR";
    case Rcode::FormErr:  return "FORMERR";
    case Rcode::ServFail: return "SERVFAIL";
    case Rcode::NxDomain: return "NXDOMAIN";
    case Rcode::NotImp:   return "NOTIMP";
    case Rcode::Refused:  return "REFUSED";
  }
  return "RCODE?";
}

std::string_view address_type_name(AddressType t) {
  return t == AddressType::A ? "A" : "AAAA";
}

std::size_t address_length(AddressType t) {
  return t == AddressType::A ? 4 : 16;
}

AddressRecord AddressRecord::from_text(std::string name, std::uint32_t ttl,
                                       const std::string& address_text) {
  AddressRecord rec;
  rec.name = std::move(name);
  rec.ttl = ttl;
  unsigned char buf[16];
  if (inet_pton(AF_INET, address_text.c_str(), buf) == 1) {
    rec.rtype = AddressType::A;
    rec.address.assign(buf, buf + 4);
  } else if (inet_pton(AF_INET6, address_text.c_str(), buf) == 1) {
    rec.rtype = AddressType::AAAA;
    rec.address.assign(buf, buf + 16);
  } else {
    throw std::invalid_argument("not an IPv4/IPv6 address: " + address_text);
  }
  return rec;
}

std::string AddressRecord::address_text() const {
  char buf[INET6_ADDRSTRLEN] = {0};
  const int af = rtype == AddressType::A ? AF_INET : AF_INET6;
  if (!inet_ntop(af, address.data(), buf, sizeof buf))
    return "<invalid>";
  return buf;
}

DnsMessage DnsMessage::make_query(std::string qname, std::uint16_t qtype,
                                  std::uint16_t id, bool rd) {
  DnsMessage m;
  m.header.id = id;
  m.header.rd = rd;
  m.question = Question{std::move(qname), qtype, kClassIn};
  return m;
}

DnsMessage DnsMessage::make_response_for(const DnsMessage& query, Rcode rcode) {
  DnsMessage m;
  m.header.id = query.header.id;
  m.header.qr = true;
  m.header.opcode = query.header.opcode;
  m.header.rd = query.header.rd;
  m.header.ra = true;
  m.header.rcode = static_cast<std::uint8_t>(rcode);
  m.question = query.question;
  return m;
}

DnsMessage decode_message(std::span<const std::uint8_t> wire) {
  require(wire.size() >= kHeaderSize, "message shorter than header");

  DnsMessage msg;
  msg.header.id = read_u16(wire, 0);
  const std::uint16_t flags = read_u16(wire, 2);
  msg.header.qr = (flags & 0x8000) != 0;
  msg.header.opcode = static_cast<std::uint8_t>((flags >> 11) & 0x0f);
  msg.header.aa = (flags & 0x0400) != 0;
  msg.header.tc = (flags & 0x0200) != 0;
  msg.header.rd = (flags & 0x0100) != 0;
  msg.header.ra = (flags & 0x0080) != 0;
  msg.header.rcode = static_cast<std::uint8_t>(flags & 0x0f);

  const std::uint16_t qdcount = read_u16(wire, 4);
  const std::uint16_t ancount = read_u16(wire, 6);
  const std::uint16_t nscount = read_u16(wire, 8);
  const std::uint16_t arcount = read_u16(wire, 10);
  require(qdcount <= 1, "more than one question");

  std::size_t pos = kHeaderSize;

  if (qdcount == 1) {
    Question q;
    q.qname = parse_name(wire, &pos);
    require(pos + 4 <= wire.size(), "truncated question");
    q.qtype = read_u16(wire, pos);
    q.qclass = read_u16(wire, pos + 2);
    pos += 4;
    msg.question = q;
  }

  for (std::uint16_t i = 0; i < ancount; ++i) {
    std::string name = parse_name(wire, &pos);
    require(pos + 10 <= wire.size(), "truncated resource record");
    const std::uint16_t rtype = read_u16(wire, pos);
    const std::uint16_t rclass = read_u16(wire, pos + 2);
    const std::uint32_t ttl = read_u32(wire, pos + 4);
    const std::uint16_t rdlength = read_u16(wire, pos + 8);
    pos += 10;
    require(pos + rdlength <= wire.size(), "rdata runs past end of message");

    const bool is_a = rtype == kTypeA && rclass == kClassIn && rdlength == 4;
    const bool is_aaaa =
        rtype == kTypeAAAA && rclass == kClassIn && rdlength == 16;
    if (is_a || is_aaaa) {
      AddressRecord rec;
      rec.name = std::move(name);
      rec.rtype = is_a ? AddressType::A : AddressType::AAAA;
      rec.ttl = ttl;
      rec.address.assign(wire.begin() + pos, wire.begin() + pos + rdlength);
      msg.answers.push_back(std::move(rec));
    } else {
      RawRecord raw;
      raw.name = std::move(name);
      raw.rtype = rtype;
      raw.rclass = rclass;
      raw.ttl = ttl;
      raw.rdata.assign(wire.begin() + pos, wire.begin() + pos + rdlength);
      msg.raw_extra.push_back(std::move(raw));
    }
    pos += rdlength;
  }

  // Authority and additional sections are dropped, but still walked so
  // count mismatches and overruns are detected.
  for (std::uint32_t i = 0; i < static_cast<std::uint32_t>(nscount) + arcount;
       ++i) {
    parse_name(wire, &pos);
    require(pos + 10 <= wire.size(), "truncated resource record");
    const std::uint16_t rdlength = read_u16(wire, pos + 8);
    pos += 10;
    require(pos + rdlength <= wire.size(), "rdata runs past end of message");
    pos += rdlength;
  }

  return msg;
}

std::vector<std::uint8_t> encode_message(const DnsMessage& msg,
                                         std::optional<std::size_t> size_limit) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + 64);

  put_u16(out, msg.header.id);
  std::uint16_t flags = 0;
  if (msg.header.qr) flags |= 0x8000;
  flags |= static_cast<std::uint16_t>((msg.header.opcode & 0x0f) << 11);
  if (msg.header.aa) flags |= 0x0400;
  if (msg.header.tc) flags |= 0x0200;
  if (msg.header.rd) flags |= 0x0100;
  if (msg.header.ra) flags |= 0x0080;
  flags |= msg.header.rcode & 0x0f;
  put_u16(out, flags);
  put_u16(out, msg.question ? 1 : 0);
  put_u16(out, static_cast<std::uint16_t>(msg.answers.size() +
                                          msg.raw_extra.size()));
  put_u16(out, 0);  // nscount
  put_u16(out, 0);  // arcount

  if (msg.question) {
    encode_name(out, msg.question->qname);
    put_u16(out, msg.question->qtype);
    put_u16(out, msg.question->qclass);
  }

  for (const auto& rec : msg.answers) {
    const std::size_t want = address_length(rec.rtype);
    if (rec.address.size() != want)
      throw std::invalid_argument("address length does not match record type");
    encode_name(out, rec.name);
    put_u16(out, static_cast<std::uint16_t>(rec.rtype));
    put_u16(out, kClassIn);
    put_u32(out, std::min(rec.ttl, kMaxTtl));
    put_u16(out, static_cast<std::uint16_t>(want));
    out.insert(out.end(), rec.address.begin(), rec.address.end());
  }

  for (const auto& raw : msg.raw_extra) {
    encode_name(out, raw.name);
    put_u16(out, raw.rtype);
    put_u16(out, raw.rclass);
    put_u32(out, std::min(raw.ttl, kMaxTtl));
    put_u16(out, static_cast<std::uint16_t>(raw.rdata.size()));
    out.insert(out.end(), raw.rdata.begin(), raw.rdata.end());
  }

  if (size_limit && out.size() > *size_limit)
    throw MessageTooLarge("message of " + std::to_string(out.size()) +
                          " bytes exceeds limit of " +
                          std::to_string(*size_limit));
  return out;
}

bool names_equal(std::string_view a, std::string_view b) {
  if (a == ".") a = "";
  if (b == ".") b = "";
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

std::string lower_name(std::string_view name) {
  std::string out(name);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

}  // namespace dohpool::dns
