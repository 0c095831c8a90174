#include "sibling/packet.hpp"

#include <arpa/inet.h>

namespace sibling {

namespace {

std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] << 8 | p[1]); }

std::uint32_t be32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
         static_cast<std::uint32_t>(p[2]) << 8 | p[3];
}

std::string ntop(int af, const std::uint8_t* addr) {
  char buf[INET6_ADDRSTRLEN];
  if (!inet_ntop(af, addr, buf, sizeof buf)) return {};
  return buf;
}

std::optional<TcpSegmentInfo> parse_tcp(std::span<const std::uint8_t> seg, TcpSegmentInfo info) {
  if (seg.size() < 20) return std::nullopt;
  const std::size_t header_len = static_cast<std::size_t>(seg[12] >> 4) * 4;
  if (header_len < 20 || header_len > seg.size()) return std::nullopt;
  info.src_port = be16(&seg[0]);
  info.dst_port = be16(&seg[2]);
  info.flags = seg[13];
  info.options = parse_tcp_options(seg.subspan(20, header_len - 20));
  for (const auto& o : info.options) {
    if (o.kind == tcpopt::kTimestamps && o.value.size() == 8) {
      info.tsval = be32(&o.value[0]);
      info.tsecr = be32(&o.value[4]);
    }
  }
  return info;
}

}  // namespace

std::vector<TcpOption> parse_tcp_options(std::span<const std::uint8_t> bytes) {
  std::vector<TcpOption> out;
  std::size_t i = 0;
  while (i < bytes.size()) {
    const std::uint8_t kind = bytes[i];
    if (kind == tcpopt::kEol) {
      out.push_back({kind, {}});
      break;
    }
    if (kind == tcpopt::kNop) {
      out.push_back({kind, {}});
      ++i;
      continue;
    }
    if (i + 1 >= bytes.size()) break;
    const std::size_t len = bytes[i + 1];
    if (len < 2 || i + len > bytes.size()) break;
    out.push_back({kind, std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(i + 2),
                                                   bytes.begin() + static_cast<std::ptrdiff_t>(i + len))});
    i += len;
  }
  return out;
}

std::optional<TcpSegmentInfo> parse_ip_packet(std::span<const std::uint8_t> packet) {
  if (packet.empty()) return std::nullopt;
  const int version = packet[0] >> 4;
  TcpSegmentInfo info;
  if (version == 4) {
    if (packet.size() < 20) return std::nullopt;
    const std::size_t ihl = static_cast<std::size_t>(packet[0] & 0x0f) * 4;
    const std::size_t total = be16(&packet[2]);
    if (ihl < 20 || total < ihl || total > packet.size()) return std::nullopt;
    if (packet[9] != IPPROTO_TCP) return std::nullopt;
    if ((be16(&packet[6]) & 0x1fff) != 0) return std::nullopt;
    info.family = Family::V4;
    info.src_ip = ntop(AF_INET, &packet[12]);
    info.dst_ip = ntop(AF_INET, &packet[16]);
    return parse_tcp(packet.subspan(ihl, total - ihl), std::move(info));
  }
  if (version == 6) {
    if (packet.size() < 40) return std::nullopt;
    const std::size_t payload = be16(&packet[4]);
    if (40 + payload > packet.size()) return std::nullopt;
    info.family = Family::V6;
    info.src_ip = ntop(AF_INET6, &packet[8]);
    info.dst_ip = ntop(AF_INET6, &packet[24]);
    std::uint8_t next = packet[6];
    std::size_t off = 40;
    const std::size_t end = 40 + payload;
    while (next != IPPROTO_TCP) {
      if (off + 8 > end) return std::nullopt;
      if (next == IPPROTO_HOPOPTS || next == IPPROTO_ROUTING || next == IPPROTO_DSTOPTS) {
        const std::uint8_t following = packet[off];
        off += (static_cast<std::size_t>(packet[off + 1]) + 1) * 8;
        next = following;
      } else if (next == IPPROTO_FRAGMENT) {
        if ((be16(&packet[off + 2]) & 0xfff8) != 0) return std::nullopt;
        next = packet[off];
        off += 8;
      } else {
        return std::nullopt;
      }
    }
    if (off > end) return std::nullopt;
    return parse_tcp(packet.subspan(off, end - off), std::move(info));
  }
  return std::nullopt;
}

}  // namespace sibling
