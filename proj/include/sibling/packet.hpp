#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sibling/core.hpp"

namespace sibling {

namespace tcpflag {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kAck = 0x10;
}  // namespace tcpflag

struct TcpSegmentInfo {
  Family family = Family::V4;
  std::string src_ip;
  std::string dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t flags = 0;
  std::vector<TcpOption> options;
  std::optional<std::uint32_t> tsval;
  std::optional<std::uint32_t> tsecr;

  bool is_syn_ack() const {
    return (flags & (tcpflag::kSyn | tcpflag::kAck)) == (tcpflag::kSyn | tcpflag::kAck);
  }
};

/// Options in wire order. Parsing stops after EOL or at the first option
/// whose length runs past the buffer.
std::vector<TcpOption> parse_tcp_options(std::span<const std::uint8_t> bytes);

/// Parses a TCP segment from an IPv4 or IPv6 packet starting at the IP
/// header. Non-TCP, truncated, and non-first fragments yield nullopt.
std::optional<TcpSegmentInfo> parse_ip_packet(std::span<const std::uint8_t> packet);

}  // namespace sibling
