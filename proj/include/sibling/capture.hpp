#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "sibling/packet.hpp"

namespace sibling {

struct CapturedSegment {
  double timestamp = 0.0;  ///< kernel receive time, seconds since epoch
  TcpSegmentInfo segment;
};

/// Source of inbound TCP segments for the prober.
class SegmentSource {
 public:
  virtual ~SegmentSource() = default;
  /// Pollable descriptor, or -1 when the source is not fd-backed.
  virtual int fd() const = 0;
  /// Next buffered inbound segment without blocking.
  virtual std::optional<CapturedSegment> next() = 0;
};

class CaptureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Passive capture of inbound IPv4/IPv6 TCP segments on all interfaces via a
/// cooked AF_PACKET socket with kernel (SO_TIMESTAMPNS) receive stamps.
/// Outgoing copies are dropped. Needs CAP_NET_RAW.
class PacketCapture final : public SegmentSource {
 public:
  PacketCapture();
  ~PacketCapture() override;
  PacketCapture(const PacketCapture&) = delete;
  PacketCapture& operator=(const PacketCapture&) = delete;

  int fd() const override { return fd_; }
  std::optional<CapturedSegment> next() override;

 private:
  int fd_ = -1;
};

}  // namespace sibling
