#include "sibling/capture.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <linux/if_ether.h>
#include <linux/if_packet.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <ctime>

namespace sibling {

PacketCapture::PacketCapture() {
  fd_ = ::socket(AF_PACKET, SOCK_DGRAM | SOCK_NONBLOCK | SOCK_CLOEXEC, htons(ETH_P_ALL));
  if (fd_ < 0) throw CaptureError(std::string("AF_PACKET socket: ") + std::strerror(errno));
  int on = 1;
  if (::setsockopt(fd_, SOL_SOCKET, SO_TIMESTAMPNS, &on, sizeof on) < 0) {
    const int err = errno;
    ::close(fd_);
    throw CaptureError(std::string("SO_TIMESTAMPNS: ") + std::strerror(err));
  }
  int rcvbuf = 8 << 20;
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof rcvbuf);
}

PacketCapture::~PacketCapture() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<CapturedSegment> PacketCapture::next() {
  std::array<std::uint8_t, 65536> buf;
  std::array<char, CMSG_SPACE(sizeof(timespec))> control;
  for (;;) {
    sockaddr_ll from{};
    iovec iov{buf.data(), buf.size()};
    msghdr msg{};
    msg.msg_name = &from;
    msg.msg_namelen = sizeof from;
    msg.msg_iov = &iov;
    msg.msg_iovlen = 1;
    msg.msg_control = control.data();
    msg.msg_controllen = control.size();
    const ssize_t n = ::recvmsg(fd_, &msg, MSG_DONTWAIT);
    if (n < 0) {
      if (errno == EINTR) continue;
      return std::nullopt;
    }
    if (from.sll_pkttype == PACKET_OUTGOING) continue;
    const auto proto = ntohs(from.sll_protocol);
    if (proto != ETH_P_IP && proto != ETH_P_IPV6) continue;

    auto seg = parse_ip_packet(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
    if (!seg) continue;

    CapturedSegment out;
    out.segment = std::move(*seg);
    for (cmsghdr* c = CMSG_FIRSTHDR(&msg); c; c = CMSG_NXTHDR(&msg, c)) {
      if (c->cmsg_level == SOL_SOCKET && c->cmsg_type == SO_TIMESTAMPNS) {
        timespec ts;
        std::memcpy(&ts, CMSG_DATA(c), sizeof ts);
        out.timestamp = static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
      }
    }
    if (out.timestamp == 0.0) {
      timespec now;
      ::clock_gettime(CLOCK_REALTIME, &now);
      out.timestamp = static_cast<double>(now.tv_sec) + static_cast<double>(now.tv_nsec) * 1e-9;
    }
    return out;
  }
}

}  // namespace sibling
