#include "sibling/prober.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fcntl.h>
#include <map>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sstream>
#include <sys/socket.h>
#include <sys/timex.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include "sibling/ingest.hpp"

namespace sibling {

void ProbeConfig::validate() const {
  if (!(min_sample_interval > 0.0)) throw std::invalid_argument("min_sample_interval must be positive");
  if (!(duration >= 2.0 * min_sample_interval)) {
    throw std::invalid_argument("duration must be at least twice the sample interval");
  }
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (max_parallel_connections < 1) throw std::invalid_argument("max_parallel_connections must be at least 1");
  if (port == 0) throw std::invalid_argument("port must be non-zero");
}

std::string canonical_ip(const std::string& ip) {
  unsigned char buf[sizeof(in6_addr)];
  char out[INET6_ADDRSTRLEN];
  if (inet_pton(AF_INET, ip.c_str(), buf) == 1) return inet_ntop(AF_INET, buf, out, sizeof out);
  if (inet_pton(AF_INET6, ip.c_str(), buf) == 1) return inet_ntop(AF_INET6, buf, out, sizeof out);
  throw std::invalid_argument("not an IP address: " + ip);
}

std::vector<TargetPair> load_targets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open targets file " + path.string());
  std::vector<TargetPair> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (n == 1 && line.rfind("id,", 0) == 0) continue;
    std::istringstream ss(line);
    TargetPair t;
    if (!std::getline(ss, t.id, ',') || !std::getline(ss, t.ip4, ',') || !std::getline(ss, t.ip6, ',')) {
      throw std::runtime_error("targets line " + std::to_string(n) + ": expected id,ip4,ip6");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::set<std::string> load_blacklist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open blacklist " + path.string());
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.insert(canonical_ip(line.substr(b, e - b + 1)));
  }
  return out;
}

std::string_view to_string(ProbeErrc e) {
  switch (e) {
    case ProbeErrc::ConnectTimeout: return "ConnectTimeout";
    case ProbeErrc::NoTimestampOption: return "NoTimestampOption";
    case ProbeErrc::ResetByPeer: return "ResetByPeer";
    case ProbeErrc::ConnectFailed: return "ConnectFailed";
    case ProbeErrc::ResponseTimeout: return "ResponseTimeout";
    case ProbeErrc::Blacklisted: return "Blacklisted";
  }
  return "?";
}

void TargetSession::arm(double now) {
  armed_ = true;
  armed_at_ = now;
}

std::optional<TimestampSample> TargetSession::on_segment(const TcpSegmentInfo& seg, double recv_time) {
  if (seg.is_syn_ack()) {
    auto fp = canonicalize_options(seg.options);
    if (!fingerprint_) {
      fingerprint_ = fp;
    } else if (*fingerprint_ != fp) {
      anomalies_.push_back("FingerprintChanged(" + fingerprint_->str() + " -> " + fp.str() + ")");
    }
    if (!seg.tsval) {
      no_timestamp_ = true;
      return std::nullopt;
    }
  }
  if (!armed_ || !seg.tsval || recv_time < armed_at_ || recv_time <= last_recv_) return std::nullopt;
  armed_ = false;
  last_recv_ = recv_time;
  ++samples_;
  return TimestampSample{std::round(recv_time * 1e6) / 1e6, *seg.tsval};
}

bool ProbeResult::partial_failure() const {
  for (const auto& o : outcomes) {
    if (o.failed || (!o.blacklisted && o.samples == 0)) return true;
  }
  return false;
}

JsonlTraceSink::JsonlTraceSink(const std::filesystem::path& traces, const std::filesystem::path& options)
    : traces_(traces, std::ios::app), options_(options, std::ios::app) {
  if (!traces_ || !options_) throw std::runtime_error("cannot open trace output files");
}

void JsonlTraceSink::sample(const ProbeTarget& t, const TimestampSample& s) {
  traces_ << trace_record(t.id, t.family, t.ip, s) << '\n';
  traces_.flush();
}

void JsonlTraceSink::fingerprint(const ProbeTarget& t, const OptionsFingerprint& fp) {
  options_ << options_record(t.id, t.family, fp) << '\n';
  options_.flush();
}

bool clock_discipline_active() {
  timex tx{};
  const int state = ::adjtimex(&tx);
  if (state < 0) return false;
  return state != TIME_ERROR && !(tx.status & STA_UNSYNC);
}

namespace {

double clock_now(clockid_t id) {
  timespec ts;
  ::clock_gettime(id, &ts);
  return static_cast<double>(ts.tv_sec) + static_cast<double>(ts.tv_nsec) * 1e-9;
}

enum class ConnState { Idle, Connecting, Open };

struct Slot {
  TargetSession session;
  TargetOutcome outcome;
  sockaddr_storage addr{};
  socklen_t addrlen = 0;
  int fd = -1;
  ConnState state = ConnState::Idle;
  std::uint16_t local_port = 0;
  double next_due = 0.0;
  double armed_steady = 0.0;
  double connect_started = 0.0;
  double request_at = 0.0;
  int consecutive_failures = 0;
  bool finished = false;
};

std::string http_request(const ProbeConfig& cfg, const ProbeTarget& t) {
  const std::string host = t.family == Family::V6 ? "[" + t.ip + "]" : t.ip;
  return "GET " + cfg.request_path + " HTTP/1.1\r\nHost: " + host + "\r\nUser-Agent: " + cfg.user_agent +
         "\r\nAccept: */*\r\nConnection: keep-alive\r\n\r\n";
}

}  // namespace

Prober::Prober(ProbeConfig config, SegmentSource& capture, TraceSink& sink)
    : config_(std::move(config)), capture_(capture), sink_(sink) {
  config_.validate();
  log_ = [](const std::string& m) { spdlog::info("{}", m); };
}

ProbeResult Prober::probe_batch(const std::vector<TargetPair>& targets) {
  if (targets.size() > config_.batch_size) {
    throw std::invalid_argument("batch holds more pairs than batch_size");
  }
  std::vector<Slot> slots;
  for (const auto& pair : targets) {
    for (auto [fam, raw] : {std::pair{Family::V4, &pair.ip4}, std::pair{Family::V6, &pair.ip6}}) {
      ProbeTarget t{pair.id, fam, canonical_ip(*raw)};
      Slot s{TargetSession(t), TargetOutcome{t, 0, std::nullopt, {}, {}, false, false}};
      if (fam == Family::V4) {
        auto* sin = reinterpret_cast<sockaddr_in*>(&s.addr);
        sin->sin_family = AF_INET;
        sin->sin_port = htons(config_.port);
        inet_pton(AF_INET, t.ip.c_str(), &sin->sin_addr);
        s.addrlen = sizeof(sockaddr_in);
      } else {
        auto* sin6 = reinterpret_cast<sockaddr_in6*>(&s.addr);
        sin6->sin6_family = AF_INET6;
        sin6->sin6_port = htons(config_.port);
        inet_pton(AF_INET6, t.ip.c_str(), &sin6->sin6_addr);
        s.addrlen = sizeof(sockaddr_in6);
      }
      if (blacklist_.count(t.ip)) {
        s.outcome.blacklisted = true;
        s.outcome.errors.push_back({ProbeErrc::Blacklisted, clock_now(CLOCK_REALTIME), t.ip});
        s.finished = true;
        log_("skipping blacklisted address " + t.ip + " (" + t.id + ")");
      }
      slots.push_back(std::move(s));
    }
  }

  const bool keep_alive = slots.size() <= config_.max_parallel_connections;
  std::map<std::pair<std::string, std::uint16_t>, std::size_t> flows;
  std::size_t open = 0;
  ProbeResult result;
  const double skew0 = clock_now(CLOCK_REALTIME) - clock_now(CLOCK_MONOTONIC);
  const double start = clock_now(CLOCK_MONOTONIC);
  const double end = start + config_.duration;
  for (auto& s : slots) s.next_due = start;

  auto close_slot = [&](Slot& s) {
    if (s.fd >= 0) {
      ::close(s.fd);
      s.fd = -1;
      --open;
      flows.erase({s.session.target().ip, s.local_port});
    }
    s.state = ConnState::Idle;
  };
  auto fail = [&](Slot& s, ProbeErrc code, const std::string& detail, double now) {
    s.outcome.errors.push_back({code, clock_now(CLOCK_REALTIME), detail});
    close_slot(s);
    s.session.disarm();
    s.next_due = now + config_.min_sample_interval;
    if (++s.consecutive_failures >= config_.max_consecutive_failures) {
      s.finished = true;
      s.outcome.failed = true;
      log_("giving up on " + s.session.target().ip + " after repeated " + std::string(to_string(code)));
    }
  };
  auto send_request = [&](Slot& s, double now) {
    const std::string req = http_request(config_, s.session.target());
    if (::send(s.fd, req.data(), req.size(), MSG_NOSIGNAL) < 0) {
      fail(s, errno == ECONNRESET ? ProbeErrc::ResetByPeer : ProbeErrc::ConnectFailed, std::strerror(errno), now);
      return;
    }
    s.request_at = now;
  };
  auto start_connect = [&](Slot& s, double now) {
    const int fd = ::socket(s.addr.ss_family, SOCK_STREAM | SOCK_NONBLOCK | SOCK_CLOEXEC, IPPROTO_TCP);
    if (fd < 0) {
      fail(s, ProbeErrc::ConnectFailed, std::strerror(errno), now);
      return;
    }
    int on = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_KEEPALIVE, &on, sizeof on);
    s.fd = fd;
    ++open;
    s.session.arm(clock_now(CLOCK_REALTIME));
    s.armed_steady = now;
    s.connect_started = now;
    s.request_at = now;
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&s.addr), s.addrlen) < 0 && errno != EINPROGRESS) {
      fail(s, errno == ECONNREFUSED ? ProbeErrc::ResetByPeer : ProbeErrc::ConnectFailed, std::strerror(errno), now);
      return;
    }
    sockaddr_storage local{};
    socklen_t len = sizeof local;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&local), &len);
    s.local_port = ntohs(local.ss_family == AF_INET ? reinterpret_cast<sockaddr_in*>(&local)->sin_port
                                                    : reinterpret_cast<sockaddr_in6*>(&local)->sin6_port);
    flows[{s.session.target().ip, s.local_port}] = static_cast<std::size_t>(&s - slots.data());
    s.state = ConnState::Connecting;
  };

  if (clock_discipline_active()) {
    log_("warning: a clock discipline daemon is active; local receive times may contain adjustments");
  }

  std::vector<pollfd> pfds;
  std::vector<std::size_t> owners;
  for (;;) {
    double now = clock_now(CLOCK_MONOTONIC);
    if (now >= end) break;
    if (std::all_of(slots.begin(), slots.end(), [](const Slot& s) { return s.finished; })) break;

    if (!result.clock_adjusted &&
        std::abs(clock_now(CLOCK_REALTIME) - clock_now(CLOCK_MONOTONIC) - skew0) > 0.01) {
      result.clock_adjusted = true;
      log_("warning: local wall clock was adjusted during the measurement");
    }

    double wake = end;
    for (auto& s : slots) {
      if (s.finished) continue;
      if (s.state == ConnState::Connecting && now - s.connect_started > config_.connect_timeout) {
        fail(s, ProbeErrc::ConnectTimeout, s.session.target().ip, now);
      } else if (s.state == ConnState::Open && s.session.armed() && now - s.request_at > config_.response_timeout) {
        fail(s, ProbeErrc::ResponseTimeout, s.session.target().ip, now);
      }
      if (s.finished) continue;
      if (now >= s.next_due && !s.session.armed()) {
        if (s.state == ConnState::Idle && open < config_.max_parallel_connections) {
          start_connect(s, now);
        } else if (s.state == ConnState::Open) {
          s.session.arm(clock_now(CLOCK_REALTIME));
          s.armed_steady = now;
          send_request(s, now);
        }
      } else if (s.state == ConnState::Idle && s.session.armed() && open < config_.max_parallel_connections) {
        // Peer closed while a sample was pending.
        start_connect(s, now);
      }
      if (!s.session.armed()) wake = std::min(wake, s.next_due);
    }

    pfds.clear();
    owners.clear();
    if (capture_.fd() >= 0) {
      pfds.push_back({capture_.fd(), POLLIN, 0});
      owners.push_back(slots.size());
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& s = slots[i];
      if (s.fd < 0) continue;
      pfds.push_back({s.fd, static_cast<short>(s.state == ConnState::Connecting ? POLLOUT : POLLIN), 0});
      owners.push_back(i);
    }
    const double wait = std::clamp(wake - now, 0.0, 0.05);
    ::poll(pfds.data(), pfds.size(), static_cast<int>(std::ceil(wait * 1000.0)));
    now = clock_now(CLOCK_MONOTONIC);

    while (auto c = capture_.next()) {
      const auto& seg = c->segment;
      if (seg.src_port != config_.port) continue;
      auto it = flows.find({seg.src_ip, seg.dst_port});
      if (it == flows.end()) continue;
      Slot& s = slots[it->second];
      const bool had_fp = s.session.fingerprint().has_value();
      const auto sample = s.session.on_segment(seg, c->timestamp);
      if (!had_fp && s.session.fingerprint()) sink_.fingerprint(s.session.target(), *s.session.fingerprint());
      if (s.session.no_timestamp()) {
        s.outcome.errors.push_back({ProbeErrc::NoTimestampOption, c->timestamp, s.session.target().ip});
        s.outcome.failed = true;
        s.finished = true;
        close_slot(s);
        continue;
      }
      if (sample) {
        sink_.sample(s.session.target(), *sample);
        s.consecutive_failures = 0;
        s.next_due = s.armed_steady + config_.min_sample_interval;
        if (!keep_alive) close_slot(s);
      }
    }

    for (std::size_t p = 0; p < pfds.size(); ++p) {
      if (owners[p] >= slots.size() || pfds[p].revents == 0) continue;
      Slot& s = slots[owners[p]];
      if (s.fd != pfds[p].fd) continue;
      if (s.state == ConnState::Connecting) {
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(s.fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err == 0) {
          s.state = ConnState::Open;
          send_request(s, now);
        } else {
          fail(s, err == ECONNREFUSED ? ProbeErrc::ResetByPeer : ProbeErrc::ConnectFailed, std::strerror(err), now);
        }
      } else if (s.state == ConnState::Open) {
        char buf[4096];
        for (;;) {
          const ssize_t n = ::recv(s.fd, buf, sizeof buf, MSG_DONTWAIT);
          if (n > 0) continue;
          if (n == 0) {
            close_slot(s);  // peer closed; reconnect at the next sample
          } else if (errno == ECONNRESET) {
            s.outcome.errors.push_back({ProbeErrc::ResetByPeer, clock_now(CLOCK_REALTIME), s.session.target().ip});
            close_slot(s);
          }
          break;
        }
      }
    }
  }

  for (auto& s : slots) {
    close_slot(s);
    s.outcome.samples = s.session.samples();
    s.outcome.fingerprint = s.session.fingerprint();
    s.outcome.anomalies = s.session.anomalies();
    result.outcomes.push_back(std::move(s.outcome));
  }
  return result;
}

}  // namespace sibling
