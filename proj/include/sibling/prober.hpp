#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sibling/capture.hpp"
#include "sibling/core.hpp"

namespace sibling {

struct ProbeConfig {
  double duration = 36000.0;           ///< seconds
  double min_sample_interval = 60.0;   ///< seconds between samples per target
  std::size_t batch_size = 10000;      ///< candidate pairs per invocation
  std::string request_path = "/research_scan";
  std::string user_agent = "sibling-prober/1.0 (Internet measurement research; see /research_scan)";
  std::uint16_t port = 80;
  std::size_t max_parallel_connections = 1024;
  double connect_timeout = 5.0;
  double response_timeout = 5.0;
  int max_consecutive_failures = 3;

  void validate() const;
};

/// One candidate pair as named in the targets file (id,ip4,ip6).
struct TargetPair {
  std::string id;
  std::string ip4;
  std::string ip6;
};

struct ProbeTarget {
  std::string id;
  Family family = Family::V4;
  std::string ip;
};

std::vector<TargetPair> load_targets(const std::filesystem::path& path);
/// One address per line; '#' starts a comment.
std::set<std::string> load_blacklist(const std::filesystem::path& path);

/// Canonical textual form (inet_pton → inet_ntop); throws on non-addresses.
std::string canonical_ip(const std::string& ip);

enum class ProbeErrc { ConnectTimeout, NoTimestampOption, ResetByPeer, ConnectFailed, ResponseTimeout, Blacklisted };

std::string_view to_string(ProbeErrc e);

struct ProbeEvent {
  ProbeErrc code;
  double time = 0.0;
  std::string detail;
};

/// Per-address sampling state, independent of sockets. Fed with captured
/// inbound segments of this target's flows.
class TargetSession {
 public:
  explicit TargetSession(ProbeTarget target) : target_(std::move(target)) {}

  /// Arms the session: the next timestamp-bearing segment received at or
  /// after `now` becomes a sample.
  void arm(double now);
  bool armed() const { return armed_; }
  void disarm() { armed_ = false; }
  double armed_at() const { return armed_at_; }

  /// Returns the accepted sample, if any. SYN-ACKs set the fingerprint on the
  /// first handshake; later handshakes with a different fingerprint are
  /// logged as anomalies and do not overwrite it.
  std::optional<TimestampSample> on_segment(const TcpSegmentInfo& seg, double recv_time);

  const ProbeTarget& target() const { return target_; }
  const std::optional<OptionsFingerprint>& fingerprint() const { return fingerprint_; }
  const std::vector<std::string>& anomalies() const { return anomalies_; }
  bool no_timestamp() const { return no_timestamp_; }
  std::size_t samples() const { return samples_; }

 private:
  ProbeTarget target_;
  std::optional<OptionsFingerprint> fingerprint_;
  std::vector<std::string> anomalies_;
  bool no_timestamp_ = false;
  bool armed_ = false;
  double armed_at_ = 0.0;
  double last_recv_ = 0.0;
  std::size_t samples_ = 0;
};

struct TargetOutcome {
  ProbeTarget target;
  std::size_t samples = 0;
  std::optional<OptionsFingerprint> fingerprint;
  std::vector<ProbeEvent> errors;
  std::vector<std::string> anomalies;
  bool blacklisted = false;
  bool failed = false;  ///< gave up (no timestamps, or repeated errors)
};

struct ProbeResult {
  std::vector<TargetOutcome> outcomes;
  bool clock_adjusted = false;
  bool partial_failure() const;
};

/// Receives records as they are produced; one writer for the whole batch.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void sample(const ProbeTarget& t, const TimestampSample& s) = 0;
  virtual void fingerprint(const ProbeTarget& t, const OptionsFingerprint& fp) = 0;
};

/// Appends traces.jsonl / options.jsonl lines, flushing after each record.
class JsonlTraceSink final : public TraceSink {
 public:
  JsonlTraceSink(const std::filesystem::path& traces, const std::filesystem::path& options);
  void sample(const ProbeTarget& t, const TimestampSample& s) override;
  void fingerprint(const ProbeTarget& t, const OptionsFingerprint& fp) override;

 private:
  std::ofstream traces_;
  std::ofstream options_;
};

/// True when the kernel reports a synchronized clock discipline (ntpd,
/// chrony, ...), which bends local receive times during a run.
bool clock_discipline_active();

/// Active TCP timestamp prober. Both addresses of every pair are probed in
/// the same event loop; each sample is elicited on a kept-alive HTTP
/// connection (reconnecting when the peer closes) and read from the passive
/// capture of that connection's inbound segments.
class Prober {
 public:
  Prober(ProbeConfig config, SegmentSource& capture, TraceSink& sink);

  void set_blacklist(std::set<std::string> blacklist) { blacklist_ = std::move(blacklist); }
  /// Called for log lines (default: spdlog).
  void set_logger(std::function<void(const std::string&)> log) { log_ = std::move(log); }

  ProbeResult probe_batch(const std::vector<TargetPair>& targets);

 private:
  ProbeConfig config_;
  SegmentSource& capture_;
  TraceSink& sink_;
  std::set<std::string> blacklist_;
  std::function<void(const std::string&)> log_;
};

}  // namespace sibling
